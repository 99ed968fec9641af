#include "qflat/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numbers>
#include <queue>

#include "qflat/calculus.hpp"
#include "qflat/potential.hpp"

namespace qflat {

namespace {

constexpr double kExpLimit = 700.0;

double checked_exp(double v, const char* what) {
  if (v > kExpLimit) throw OverflowError(std::string(what) + " overflows (exponent " + std::to_string(v) + ")");
  return std::exp(v);
}

quad::RadialIntegrand volume_integrand(const MetricContext& ctx) {
  const int n = ctx.dim().value();
  quad::RadialIntegrand in;
  in.in_r = [&ctx, n](double r) {
    if (r == 0.0) return 0.0;
    return std::pow(r, n - 1) * checked_exp(n * ctx.profile(r), "e^{nu}");
  };
  in.in_t = [&ctx, n](double t) {
    const double phi = ctx.phi_log(t);
    if (n * phi > kExpLimit) throw OverflowError("e^{nu} overflows");
    return std::exp(n * (t + phi));
  };
  return in;
}

quad::RadialIntegrand ray_integrand(const MetricContext& ctx, std::vector<double> dir) {
  quad::RadialIntegrand in;
  if (ctx.is_radial()) {
    in.in_r = [&ctx](double r) { return checked_exp(ctx.profile(r), "e^u"); };
    in.in_t = [&ctx](double t) {
      const double phi = ctx.phi_log(t);
      if (phi > kExpLimit) throw OverflowError("e^u overflows");
      return std::exp(t + phi);
    };
    return in;
  }
  auto at = [&ctx, dir](double r) {
    std::vector<double> x(dir.size());
    for (std::size_t i = 0; i < dir.size(); ++i) x[i] = r * dir[i];
    return ctx.u(x);
  };
  in.in_r = [at](double r) { return checked_exp(at(r), "e^u"); };
  in.in_t = [at](double t) {
    const double v = at(std::exp(t));
    if (v > kExpLimit) throw OverflowError("e^u overflows");
    return std::exp(t + v);
  };
  return in;
}

ScalarField volume_density(const MetricContext& ctx) {
  const int n = ctx.dim().value();
  const ScalarField u = ctx.u;
  return ScalarField(ctx.dim(), [u, n](std::span<const double> x) { return checked_exp(n * u(x), "e^{nu}"); });
}

bool is_origin(std::span<const double> x) {
  return std::all_of(x.begin(), x.end(), [](double c) { return c == 0.0; });
}

const quad::Tolerance kTight{1e-10, 1e-300, 400};
// Sphere means of non-radial densities are only as good as the angular rule;
// a bounded interval budget keeps adaptive refinement from chasing that noise.
const quad::Tolerance kAngular{1e-6, 1e-300, 32};

}  // namespace

MetricContext::MetricContext(ScalarField field, std::optional<bool> complete_hint)
    : u(std::move(field)), complete(complete_hint) {
  if (u.is_radial()) profile = u.caps().radial;
}

double MetricContext::phi_log(double t) const {
  if (log_profile) return log_profile(t);
  if (!profile) throw NotRadial("metric is not radial");
  return profile(std::exp(t));
}

const char* to_string(Finiteness f) {
  switch (f) {
    case Finiteness::finite: return "finite";
    case Finiteness::infinite: return "infinite";
    case Finiteness::inconclusive: return "inconclusive";
  }
  return "inconclusive";
}

Finiteness finiteness_from(quad::Convergence c) {
  switch (c) {
    case quad::Convergence::convergent: return Finiteness::finite;
    case quad::Convergence::divergent: return Finiteness::infinite;
    case quad::Convergence::inconclusive: return Finiteness::inconclusive;
  }
  return Finiteness::inconclusive;
}

double tail_cap(const MetricContext& ctx) { return ctx.log_profile ? 1024.0 : 256.0; }

double conformal_volume(const MetricContext& ctx, double R, std::span<const double> center) {
  if (!(R > 0.0)) throw InputError("ball radius must be positive");
  const int n = ctx.dim().value();
  std::vector<double> c(center.begin(), center.end());
  if (c.empty()) c.assign(n, 0.0);
  if (static_cast<int>(c.size()) != n) throw DimensionError("ball center has the wrong dimension");
  const double ball = SphereConstants::of(ctx.dim()).unit_ball_volume * std::pow(R, n);
  if (ctx.is_radial()) {
    if (is_origin(c)) {
      const auto area = SphereConstants::of(ctx.dim()).unit_sphere_area;
      return area * quad::integrate_radial_range(volume_integrand(ctx), 0.0, R, kTight).value;
    }
    const RadialFn phi = ctx.profile;
    auto density = [phi, n](double r) { return checked_exp(n * phi(r), "e^{nu}"); };
    return ball * radial_ball_mean(density, n, norm(c), R, 1e-8);
  }
  return ball * ball_mean(volume_density(ctx), c, R, 1e-6);
}

VolumeTotal total_volume(const MetricContext& ctx) {
  const int n = ctx.dim().value();
  const auto sc = SphereConstants::of(ctx.dim());
  quad::TailOptions opts;
  opts.tol = kTight;
  opts.t_cap = tail_cap(ctx);
  quad::TailResult res;
  if (ctx.is_radial()) {
    res = quad::integrate_radial_tail(volume_integrand(ctx), 0.0, opts);
  } else {
    const auto rule = quad::AngularRule::make(n, n == 2 ? 32 : 8);
    const ScalarField dens = volume_density(ctx);
    const std::vector<double> origin(n, 0.0);
    auto mean = [&](double r) { return rule.sphere_mean([&](std::span<const double> y) { return dens(y); }, origin, r); };
    quad::RadialIntegrand in;
    in.in_r = [&](double r) { return std::pow(r, n - 1) * mean(r); };
    in.in_t = [&](double t) {
      const double m = mean(std::exp(t));
      return m == 0.0 ? 0.0 : std::exp(n * t) * m;
    };
    opts.tol = kAngular;
    res = quad::integrate_radial_tail(in, 0.0, opts);
  }
  VolumeTotal out;
  out.cls = finiteness_from(res.status);
  out.value = sc.unit_sphere_area * res.value;
  return out;
}

GrowthEstimate fit_growth(const std::vector<double>& radii, const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size() || x.size() != radii.size()) throw InputError("growth fit inputs differ in length");
  if (x.size() < 3) throw InputError("growth fit needs at least three radii");
  for (double r : radii) {
    if (!(r > 0.0)) throw InputError("growth fit radii must be positive");
  }
  const auto fit = fit_line(x, y);
  GrowthEstimate g;
  g.exponent = fit.slope;
  g.residual = fit.residual;
  const auto [lo, hi] = std::minmax_element(radii.begin(), radii.end());
  g.window[0] = *lo;
  g.window[1] = *hi;
  g.low_confidence = *hi / *lo < 100.0 * (1.0 - 1e-12);
  g.sup_exponent = g.inf_exponent = g.exponent;
  // Sub-window fits need x sorted by radius.
  std::vector<std::size_t> idx(x.size());
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
  std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return radii[a] < radii[b]; });
  const std::size_t part = x.size() >= 6 ? x.size() / 3 : x.size() / 2;
  if (part >= 2) {
    for (int side = 0; side < 2; ++side) {
      std::vector<double> px, py;
      for (std::size_t k = 0; k < part; ++k) {
        const std::size_t i = side == 0 ? idx[k] : idx[x.size() - part + k];
        px.push_back(x[i]);
        py.push_back(y[i]);
      }
      const double s = fit_line(px, py).slope;
      g.sup_exponent = std::max(g.sup_exponent, s);
      g.inf_exponent = std::min(g.inf_exponent, s);
    }
  }
  return g;
}

std::vector<double> geometric_radii(double lo, double hi, int per_decade) {
  if (!(lo > 0.0 && hi > lo) || per_decade < 1) throw InputError("invalid radius window");
  const int steps = static_cast<int>(std::lround(std::log10(hi / lo) * per_decade));
  std::vector<double> r;
  for (int i = 0; i <= steps; ++i) r.push_back(lo * std::pow(hi / lo, static_cast<double>(i) / steps));
  return r;
}

GrowthEstimate volume_growth(const MetricContext& ctx, const std::vector<double>& radii) {
  const int n = ctx.dim().value();
  const double omega = SphereConstants::of(ctx.dim()).unit_ball_volume;
  std::vector<double> xs, ys;
  std::vector<std::pair<double, double>> samples;
  std::vector<double> volumes;
  if (ctx.is_radial()) {
    for (double R : radii) volumes.push_back(conformal_volume(ctx, R));
  } else {
    // One cumulative shell pass with a fixed angular rule; separate ball means
    // per radius cost minutes in n = 4.
    const auto rule = quad::AngularRule::make(n, n == 2 ? 64 : 8);
    const ScalarField dens = volume_density(ctx);
    const std::vector<double> origin(n, 0.0);
    auto mean = [&](double r) { return rule.sphere_mean([&](std::span<const double> y) { return dens(y); }, origin, r); };
    quad::RadialIntegrand in;
    in.in_r = [&](double r) { return r == 0.0 ? 0.0 : std::pow(r, n - 1) * mean(r); };
    in.in_t = [&](double t) {
      const double m = mean(std::exp(t));
      return m == 0.0 ? 0.0 : std::exp(n * t) * m;
    };
    const double area = SphereConstants::of(ctx.dim()).unit_sphere_area;
    std::vector<double> sorted = radii;
    std::sort(sorted.begin(), sorted.end());
    std::map<double, double> at;
    double acc = 0.0, prev = 0.0;
    for (double R : sorted) {
      if (!(R > 0.0)) throw InputError("ball radius must be positive");
      acc += quad::integrate_radial_range(in, prev, R, kAngular).value;
      prev = R;
      at[R] = area * acc;
    }
    for (double R : radii) volumes.push_back(at[R]);
  }
  for (std::size_t i = 0; i < radii.size(); ++i) {
    const double R = radii[i], V = volumes[i];
    if (!(V > 0.0)) throw DomainError("conformal volume vanished");
    xs.push_back(std::log(omega) + n * std::log(R));
    ys.push_back(std::log(V));
    samples.emplace_back(R, V);
  }
  auto g = fit_growth(radii, xs, ys);
  g.samples = std::move(samples);
  return g;
}

double measure_distance(const MetricContext& ctx, std::span<const double> x, std::span<const double> y) {
  const int n = ctx.dim().value();
  if (static_cast<int>(x.size()) != n || static_cast<int>(y.size()) != n) {
    throw DimensionError("points have the wrong dimension");
  }
  const double d = distance(x, y);
  if (d == 0.0) throw PreconditionError("measure distance needs distinct points");
  std::vector<double> mid(n);
  for (int i = 0; i < n; ++i) mid[i] = 0.5 * (x[i] + y[i]);
  return std::pow(conformal_volume(ctx, 0.5 * d, mid), 1.0 / n);
}

RayLength ray_length(const MetricContext& ctx, std::span<const double> direction, double r0, double r1) {
  const int n = ctx.dim().value();
  if (static_cast<int>(direction.size()) != n) throw DimensionError("direction has the wrong dimension");
  if (std::abs(norm(direction) - 1.0) > 1e-9) throw InputError("direction must be a unit vector");
  if (!(r0 >= 0.0 && r1 > r0)) throw InputError("ray needs 0 <= r0 < r1");
  const auto in = ray_integrand(ctx, std::vector<double>(direction.begin(), direction.end()));
  RayLength out;
  if (std::isfinite(r1)) {
    out.value = quad::integrate_radial_range(in, r0, r1, kTight).value;
    return out;
  }
  quad::TailOptions opts;
  opts.tol = kTight;
  opts.t_cap = tail_cap(ctx);
  const auto res = quad::integrate_radial_tail(in, r0, opts);
  out.value = res.value;
  out.cls = finiteness_from(res.status);
  return out;
}

// ---------------------------------------------------------------------------
// Grid graph

namespace {

constexpr int kOffsets[16][2] = {{1, 0},  {-1, 0}, {0, 1},  {0, -1}, {1, 1},  {1, -1}, {-1, 1}, {-1, -1},
                                 {1, 2},  {2, 1},  {-1, 2}, {-2, 1}, {1, -2}, {2, -1}, {-1, -2}, {-2, -1}};

}  // namespace

GridGraph::GridGraph(const MetricContext& ctx, GridSpec spec) : ctx_(&ctx), spec_(std::move(spec)) {
  if (ctx.dim().value() != 2) throw PreconditionError("grid geodesics are implemented for n = 2 only");
  if (spec_.cells_per_axis < 8) throw InputError("grid resolution must be at least 8 cells per axis");
  if (spec_.box.lo.size() != 2 || spec_.box.hi.size() != 2) throw DimensionError("grid box must be planar");
  for (int a = 0; a < 2; ++a) {
    if (!(spec_.box.hi[a] > spec_.box.lo[a])) throw InputError("grid box is degenerate");
  }
  nodes_ = spec_.cells_per_axis + 1;
  const GridField g = sample_grid(ctx.u, spec_.box, nodes_);
  weight_.resize(g.values.size());
  for (std::size_t i = 0; i < g.values.size(); ++i) weight_[i] = checked_exp(g.values[i], "e^u");
}

std::vector<std::pair<int, double>> GridGraph::attach(std::span<const double> x) const {
  int base[2];
  for (int a = 0; a < 2; ++a) {
    const double lo = spec_.box.lo[a], hi = spec_.box.hi[a];
    const double tol = 1e-12 * (hi - lo);
    if (x[a] < lo - tol || x[a] > hi + tol) throw InputError("point lies outside the grid box");
    base[a] = static_cast<int>(std::floor((x[a] - lo) / (hi - lo) * spec_.cells_per_axis));
  }
  const int i0 = std::clamp(base[0], 0, nodes_ - 2), i1 = i0 + 1;
  const int j0 = std::clamp(base[1], 0, nodes_ - 2), j1 = j0 + 1;
  // Corners of the containing cell are pairwise joined by a single edge whose
  // trapezoid samples lie on the quarter lattice of the cell, so K = max e^u
  // there bounds the graph distance between corners by K times their
  // Euclidean distance. Charging the attachment segments at K keeps the
  // triangle inequality exact.
  const double hx = (spec_.box.hi[0] - spec_.box.lo[0]) / spec_.cells_per_axis;
  const double hy = (spec_.box.hi[1] - spec_.box.lo[1]) / spec_.cells_per_axis;
  double wmax = 0.0;
  double p[2];
  for (int a = 0; a <= 4 * (i1 - i0); ++a) {
    for (int b = 0; b <= 4 * (j1 - j0); ++b) {
      p[0] = spec_.box.lo[0] + (i0 + 0.25 * a) * hx;
      p[1] = spec_.box.lo[1] + (j0 + 0.25 * b) * hy;
      wmax = std::max(wmax, checked_exp(ctx_->u.eval_unchecked(std::span<const double>(p, 2)), "e^u"));
    }
  }
  const double K = wmax;
  std::vector<std::pair<int, double>> out;
  for (int i = i0; i <= i1; ++i) {
    for (int j = j0; j <= j1; ++j) {
      const int v = i * nodes_ + j;
      out.emplace_back(v, K * qflat::distance(x, position(v)));
    }
  }
  return out;
}

std::vector<double> GridGraph::position(int v) const {
  const int i = v / nodes_, j = v % nodes_;
  return {spec_.box.lo[0] + i * (spec_.box.hi[0] - spec_.box.lo[0]) / spec_.cells_per_axis,
          spec_.box.lo[1] + j * (spec_.box.hi[1] - spec_.box.lo[1]) / spec_.cells_per_axis};
}

double GridGraph::shortest_path(const std::vector<std::pair<int, double>>& sources,
                                const std::vector<std::pair<int, double>>& targets, double best) const {
  const int N = nodes_;
  const double hx = (spec_.box.hi[0] - spec_.box.lo[0]) / spec_.cells_per_axis;
  const double hy = (spec_.box.hi[1] - spec_.box.lo[1]) / spec_.cells_per_axis;
  std::vector<double> dist(static_cast<std::size_t>(N) * N, std::numeric_limits<double>::infinity());
  std::vector<double> exit_cost(dist.size(), std::numeric_limits<double>::infinity());
  for (const auto& [v, c] : targets) exit_cost[v] = std::min(exit_cost[v], c);
  using Item = std::pair<double, int>;
  std::priority_queue<Item, std::vector<Item>, std::greater<>> heap;
  for (const auto& [v, c] : sources) {
    if (c < dist[v]) {
      dist[v] = c;
      heap.emplace(c, v);
    }
  }
  double p[2];
  while (!heap.empty()) {
    const auto [d, v] = heap.top();
    heap.pop();
    if (d > dist[v]) continue;
    if (d >= best) break;
    best = std::min(best, d + exit_cost[v]);
    const int i = v / N, j = v % N;
    const double x0 = spec_.box.lo[0] + i * hx, y0 = spec_.box.lo[1] + j * hy;
    for (const auto& o : kOffsets) {
      const int ii = i + o[0], jj = j + o[1];
      if (ii < 0 || jj < 0 || ii >= N || jj >= N) continue;
      const int w = ii * N + jj;
      const double dx = o[0] * hx, dy = o[1] * hy;
      // Trapezoid with four sub-intervals; end weights come from the node table.
      double acc = 0.5 * (weight_[v] + weight_[w]);
      for (int k = 1; k <= 3; ++k) {
        p[0] = x0 + k * 0.25 * dx;
        p[1] = y0 + k * 0.25 * dy;
        acc += checked_exp(ctx_->u.eval_unchecked(std::span<const double>(p, 2)), "e^u");
      }
      const double nd = d + std::hypot(dx, dy) * acc / 4.0;
      if (nd < dist[w]) {
        dist[w] = nd;
        heap.emplace(nd, w);
      }
    }
  }
  return best;
}

double GridGraph::distance(std::span<const double> x, std::span<const double> y) const {
  if (x.size() != 2 || y.size() != 2) throw DimensionError("grid distance needs planar points");
  if (x[0] == y[0] && x[1] == y[1]) return 0.0;
  return shortest_path(attach(x), attach(y), std::numeric_limits<double>::infinity());
}

GridSpec grid_around(std::span<const double> x, std::span<const double> y, int cells_per_axis) {
  if (x.size() != y.size()) throw DimensionError("points have different dimensions");
  double span = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) span = std::max(span, std::abs(x[i] - y[i]));
  const double half = 0.5 * span + std::max(1.0, 0.25 * span);
  GridSpec g;
  g.cells_per_axis = cells_per_axis;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double mid = 0.5 * (x[i] + y[i]);
    g.box.lo.push_back(mid - half);
    g.box.hi.push_back(mid + half);
  }
  return g;
}

DistanceResult geodesic_distance(const MetricContext& ctx, std::span<const double> x, std::span<const double> y,
                                 DistanceMethod method, std::optional<GridSpec> grid) {
  const int n = ctx.dim().value();
  if (static_cast<int>(x.size()) != n || static_cast<int>(y.size()) != n) {
    throw DimensionError("points have the wrong dimension");
  }
  const bool ray_ok = ctx.is_radial() && (is_origin(x) || is_origin(y));
  if (method == DistanceMethod::radial_ray && !ray_ok) {
    throw PreconditionError("radial ray distance needs a radial metric and one point at the origin");
  }
  DistanceResult out;
  if (method != DistanceMethod::grid_dijkstra && ray_ok) {
    const auto other = is_origin(x) ? y : x;
    const double r = norm(other);
    out.method = "radial_ray";
    if (r == 0.0) return out;
    std::vector<double> dir(other.begin(), other.end());
    for (auto& c : dir) c /= r;
    out.value = ray_length(ctx, dir, 0.0, r).value;
    return out;
  }
  const GridSpec spec = grid ? *grid : grid_around(x, y);
  const GridGraph graph(ctx, spec);
  out.method = "grid_dijkstra";
  out.resolution = spec;
  out.upper_bound = true;
  out.value = graph.distance(x, y);
  return out;
}

DiameterEstimate diameter_estimate(const MetricContext& ctx) {
  const int n = ctx.dim().value();
  DiameterEstimate out;
  if (ctx.is_radial()) {
    std::vector<double> e1(n, 0.0);
    e1[0] = 1.0;
    const auto ray = ray_length(ctx, e1, 0.0, std::numeric_limits<double>::infinity());
    out.cls = ray.cls;
    // Two antipodal rays close up through the point at infinity into a loop of
    // length 2L; no two points are further apart than half of it, and the
    // origin and infinity are exactly L apart.
    if (ray.cls == Finiteness::finite) out.value = ray.value;
    return out;
  }
  std::vector<std::vector<double>> dirs;
  if (n == 2) {
    for (int k = 0; k < 8; ++k) {
      const double a = 2.0 * std::numbers::pi * k / 8;
      dirs.push_back({std::cos(a), std::sin(a)});
    }
  } else {
    for (int i = 0; i < n; ++i) {
      for (double s : {1.0, -1.0}) {
        std::vector<double> d(n, 0.0);
        d[i] = s;
        dirs.push_back(d);
      }
    }
  }
  int finite = 0, infinite = 0;
  for (const auto& d : dirs) {
    const auto ray = ray_length(ctx, d, 0.0, std::numeric_limits<double>::infinity());
    finite += ray.cls == Finiteness::finite;
    infinite += ray.cls == Finiteness::infinite;
  }
  const int total = static_cast<int>(dirs.size());
  out.cls = finite == total ? Finiteness::finite : infinite == total ? Finiteness::infinite : Finiteness::inconclusive;
  return out;
}

GrowthEstimate distance_growth_exponent(const MetricContext& ctx, std::span<const double> p,
                                        const std::vector<double>& radii) {
  const int n = ctx.dim().value();
  std::vector<double> base(p.begin(), p.end());
  if (base.empty()) base.assign(n, 0.0);
  std::vector<double> xs, ys;
  std::vector<std::pair<double, double>> samples;
  for (double R : radii) {
    std::vector<double> x = base;
    x[0] += R;
    const double d = geodesic_distance(ctx, base, x).value;
    if (!(d > 0.0)) throw DomainError("geodesic distance vanished");
    xs.push_back(std::log(R));
    ys.push_back(std::log(d));
    samples.emplace_back(R, d);
  }
  auto g = fit_growth(radii, xs, ys);
  g.samples = std::move(samples);
  return g;
}

RatioStats strong_ainfty_ratio(const MetricContext& ctx,
                               const std::vector<std::pair<std::vector<double>, std::vector<double>>>& pairs) {
  RatioStats st;
  st.min = std::numeric_limits<double>::infinity();
  st.max = -std::numeric_limits<double>::infinity();
  double sum = 0.0;
  for (const auto& [x, y] : pairs) {
    if (x == y) throw PreconditionError("ratio needs distinct points");
    const double d = geodesic_distance(ctx, x, y).value;
    const double delta = measure_distance(ctx, x, y);
    const double q = d / delta;
    st.min = std::min(st.min, q);
    st.max = std::max(st.max, q);
    sum += q;
    ++st.samples;
  }
  if (st.samples == 0) {
    st.min = st.max = 0.0;
    return st;
  }
  st.mean = sum / st.samples;
  return st;
}

}  // namespace qflat
