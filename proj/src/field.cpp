#include "qflat/field.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include <boost/math/interpolators/cardinal_cubic_b_spline.hpp>

namespace qflat {

namespace {

std::vector<double> random_unit(std::mt19937_64& rng, int n) {
  std::normal_distribution<double> gauss;
  std::vector<double> v(n);
  double s = 0.0;
  do {
    s = 0.0;
    for (auto& c : v) {
      c = gauss(rng);
      s += c * c;
    }
  } while (s < 1e-12);
  s = std::sqrt(s);
  for (auto& c : v) c /= s;
  return v;
}

}  // namespace

ScalarField::ScalarField(Dimension dim, Evaluator eval, FieldCaps caps) : n_(dim.value()) {
  if (!eval) throw InputError("scalar field needs an evaluator");
  eval_ = std::make_shared<const Evaluator>(std::move(eval));
  if (caps.is_radial && !caps.radial) {
    auto ev = eval_;
    const int n = n_;
    caps.radial = [ev, n](double r) {
      std::vector<double> x(n, 0.0);
      x[0] = r;
      return (*ev)(x);
    };
  }
  if (caps.support_radius && !(*caps.support_radius > 0.0)) {
    throw InputError("support radius must be positive");
  }
  caps_ = std::make_shared<const FieldCaps>(std::move(caps));
  if (caps_->is_radial) {
    // Construction-time spot check of the radial promise.
    const double gap = radial_discrepancy(*this, 8, 0x5eedULL);
    if (gap > 1e-10) {
      throw NotRadial("field declared radial but rotation check differs by " + std::to_string(gap));
    }
  }
}

ScalarField ScalarField::constant(Dimension dim, double c) {
  FieldCaps caps;
  caps.is_radial = true;
  caps.radial = [c](double) { return c; };
  for (int k = 0; k < dim.half(); ++k) {
    caps.laplacian_chain.push_back([](std::span<const double>) { return 0.0; });
  }
  caps.gradient = [](std::span<const double>, std::span<double> g) {
    std::fill(g.begin(), g.end(), 0.0);
  };
  if (c == 0.0) caps.support_radius = 1e-300;
  if (c == 0.0) caps.weighted_radial = [](double) { return 0.0; };
  return ScalarField(dim, [c](std::span<const double>) { return c; }, std::move(caps));
}

ScalarField ScalarField::from_expression(const Expression& expr) {
  FieldCaps caps;
  caps.is_radial = expr.depends_only_on_radius();
  return ScalarField(expr.dim(), [expr](std::span<const double> x) { return expr.evaluate(x); },
                     std::move(caps));
}

ScalarField ScalarField::radial(Dimension dim, RadialFn phi, std::vector<RadialFn> chain,
                                std::optional<double> support_radius) {
  FieldCaps caps;
  caps.is_radial = true;
  caps.radial = phi;
  for (auto& c : chain) {
    caps.laplacian_chain.push_back([c](std::span<const double> x) { return c(norm(x)); });
  }
  caps.support_radius = support_radius;
  if (support_radius) caps.breakpoints.push_back(*support_radius);
  return ScalarField(dim, [phi](std::span<const double> x) { return phi(norm(x)); },
                     std::move(caps));
}

double ScalarField::operator()(std::span<const double> x) const {
  if (static_cast<int>(x.size()) != n_) {
    throw DimensionError("field on R^" + std::to_string(n_) + " evaluated at a point of R^" +
                         std::to_string(x.size()));
  }
  const double v = (*eval_)(x);
  if (!std::isfinite(v)) throw DomainError("field evaluated to a non-finite value");
  return v;
}

double ScalarField::operator()(const Point& x) const { return (*this)(x.coords()); }

double ScalarField::radial_value(double r) const {
  if (!caps_->is_radial) throw NotRadial("field is not radial");
  return caps_->radial(r);
}

ScalarField operator+(const ScalarField& a, const ScalarField& b) {
  if (!(a.dim() == b.dim())) throw DimensionError("cannot add fields of different dimension");
  FieldCaps caps;
  caps.is_radial = a.is_radial() && b.is_radial();
  if (caps.is_radial) {
    caps.radial = [a, b](double r) { return a.radial_value(r) + b.radial_value(r); };
    if (a.caps().weighted_radial && b.caps().weighted_radial) {
      caps.weighted_radial = [a, b](double t) {
        return a.caps().weighted_radial(t) + b.caps().weighted_radial(t);
      };
    }
  }
  const int k = std::min(a.caps().laplacian_chain.size(), b.caps().laplacian_chain.size());
  for (int i = 0; i < k; ++i) {
    caps.laplacian_chain.push_back([a, b, i](std::span<const double> x) {
      return a.caps().laplacian_chain[i](x) + b.caps().laplacian_chain[i](x);
    });
  }
  if (a.caps().support_radius && b.caps().support_radius) {
    caps.support_radius = std::max(*a.caps().support_radius, *b.caps().support_radius);
  }
  caps.breakpoints = a.caps().breakpoints;
  caps.breakpoints.insert(caps.breakpoints.end(), b.caps().breakpoints.begin(),
                          b.caps().breakpoints.end());
  return ScalarField(
      a.dim(), [a, b](std::span<const double> x) { return a.eval_unchecked(x) + b.eval_unchecked(x); },
      std::move(caps));
}

ScalarField operator*(double s, const ScalarField& f) {
  FieldCaps caps;
  caps.is_radial = f.is_radial();
  if (caps.is_radial) {
    caps.radial = [s, f](double r) { return s * f.radial_value(r); };
    if (f.caps().weighted_radial) {
      caps.weighted_radial = [s, f](double t) { return s * f.caps().weighted_radial(t); };
    }
  }
  for (std::size_t i = 0; i < f.caps().laplacian_chain.size(); ++i) {
    caps.laplacian_chain.push_back(
        [s, f, i](std::span<const double> x) { return s * f.caps().laplacian_chain[i](x); });
  }
  caps.support_radius = f.caps().support_radius;
  caps.breakpoints = f.caps().breakpoints;
  return ScalarField(
      f.dim(), [s, f](std::span<const double> x) { return s * f.eval_unchecked(x); }, std::move(caps));
}

double radial_discrepancy(const ScalarField& f, int samples, std::uint64_t seed, double r_min,
                          double r_max) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> logr(std::log(r_min), std::log(r_max));
  const int n = f.dim().value();
  double worst = 0.0;
  for (int i = 0; i < samples; ++i) {
    const double r = std::exp(logr(rng));
    auto u = random_unit(rng, n);
    auto v = random_unit(rng, n);
    for (auto& c : u) c *= r;
    for (auto& c : v) c *= r;
    double fu = 0.0, fv = 0.0;
    try {
      fu = f.eval_unchecked(u);
      fv = f.eval_unchecked(v);
    } catch (const DomainError&) {
      continue;
    }
    if (!std::isfinite(fu) || !std::isfinite(fv)) continue;
    worst = std::max(worst, std::abs(fu - fv) / (1.0 + std::abs(fu)));
  }
  return worst;
}

// ---------------------------------------------------------------------------
// RadialProfile

struct RadialProfile::Spline {
  boost::math::interpolators::cardinal_cubic_b_spline<double> s;
  double t0, t1;
};

RadialProfile RadialProfile::sample(RadialFn phi, double tolerance, Grid grid) {
  if (!(grid.r_min > 0.0 && grid.r_max > grid.r_min && grid.nodes_per_decade >= 4)) {
    throw InputError("invalid radial profile grid");
  }
  RadialProfile p;
  p.grid_ = grid;
  p.exact_ = phi;
  const double t0 = std::log(grid.r_min);
  const double t1 = std::log(grid.r_max);
  const int intervals =
      static_cast<int>(std::lround(std::log10(grid.r_max / grid.r_min) * grid.nodes_per_decade));
  const double h = (t1 - t0) / intervals;
  std::vector<double> values(intervals + 1);
  for (int i = 0; i <= intervals; ++i) values[i] = phi(std::exp(t0 + i * h));
  auto spline = std::make_shared<Spline>(
      Spline{boost::math::interpolators::cardinal_cubic_b_spline<double>(values.data(), values.size(), t0, h),
             t0, t1});
  // Off-node validation at interval midpoints.
  double worst = 0.0;
  for (int i = 0; i < intervals; ++i) {
    const double t = t0 + (i + 0.5) * h;
    const double exact = phi(std::exp(t));
    worst = std::max(worst, std::abs(spline->s(t) - exact) / (1.0 + std::abs(exact)));
  }
  p.validation_error_ = worst;
  p.spline_active_ = worst <= tolerance;
  p.spline_ = std::move(spline);
  return p;
}

double RadialProfile::operator()(double r) const {
  if (spline_active_ && r >= grid_.r_min && r <= grid_.r_max) return spline_->s(std::log(r));
  return exact_(r);
}

double RadialProfile::derivative(double r, int order) const {
  if (order == 0) return (*this)(r);
  if (spline_active_ && order <= 2 && r >= grid_.r_min && r <= grid_.r_max) {
    // t = log r: phi' = g'/r, phi'' = (g'' - g')/r^2.
    const double t = std::log(r);
    const double g1 = spline_->s.prime(t);
    if (order == 1) return g1 / r;
    return (spline_->s.double_prime(t) - g1) / (r * r);
  }
  // Central differences of the exact profile, nested.
  const double h = 1e-3 * std::max(r, 1e-2);
  std::function<double(double, int)> d = [&](double x, int k) -> double {
    if (k == 0) return exact_(std::abs(x));
    return (d(x + h, k - 1) - d(x - h, k - 1)) / (2.0 * h);
  };
  return d(r, order);
}

RadialProfile restrict_radial(const ScalarField& f, double tolerance) {
  const int n = f.dim().value();
  std::mt19937_64 rng(0xad1a1ULL);
  // Validation radii spread over the profile grid.
  for (double r : {1e-4, 1e-2, 0.5, 1.0, 3.0, 1e2, 1e4}) {
    std::vector<double> axis(n, 0.0);
    axis[0] = r;
    const double ref = f.eval_unchecked(axis);
    for (int k = 0; k < 4; ++k) {
      auto v = random_unit(rng, n);
      for (auto& c : v) c *= r;
      const double val = f.eval_unchecked(v);
      if (std::abs(val - ref) > tolerance * (1.0 + std::abs(ref))) {
        throw NotRadial("field is not radial: f differs by " + std::to_string(std::abs(val - ref)) +
                        " on the sphere of radius " + std::to_string(r));
      }
    }
  }
  RadialFn phi;
  if (f.is_radial()) {
    phi = f.caps().radial;
  } else {
    phi = [f, n](double r) {
      std::vector<double> x(n, 0.0);
      x[0] = r;
      return f.eval_unchecked(x);
    };
  }
  return RadialProfile::sample(std::move(phi), tolerance);
}

// ---------------------------------------------------------------------------
// TableProfile

TableProfile::TableProfile(std::vector<double> r, std::vector<double> v)
    : r_(std::move(r)), v_(std::move(v)) {
  const std::size_t n = r_.size();
  if (n < 2 || v_.size() != n) throw InputError("radial table needs at least two [r, value] nodes");
  for (std::size_t i = 0; i < n; ++i) {
    if (!std::isfinite(r_[i]) || !std::isfinite(v_[i]) || r_[i] < 0.0) {
      throw InputError("radial table nodes must be finite with r >= 0");
    }
    if (i > 0 && !(r_[i] > r_[i - 1])) throw InputError("radial table radii must be increasing");
  }
  // Tridiagonal system for second derivatives. Left end: clamped slope 0 when
  // the table starts at the origin, natural otherwise. Right end natural.
  std::vector<double> a(n, 0.0), b(n, 0.0), c(n, 0.0), d(n, 0.0);
  if (r_[0] == 0.0) {
    const double h0 = r_[1] - r_[0];
    b[0] = h0 / 3.0;
    c[0] = h0 / 6.0;
    d[0] = (v_[1] - v_[0]) / h0;
  } else {
    b[0] = 1.0;
  }
  for (std::size_t i = 1; i + 1 < n; ++i) {
    const double h0 = r_[i] - r_[i - 1];
    const double h1 = r_[i + 1] - r_[i];
    a[i] = h0 / 6.0;
    b[i] = (h0 + h1) / 3.0;
    c[i] = h1 / 6.0;
    d[i] = (v_[i + 1] - v_[i]) / h1 - (v_[i] - v_[i - 1]) / h0;
  }
  b[n - 1] = 1.0;
  // Thomas algorithm.
  for (std::size_t i = 1; i < n; ++i) {
    const double w = a[i] / b[i - 1];
    b[i] -= w * c[i - 1];
    d[i] -= w * d[i - 1];
  }
  m_.assign(n, 0.0);
  m_[n - 1] = d[n - 1] / b[n - 1];
  for (std::size_t i = n - 1; i-- > 0;) m_[i] = (d[i] - c[i] * m_[i + 1]) / b[i];
  const double h = r_[n - 1] - r_[n - 2];
  const double slope = (v_[n - 1] - v_[n - 2]) / h + h * (m_[n - 2] + 2.0 * m_[n - 1]) / 6.0;
  tail_slope_ = r_[n - 1] * slope;
}

double TableProfile::operator()(double r) const {
  const std::size_t n = r_.size();
  if (r >= r_[n - 1]) {
    return v_[n - 1] + (r > 0.0 ? tail_slope_ * std::log(r / r_[n - 1]) : 0.0);
  }
  if (r <= r_[0]) return v_[0];
  const auto it = std::upper_bound(r_.begin(), r_.end(), r);
  const std::size_t i = static_cast<std::size_t>(it - r_.begin()) - 1;
  const double h = r_[i + 1] - r_[i];
  const double A = (r_[i + 1] - r) / h;
  const double B = (r - r_[i]) / h;
  return A * v_[i] + B * v_[i + 1] + ((A * A * A - A) * m_[i] + (B * B * B - B) * m_[i + 1]) * h * h / 6.0;
}

// ---------------------------------------------------------------------------
// Grid sampling

double GridField::coordinate(int axis, int i) const {
  return box.lo[axis] + i * (box.hi[axis] - box.lo[axis]) / (nodes_per_axis - 1);
}

std::size_t GridField::flat_index(std::span<const int> idx) const {
  std::size_t flat = 0;
  for (int k : idx) flat = flat * nodes_per_axis + static_cast<std::size_t>(k);
  return flat;
}

GridField sample_grid(const ScalarField& f, const Box& box, int nodes_per_axis) {
  const int n = f.dim().value();
  if (nodes_per_axis < 2) throw InputError("grid resolution must be at least 2");
  if (static_cast<int>(box.lo.size()) != n || static_cast<int>(box.hi.size()) != n) {
    throw DimensionError("grid box dimension does not match the field");
  }
  for (int k = 0; k < n; ++k) {
    if (!(box.hi[k] > box.lo[k])) throw InputError("grid box is degenerate along axis " + std::to_string(k));
  }
  GridField g;
  g.box = box;
  g.nodes_per_axis = nodes_per_axis;
  std::size_t total = 1;
  for (int k = 0; k < n; ++k) total *= static_cast<std::size_t>(nodes_per_axis);
  g.values.resize(total);
  std::vector<int> idx(n, 0);
  std::vector<double> x(n);
  for (std::size_t flat = 0; flat < total; ++flat) {
    std::size_t rem = flat;
    for (int k = n - 1; k >= 0; --k) {
      idx[k] = static_cast<int>(rem % nodes_per_axis);
      rem /= nodes_per_axis;
    }
    for (int k = 0; k < n; ++k) x[k] = g.coordinate(k, idx[k]);
    try {
      g.values[flat] = f(x);
    } catch (const NumericError& e) {
      std::string where;
      for (int k = 0; k < n; ++k) where += (k ? "," : "") + std::to_string(idx[k]);
      throw DomainError(std::string(e.what()) + " at grid node (" + where + ")");
    }
  }
  return g;
}

}  // namespace qflat
