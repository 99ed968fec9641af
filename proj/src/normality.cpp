#include "qflat/normality.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <sstream>

#include <Eigen/Dense>

#include "qflat/calculus.hpp"

namespace qflat {

using nlohmann::json;

namespace {

std::vector<double> unit_direction(int n, std::mt19937_64& rng) {
  std::normal_distribution<double> g(0.0, 1.0);
  std::vector<double> d(n);
  double s = 0.0;
  do {
    s = 0.0;
    for (auto& c : d) {
      c = g(rng);
      s += c * c;
    }
  } while (s < 1e-12);
  s = std::sqrt(s);
  for (auto& c : d) c /= s;
  return d;
}

double monomial(std::span<const double> x, const MultiIndex& a, double scale) {
  double v = 1.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    for (int k = 0; k < a[i]; ++k) v *= x[i] / scale;
  }
  return v;
}

int degree_of(const MultiIndex& a) {
  int d = 0;
  for (int k : a) d += k;
  return d;
}

const quad::AngularRule& origin_rule(int n) {
  static std::mutex mu;
  static std::map<int, std::unique_ptr<quad::AngularRule>> cache;
  std::lock_guard lock(mu);
  auto& slot = cache[n];
  if (!slot) slot = std::make_unique<quad::AngularRule>(quad::AngularRule::make(n, n == 2 ? 32 : (n == 4 ? 6 : 4)));
  return *slot;
}

// Field with the same radial structure as `w` (when it has one) and values g(x).
ScalarField derived_field(const ScalarField& w, std::function<double(std::span<const double>)> g) {
  FieldCaps caps;
  if (w.is_radial()) {
    caps.is_radial = true;
    const int n = w.dim().value();
    caps.radial = [g, n](double r) {
      std::vector<double> x(n, 0.0);
      x[0] = r;
      return g(x);
    };
  }
  caps.breakpoints = w.caps().breakpoints;
  return ScalarField(w.dim(), std::move(g), std::move(caps));
}

GrowthVerdict criterion(const ScalarField& g, const std::vector<double>& radii, double threshold) {
  const auto I = ball_integrals(g, radii);
  std::vector<std::pair<double, double>> s;
  for (std::size_t i = 0; i < radii.size(); ++i) s.emplace_back(radii[i], std::max(0.0, I[i]));
  return growth_classifier(s, threshold);
}

void require_n4(const ScalarField& f, const char* what) {
  if (f.dim().value() < 4) throw DimensionError(std::string(what) + " is stated for n >= 4");
}

json verdict_json(const GrowthVerdict& v) {
  json j;
  j["verdict"] = to_string(v.verdict);
  j["fitted_exponent"] = v.fitted_exponent;
  j["threshold"] = v.threshold;
  j["margin"] = v.margin;
  if (!v.note.empty()) j["note"] = v.note;
  return j;
}

json not_applicable(const std::string& why) { return json{{"verdict", "not_applicable"}, {"note", why}}; }

json optional_number(const std::optional<double>& v) {
  if (v && std::isfinite(*v)) return *v;
  return nullptr;
}

std::optional<double> read_number(const json& j) {
  if (j.is_null()) return std::nullopt;
  return j.get<double>();
}

}  // namespace

// ---------------------------------------------------------------------------

SampleSet SampleSet::make(Dimension dim, std::uint64_t seed, double r_min, int decades, int radii, int directions) {
  if (!(r_min > 0.0) || decades < 1 || radii < 2 || directions < 1) throw InputError("invalid sample set");
  const int n = dim.value();
  SampleSet s;
  s.r_min = r_min;
  s.decades = decades;
  s.radii = radii;
  s.directions = directions;
  s.seed = seed;
  std::mt19937_64 rng(seed);
  for (int i = 0; i < radii; ++i) {
    const double r = r_min * std::pow(10.0, static_cast<double>(decades) * i / (radii - 1));
    for (int k = 0; k < directions; ++k) {
      auto d = unit_direction(n, rng);
      for (auto& c : d) c *= r;
      s.points.push_back(std::move(d));
    }
  }
  return s;
}

std::string SampleSet::describe() const {
  std::ostringstream os;
  os << radii << " radii x " << directions << " directions, |x| in [" << r_min << ", "
     << r_min * std::pow(10.0, decades) << "], seed " << seed;
  return os.str();
}

Decomposition decompose(const ScalarField& w, const ScalarField& f, const SampleSet& samples,
                        std::optional<int> max_degree) {
  return decompose(shared_evaluator(w.dim()), w, f, samples, max_degree);
}

Decomposition decompose(const PotentialEvaluator& ev, const ScalarField& w, const ScalarField& f,
                        const SampleSet& samples, std::optional<int> max_degree) {
  const int n = w.dim().value();
  if (!(f.dim() == w.dim())) throw DimensionError("w and f live in different dimensions");
  const int deg = max_degree.value_or(n - 2);
  if (deg < 0) throw InputError("maximum degree must be >= 0");
  const auto basis = indices_up_to(n, deg);
  const std::size_t m = samples.points.size(), p = basis.size();
  if (m < 3 * p) {
    throw PreconditionError("sample set has " + std::to_string(m) + " points; need at least " +
                            std::to_string(3 * p) + " for " + std::to_string(p) + " monomials");
  }
  double rmin = std::numeric_limits<double>::infinity(), rmax = 0.0;
  for (const auto& x : samples.points) {
    if (static_cast<int>(x.size()) != n) throw DimensionError("sample point has the wrong dimension");
    rmin = std::min(rmin, norm(x));
    rmax = std::max(rmax, norm(x));
  }
  if (!(rmin > 0.0) || rmax / rmin < 100.0 * (1.0 - 1e-9)) {
    throw PreconditionError("sample radii must span at least two decades away from the origin");
  }

  // w - L(f) at the samples. Radial densities need one potential per radius.
  std::map<double, double> radial_cache;
  Eigen::VectorXd y(m);
  for (std::size_t i = 0; i < m; ++i) {
    const auto& x = samples.points[i];
    double pot;
    if (f.is_radial()) {
      const double r = norm(x);
      auto it = radial_cache.find(r);
      if (it == radial_cache.end()) it = radial_cache.emplace(r, ev.radial_value(f, r)).first;
      pot = it->second;
    } else {
      pot = ev.value(f, x);
    }
    y[i] = w(x) - pot;
  }
  Eigen::MatrixXd A(m, p);
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t k = 0; k < p; ++k) A(i, k) = monomial(samples.points[i], basis[k], rmax);
  }
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(A, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const auto& sv = svd.singularValues();
  if (sv.minCoeff() <= 1e-13 * sv.maxCoeff()) throw PreconditionError("sample set does not determine the polynomial");
  const Eigen::VectorXd c = svd.solve(y);
  const Eigen::VectorXd resid = y - A * c;
  const double rss = resid.squaredNorm();

  Decomposition out;
  out.max_degree = deg;
  out.polynomial_part = Polynomial(w.dim());
  out.fit_residual = std::sqrt(rss / m);
  out.data_scale = std::sqrt(y.squaredNorm() / m);
  out.sample_set = samples.describe();
  const double sigma2 = m > p ? rss / static_cast<double>(m - p) : 0.0;
  const Eigen::MatrixXd V = svd.matrixV();
  const Eigen::VectorXd inv2 = sv.array().inverse().square();
  // Effect floor: a coefficient matters only if its monomial moves the data by
  // more than the evaluation noise at the outermost sample radius.
  const double floor = 1e-6 * (1.0 + out.data_scale);
  for (std::size_t k = 0; k < p; ++k) {
    const double var = sigma2 * (V.row(k).array().square() * inv2.transpose().array()).sum();
    const double se = std::sqrt(std::max(var, 0.0));
    const double scale = std::pow(rmax, degree_of(basis[k]));
    const double coef = c[k] / scale;
    if (coef != 0.0) out.polynomial_part.add_term(basis[k], coef);
    out.standard_errors[basis[k]] = se / scale;
    if (degree_of(basis[k]) >= 1 && std::abs(c[k]) > 10.0 * se && std::abs(c[k]) > floor) out.nonconstant = true;
  }
  out.residual_flag = out.fit_residual > 1e-6 * (1.0 + out.data_scale);
  return out;
}

// ---------------------------------------------------------------------------

const char* to_string(Growth g) {
  switch (g) {
    case Growth::little_o: return "little_o";
    case Growth::not_little_o: return "not_little_o";
    case Growth::inconclusive: return "inconclusive";
    case Growth::not_applicable: return "not_applicable";
  }
  return "inconclusive";
}

Growth growth_from_string(const std::string& s) {
  for (Growth g : {Growth::little_o, Growth::not_little_o, Growth::inconclusive, Growth::not_applicable}) {
    if (s == to_string(g)) return g;
  }
  throw SchemaError("", "unknown growth verdict '" + s + "'");
}

GrowthVerdict growth_classifier(const std::vector<std::pair<double, double>>& samples, double threshold,
                                double margin) {
  if (samples.size() < 6) throw InputError("growth classification needs at least 6 samples");
  for (const auto& [R, I] : samples) {
    if (!(R > 0.0)) throw InputError("growth samples need R > 0");
    if (!(I >= 0.0)) throw InputError("growth samples need I(R) >= 0");
  }
  GrowthVerdict v;
  v.threshold = threshold;
  v.margin = margin;
  v.samples = samples;
  std::sort(v.samples.begin(), v.samples.end());
  if (std::all_of(v.samples.begin(), v.samples.end(), [](const auto& s) { return s.second == 0.0; })) {
    v.verdict = Growth::little_o;
    v.fitted_exponent = 0.0;
    v.note = "identically zero";
    return v;
  }
  const std::size_t start = v.samples.size() / 2;
  std::vector<double> xs, ys;
  for (std::size_t i = start; i < v.samples.size(); ++i) {
    if (v.samples[i].second > 0.0) {
      xs.push_back(std::log(v.samples[i].first));
      ys.push_back(std::log(v.samples[i].second));
    }
  }
  if (xs.empty()) {
    v.verdict = Growth::little_o;
    v.note = "zero on the upper half of the window";
    return v;
  }
  if (xs.size() < 2) {
    v.verdict = Growth::inconclusive;
    v.note = "too few nonzero samples in the upper half of the window";
    return v;
  }
  v.fitted_exponent = fit_line(xs, ys).slope;
  if (v.fitted_exponent <= threshold - margin) {
    v.verdict = Growth::little_o;
  } else if (v.fitted_exponent >= threshold - kThresholdSlack) {
    v.verdict = Growth::not_little_o;
  } else {
    v.verdict = Growth::inconclusive;
  }
  return v;
}

std::vector<double> dyadic_radii(int lo, int hi) {
  if (hi < lo) throw InputError("invalid dyadic range");
  std::vector<double> r;
  for (int k = lo; k <= hi; ++k) r.push_back(std::ldexp(1.0, k));
  return r;
}

std::vector<double> ball_integrals(const ScalarField& g, const std::vector<double>& radii) {
  const int n = g.dim().value();
  for (std::size_t i = 0; i < radii.size(); ++i) {
    if (!(radii[i] > 0.0) || (i > 0 && !(radii[i] > radii[i - 1]))) {
      throw InputError("ball radii must be positive and increasing");
    }
  }
  const double area = SphereConstants::of(g.dim()).unit_sphere_area;
  quad::RadialIntegrand in;
  quad::Tolerance tol{1e-9, 1e-300, 400};
  const std::vector<double> origin(n, 0.0);
  if (g.is_radial()) {
    const RadialFn phi = g.caps().radial;
    in.in_r = [phi, n](double s) { return s == 0.0 ? 0.0 : std::pow(s, n - 1) * phi(s); };
  } else {
    const auto& rule = origin_rule(n);
    tol = quad::Tolerance{1e-6, 1e-300, 32};
    in.in_r = [&rule, &g, &origin, n](double s) {
      if (s == 0.0) return 0.0;
      return std::pow(s, n - 1) * rule.sphere_mean([&g](std::span<const double> y) { return g(y); }, origin, s);
    };
  }
  in.in_t = [f = in.in_r](double t) {
    const double r = std::exp(t);
    return r * f(r);
  };
  std::vector<double> out;
  double acc = 0.0, prev = 0.0;
  for (double R : radii) {
    acc += quad::integrate_radial_range(in, prev, R, tol, g.caps().breakpoints).value;
    prev = R;
    out.push_back(area * acc);
  }
  return out;
}

GrowthVerdict normality_condition_a(const ScalarField& w, const std::vector<double>& radii) {
  require_n4(w, "condition (a)");
  const ScalarField g = derived_field(w, [w](std::span<const double> x) { return std::abs(laplacian_power(w, x, 1)); });
  return criterion(g, radii, w.dim().value());
}

GrowthVerdict normality_condition_b(const ScalarField& w, const std::vector<double>& radii) {
  require_n4(w, "condition (b)");
  const ScalarField g = derived_field(w, [w](std::span<const double> x) { return std::abs(w(x)); });
  return criterion(g, radii, w.dim().value() + 2);
}

GrowthVerdict normality_scalar_criterion(const ScalarField& u, const std::vector<double>& radii) {
  require_n4(u, "the scalar curvature criterion");
  const ScalarField g = derived_field(u, [u](std::span<const double> x) { return scalar_negative_part_density(u, x); });
  return criterion(g, radii, u.dim().value());
}

// ---------------------------------------------------------------------------

ScalarField curvature_density(const MetricContext& ctx) {
  if (ctx.q_density) return *ctx.q_density;
  const Dimension dim = ctx.dim();
  const int n = dim.value(), m = dim.half();
  const double sign = m % 2 == 0 ? 1.0 : -1.0;
  if (ctx.is_radial()) {
    const RadialFn phi = ctx.profile;
    // Rotated copies of a point differ in |x| by an ulp, which the difference
    // recursion amplifies; snapping r keeps the field exactly radial.
    auto q = [phi, n, m, sign](double r) {
      int e;
      const double mant = std::frexp(r, &e);
      return sign * radial_laplacian_power(phi, std::ldexp(std::round(mant * 0x1p40) / 0x1p40, e), n, m);
    };
    FieldCaps caps;
    caps.is_radial = true;
    caps.radial = q;
    caps.weighted_radial = [q, n](double t) {
      const double v = q(std::exp(t));
      if (v == 0.0) return 0.0;
      return std::copysign(std::exp(n * t + std::log(std::abs(v))), v);
    };
    caps.breakpoints = ctx.u.caps().breakpoints;
    return ScalarField(dim, [q](std::span<const double> x) { return q(norm(x)); }, std::move(caps));
  }
  const ScalarField u = ctx.u;
  return ScalarField(dim, [u](std::span<const double> x) { return q_density(u, x); });
}

CohnVossen cohn_vossen_check(const MetricContext& ctx, const ScalarField& density, const std::vector<double>& radii) {
  const Dimension dim = ctx.dim();
  const auto sc = SphereConstants::of(dim);
  const auto& ev = shared_evaluator(dim);
  CohnVossen cv;
  cv.bound = 1.0 / sc.green_constant;

  const auto vol = total_volume(ctx);
  cv.preconditions["finite_volume"] = vol.cls == Finiteness::finite ? "holds"
                                      : vol.cls == Finiteness::infinite ? "fails"
                                                                        : "inconclusive";
  FieldCaps neg;
  neg.is_radial = density.is_radial();
  if (neg.is_radial) {
    const RadialFn q = density.caps().radial;
    neg.radial = [q](double r) { return std::max(0.0, -q(r)); };
    if (density.caps().weighted_radial) {
      const RadialFn wq = density.caps().weighted_radial;
      neg.weighted_radial = [wq](double t) { return std::max(0.0, -wq(t)); };
    }
  }
  neg.breakpoints = density.caps().breakpoints;
  neg.support_radius = density.caps().support_radius;
  const ScalarField qneg(dim, [density](std::span<const double> x) { return std::max(0.0, -density(x)); },
                         std::move(neg));
  try {
    ev.total_mass_alpha(qneg);
    cv.preconditions["integrable_negative_part"] = "holds";
  } catch (const NonIntegrable&) {
    cv.preconditions["integrable_negative_part"] = "fails";
  }
  if (dim.value() >= 4) {
    try {
      const auto a = normality_condition_a(ctx.u, radii);
      cv.preconditions["laplacian_growth"] = a.verdict == Growth::little_o       ? "holds"
                                             : a.verdict == Growth::not_little_o ? "fails"
                                                                                 : "inconclusive";
    } catch (const Error& e) {
      cv.preconditions["laplacian_growth"] = std::string("error: ") + e.what();
    }
  }
  try {
    cv.total = ev.total_mass_alpha(density).alpha_hat / sc.green_constant;
  } catch (const NonIntegrable&) {
    cv.preconditions["integrable_density"] = "fails";
  }
  const bool all = std::all_of(cv.preconditions.begin(), cv.preconditions.end(),
                               [](const auto& kv) { return kv.second == "holds"; });
  if (all) {
    const double tol = 1e-3 * std::max(1.0, cv.bound / (2.0 * std::numbers::pi));
    cv.satisfied = cv.total >= cv.bound - tol;
  }
  return cv;
}

// ---------------------------------------------------------------------------

json NormalityReport::to_json() const {
  json j;
  j["n"] = n;
  j["alpha0"] = optional_number(alpha0);
  if (tau) {
    j["tau"] = {{"exponent", tau->exponent},
                {"sup", tau->sup_exponent},
                {"inf", tau->inf_exponent},
                {"window", {tau->window[0], tau->window[1]}},
                {"residual", tau->residual},
                {"low_confidence", tau->low_confidence}};
  } else {
    j["tau"] = nullptr;
  }
  j["identity_residual"] = optional_number(identity_residual);
  j["verdict"] = verdict;
  j["criteria"] = json::object();
  for (const auto& [k, v] : criteria) j["criteria"][k] = v;
  if (cohn_vossen) {
    json cv;
    cv["total"] = cohn_vossen->total;
    cv["bound"] = cohn_vossen->bound;
    cv["satisfied"] = cohn_vossen->satisfied ? json(*cohn_vossen->satisfied) : json(nullptr);
    cv["preconditions"] = cohn_vossen->preconditions;
    j["cohn_vossen"] = cv;
  } else {
    j["cohn_vossen"] = nullptr;
  }
  j["diameter"] = {{"class", diameter.cls}, {"value", optional_number(diameter.value)}};
  j["volume"] = {{"class", volume.cls}, {"value", optional_number(volume.value)}};
  j["distance_exponent"] = optional_number(distance_exponent);
  j["errors"] = errors;
  j["provenance"] = provenance;
  return j;
}

NormalityReport NormalityReport::from_json(const json& j) {
  try {
    NormalityReport r;
    r.n = j.at("n").get<int>();
    r.alpha0 = read_number(j.at("alpha0"));
    if (!j.at("tau").is_null()) {
      const auto& t = j.at("tau");
      GrowthEstimate g;
      g.exponent = t.at("exponent").get<double>();
      g.sup_exponent = t.at("sup").get<double>();
      g.inf_exponent = t.at("inf").get<double>();
      g.window[0] = t.at("window").at(0).get<double>();
      g.window[1] = t.at("window").at(1).get<double>();
      g.residual = t.at("residual").get<double>();
      g.low_confidence = t.value("low_confidence", false);
      r.tau = g;
    }
    r.identity_residual = read_number(j.at("identity_residual"));
    r.verdict = j.at("verdict").get<std::string>();
    for (const auto& [k, v] : j.at("criteria").items()) r.criteria[k] = v;
    if (!j.at("cohn_vossen").is_null()) {
      const auto& c = j.at("cohn_vossen");
      CohnVossen cv;
      cv.total = c.at("total").get<double>();
      cv.bound = c.at("bound").get<double>();
      if (!c.at("satisfied").is_null()) cv.satisfied = c.at("satisfied").get<bool>();
      cv.preconditions = c.at("preconditions").get<std::map<std::string, std::string>>();
      r.cohn_vossen = cv;
    }
    r.diameter.cls = j.at("diameter").at("class").get<std::string>();
    r.diameter.value = read_number(j.at("diameter").at("value"));
    r.volume.cls = j.at("volume").at("class").get<std::string>();
    r.volume.value = read_number(j.at("volume").at("value"));
    r.distance_exponent = read_number(j.at("distance_exponent"));
    r.errors = j.at("errors").get<std::map<std::string, std::string>>();
    r.provenance = j.at("provenance");
    return r;
  } catch (const json::exception& e) {
    throw SchemaError("", std::string("malformed report: ") + e.what());
  }
}

NormalityReport analyze_normality(const MetricContext& ctx, const AnalysisConfig& config) {
  GalleryMetric g{ctx, {}, {}, {}, {}, {}};
  return analyze_normality(g, config);
}

NormalityReport analyze_normality(const GalleryMetric& metric, const AnalysisConfig& config) {
  const MetricContext& ctx = metric.ctx;
  const Dimension dim = ctx.dim();
  const int n = dim.value();
  NormalityReport rep;
  rep.n = n;
  const auto& ev = shared_evaluator(dim);
  auto record = [&](const std::string& field, const std::exception& e) { rep.errors[field] = e.what(); };

  const ScalarField density = curvature_density(ctx);
  try {
    rep.alpha0 = ev.total_mass_alpha(density).alpha_hat;
  } catch (const Error& e) {
    record("alpha0", e);
  }

  // Volume entropy. Overflow means super-polynomial growth: infinite entropy.
  std::string tau_state = "inconclusive";
  try {
    rep.tau = volume_growth(ctx, config.volume_radii);
    tau_state = rep.tau->sup_exponent - rep.tau->inf_exponent <= 0.5 ? "finite" : "inconclusive";
  } catch (const OverflowError& e) {
    record("tau", e);
    tau_state = "infinite";
  } catch (const Error& e) {
    record("tau", e);
  }
  if (rep.tau && rep.alpha0) rep.identity_residual = std::abs(rep.tau->exponent - std::max(0.0, 1.0 - *rep.alpha0));

  try {
    const auto d = diameter_estimate(ctx);
    rep.diameter.cls = to_string(d.cls);
    rep.diameter.value = d.value;
  } catch (const Error& e) {
    record("diameter", e);
  }
  try {
    const auto v = total_volume(ctx);
    rep.volume.cls = to_string(v.cls);
    if (v.cls == Finiteness::finite) rep.volume.value = v.value;
  } catch (const Error& e) {
    record("volume", e);
  }
  try {
    const std::vector<double> origin(n, 0.0);
    rep.distance_exponent = distance_growth_exponent(ctx, origin, config.distance_radii).exponent;
  } catch (const Error& e) {
    record("distance_exponent", e);
  }

  // Criteria stated for n >= 4.
  auto run = [&](const std::string& key, auto&& fn) {
    if (n < 4) {
      rep.criteria[key] = not_applicable("stated for n >= 4");
      return;
    }
    try {
      rep.criteria[key] = verdict_json(fn());
    } catch (const Error& e) {
      rep.criteria[key] = json{{"verdict", "inconclusive"}, {"note", e.what()}};
      record(key, e);
    }
  };
  run("condition_a", [&] { return normality_condition_a(ctx.u, config.criteria_radii); });
  run("condition_b", [&] { return normality_condition_b(ctx.u, config.criteria_radii); });
  run("scalar_criterion", [&] { return normality_scalar_criterion(ctx.u, config.criteria_radii); });

  // Completeness: asserted, or decided by the radial ray from the origin.
  std::optional<bool> complete = ctx.complete;
  std::string completeness_source = complete ? "hint" : "unknown";
  if (!complete && ctx.is_radial() && rep.diameter.cls != "inconclusive" && !rep.errors.count("diameter")) {
    complete = rep.diameter.cls == "infinite";
    completeness_source = "ray_divergence";
  }

  // Direct check of the definition when the density is tractable.
  json decomp = nullptr;
  std::optional<bool> decomp_constant;
  const std::optional<ScalarField> f = metric.source_density ? metric.source_density : ctx.q_density;
  if (config.decompose && f && (f->is_radial() || n == 2)) {
    try {
      const auto d = decompose(ev, ctx.u, *f, SampleSet::make(dim, config.seed));
      decomp = {{"nonconstant", d.nonconstant},
                {"residual_flag", d.residual_flag},
                {"fit_residual", d.fit_residual},
                {"polynomial", d.polynomial_part.to_string()},
                {"samples", d.sample_set}};
      if (!d.residual_flag) decomp_constant = !d.nonconstant;
    } catch (const Error& e) {
      record("decomposition", e);
    }
  }

  std::string entropy = "inconclusive";
  std::string note;
  if (decomp_constant && !*decomp_constant) {
    entropy = "not_normal";
    note = "potential remainder is a nonconstant polynomial";
  } else if (tau_state == "finite") {
    if (complete.value_or(false) || decomp_constant.value_or(false)) {
      entropy = "normal";
    } else {
      note = "finite entropy but completeness is not established";
    }
  } else if (tau_state == "infinite") {
    if (complete.value_or(false)) entropy = "not_normal";
    else note = "volume growth overflowed on an incomplete or unknown metric";
  }
  json ej{{"verdict", entropy},
          {"tau_state", tau_state},
          {"complete", complete ? json(*complete) : json(nullptr)},
          {"completeness_source", completeness_source},
          {"decomposition", decomp}};
  if (!note.empty()) ej["note"] = note;
  rep.criteria["entropy"] = ej;
  rep.verdict = entropy == "normal" ? "NORMAL" : entropy == "not_normal" ? "NOT_NORMAL" : "INCONCLUSIVE";

  try {
    rep.cohn_vossen = cohn_vossen_check(ctx, density, config.criteria_radii);
  } catch (const Error& e) {
    record("cohn_vossen", e);
  }

  json tol{{"identity", config.identity_tolerance},
           {"growth_margin", 0.25},
           {"ratio_bound", 0.97},
           {"potential_rel_tol", ev.config().rel_tol}};
  rep.provenance = {{"spec", ctx.label}, {"seed", config.seed}, {"tolerances", tol}};
  return rep;
}

}  // namespace qflat
