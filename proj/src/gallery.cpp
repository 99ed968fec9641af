#include "qflat/gallery.hpp"

#include <cmath>
#include <cstdio>
#include <map>
#include <mutex>
#include <numbers>
#include <random>

#include <boost/math/differentiation/autodiff.hpp>

#include "qflat/calculus.hpp"
#include "qflat/expression.hpp"

namespace qflat {

using nlohmann::json;

namespace {

constexpr double kPi = std::numbers::pi;

// log(1 + e^x) without overflow.
double softplus(double x) { return x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x)); }

ClosedFormFact number(std::string q, double v, double tol, FactBasis b, std::string oracle = {}) {
  ClosedFormFact f;
  f.quantity = std::move(q);
  f.value = v;
  f.tolerance = tol;
  f.basis = b;
  f.oracle = std::move(oracle);
  return f;
}

ClosedFormFact label(std::string q, bool finite, FactBasis b, std::string oracle = {}) {
  ClosedFormFact f;
  f.quantity = std::move(q);
  f.label = finite ? "finite" : "infinite";
  f.basis = b;
  f.oracle = std::move(oracle);
  return f;
}

double read_param(const json& params, const GalleryParam& p) {
  if (!params.contains(p.name)) return p.default_value;
  const auto& v = params.at(p.name);
  if (!v.is_number()) throw SchemaError("/params/" + p.name, "must be a number");
  const double x = v.get<double>();
  if (!std::isfinite(x) || x < p.lo || x > p.hi) {
    throw SchemaError("/params/" + p.name, "outside the documented range [" + std::to_string(p.lo) + ", " +
                                              std::to_string(p.hi) + "]");
  }
  return x;
}

const GalleryEntry& find_entry(const std::string& name) {
  for (const auto& e : gallery_entries()) {
    if (e.name == name) return e;
  }
  throw InputError("unknown gallery metric '" + name + "'");
}

json resolve_params(const GalleryEntry& entry, const json& params, int n) {
  if (!params.is_null() && !params.is_object()) throw SchemaError("/params", "must be an object");
  json out = json::object();
  if (params.is_object()) {
    for (const auto& [key, _] : params.items()) {
      bool known = false;
      for (const auto& p : entry.params) known = known || p.name == key;
      if (!known) throw SchemaError("/params/" + key, "unknown parameter for " + entry.name);
    }
  }
  for (auto p : entry.params) {
    if (entry.name == "planted" && p.name == "degree") p.default_value = n - 2;
    out[p.name] = read_param(params.is_object() ? params : json::object(), p);
  }
  return out;
}

// Radial field built from a RationalRadial with its Laplacian chain up to n/2,
// plus the closed-form density (-Delta)^{n/2} u.
struct RationalMetric {
  ScalarField u;
  ScalarField density;
};

RationalMetric rational_metric(Dimension dim, const RationalRadial& u) {
  const int n = dim.value(), m = n / 2;
  std::vector<RadialFn> chain;
  RationalRadial cur = u;
  for (int k = 1; k <= m; ++k) {
    cur = cur.laplacian(n);
    chain.push_back([cur](double r) { return cur.value(r); });
  }
  const double sign = m % 2 == 0 ? 1.0 : -1.0;
  const RationalRadial q = cur * sign;
  FieldCaps caps;
  caps.is_radial = true;
  caps.radial = [q](double r) { return q.value(r); };
  caps.weighted_radial = [q, n](double t) { return q.weighted_value(t, n); };
  ScalarField density(dim, [q](std::span<const double> x) { return q.value(norm(x)); }, std::move(caps));
  RationalRadial phi = u;
  return {ScalarField::radial(dim, [phi](double r) { return phi.value(r); }, chain), density};
}

ScalarField polynomial_field(const Polynomial& p) {
  const Dimension dim = p.dim();
  FieldCaps caps;
  for (int k = 1; k <= dim.value() / 2; ++k) {
    const Polynomial lp = apply_laplacian_poly(p, k);
    caps.laplacian_chain.push_back([lp](std::span<const double> x) { return lp(x); });
  }
  return ScalarField(dim, [p](std::span<const double> x) { return p(x); }, std::move(caps));
}

// Coefficients of prod_{k<m} (D - 2k)(D - 2k + n - 2) as a polynomial in D,
// the log-variable form of r^{2m} Delta^m for radial functions.
std::vector<double> log_operator(int n, int m) {
  std::vector<double> p{1.0};
  auto mul = [&](double root) {  // times (D + root)
    std::vector<double> q(p.size() + 1, 0.0);
    for (std::size_t i = 0; i < p.size(); ++i) {
      q[i] += root * p[i];
      q[i + 1] += p[i];
    }
    p = std::move(q);
  };
  for (int k = 0; k < m; ++k) {
    mul(-2.0 * k);
    mul(-2.0 * k + n - 2.0);
  }
  return p;
}

// The huber profile -log r + c log log r beyond the cutoff.
struct Huber {
  int n;
  double c;
  static constexpr double kInner = 10.0, kOuter = 20.0;

  double eta(double r) const { return smooth_cutoff(r, kInner, kOuter); }
  double phi(double r) const {
    if (r <= kInner) return 0.0;
    const double l = std::log(r);
    return (1.0 - eta(r)) * (-l + c * std::log(l));
  }
  double phi_log(double t) const {
    if (t <= std::log(kInner)) return 0.0;
    const double w = -t + c * std::log(t);
    return t >= std::log(kOuter) ? w : (1.0 - eta(std::exp(t))) * w;
  }
  // P(D) applied to phi(e^t) on the cutoff band, with exact t-derivatives.
  // Finite differences of order n lose everything to the steep cutoff here.
  double band_operator(double t) const {
    namespace ad = boost::math::differentiation;
    constexpr int kOrder = 12;
    const auto p = log_operator(n, n / 2);
    if (static_cast<int>(p.size()) > kOrder + 1) {
      const int m = n / 2;
      const double sign = m % 2 == 0 ? 1.0 : -1.0;
      return sign * std::exp(n * t) * radial_laplacian_power([this](double s) { return phi(s); }, std::exp(t), n, m);
    }
    const auto x = ad::make_fvar<double, kOrder>(t);
    const auto s = (exp(x) - kInner) / (kOuter - kInner);
    const auto s0 = exp(-1.0 / s);
    const auto s1 = exp(-1.0 / (1.0 - s));
    const auto g = s0 / (s0 + s1) * (-x + c * log(x));
    double acc = 0.0;
    for (std::size_t k = 0; k < p.size(); ++k) acc += p[k] * g.derivative(k);
    return acc;
  }

  // e^{n t} (-Delta)^{n/2} u at r = e^t.
  double weighted_density(double t) const {
    const int m = n / 2;
    const double sign = m % 2 == 0 ? 1.0 : -1.0;
    if (t <= std::log(kInner)) return 0.0;
    if (t < std::log(kOuter)) return sign * band_operator(t);
    // D^k (-t + c log t): D = -1 + c/t, D^k = c (-1)^{k-1} (k-1)! / t^k for k >= 2.
    const auto p = log_operator(n, m);
    double acc = p[0] * (-t + c * std::log(t)) + p[1] * (-1.0 + c / t);
    double fact = 1.0;
    for (std::size_t k = 2; k < p.size(); ++k) {
      fact *= static_cast<double>(k - 1);
      acc += p[k] * c * ((k % 2 == 0) ? -1.0 : 1.0) * fact / std::pow(t, static_cast<double>(k));
    }
    return sign * acc;
  }
};

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%g", v);
  return buf;
}

std::uint64_t to_seed(double v) { return static_cast<std::uint64_t>(std::llround(v)); }

GalleryMetric make_metric(ScalarField u) { return GalleryMetric{MetricContext(std::move(u)), {}, {}, {}, {}, {}}; }

RadialFn lazy_profile(RadialFn exact) {
  struct State {
    std::once_flag once;
    RadialFn exact;
    std::optional<RadialProfile> profile;
  };
  auto st = std::make_shared<State>();
  st->exact = std::move(exact);
  return [st](double r) {
    std::call_once(st->once, [&] {
      ProfileGrid grid;
      grid.nodes_per_decade = 128;
      st->profile = RadialProfile::sample(st->exact, 1e-8, grid);
    });
    return (*st->profile)(r);
  };
}

// u = L(f) for the Gaussian density of the given mass, with an asymptotic
// continuation beyond r0 = 1e4: -alpha log r + C_f + (A - C_f)(r0 / r)^2.
struct GaussianPotential {
  ScalarField u;
  RadialFn log_profile;
  ScalarField f;
};

GaussianPotential gaussian_potential(Dimension dim, double mass) {
  const auto& ev = shared_evaluator(dim);
  ScalarField f = gaussian_density(dim, mass);
  const ScalarField pot = ev.potential_field(f);
  const RadialFn spline = pot.caps().radial;
  const double r0 = 1e4, t0 = std::log(r0);
  const double cf = ev.log_moment(f);
  const double a = spline(r0) + mass * t0;
  auto asym = [mass, cf, a, t0](double t) { return -mass * t + cf + (a - cf) * std::exp(-2.0 * (t - t0)); };
  RadialFn profile = [spline, asym, r0](double r) { return r <= r0 ? spline(r) : asym(std::log(r)); };
  RadialFn log_profile = [spline, asym, t0](double t) { return t <= t0 ? spline(std::exp(t)) : asym(t); };
  std::vector<RadialFn> chain;
  for (const auto& c : pot.caps().laplacian_chain) {
    const int n = dim.value();
    RadialFn exact = [c, n](double r) {
      std::vector<double> x(n, 0.0);
      x[0] = r;
      return c(x);
    };
    // Chain entries that are themselves potentials cost a quadrature per
    // call; they are splined on first use.
    chain.push_back(lazy_profile(std::move(exact)));
  }
  return {ScalarField::radial(dim, profile, chain), log_profile, f};
}

void potential_facts(GalleryMetric& g, double alpha, int n) {
  const double tau = std::max(0.0, 1.0 - alpha);
  g.facts.push_back(number("alpha0", alpha, 1e-3, FactBasis::by_inspection, "G int f equals the mass parameter"));
  g.facts.push_back(number("tau", tau, 0.05, FactBasis::closed_form, "V(B_R) ~ c R^{n(1-alpha)} for L(f)"));
  // At alpha = 1 the distance grows like log r, which a power fit over
  // [10, 1e4] reads as a slope near 1 / log r.
  if (alpha == 1.0) {
    g.facts.push_back(number("distance_exponent", 0.0, 0.25, FactBasis::closed_form, "d(0, R) ~ log R"));
  } else {
    g.facts.push_back(number("distance_exponent", tau, 0.1, FactBasis::closed_form, "e^u ~ c r^{-alpha}"));
  }
  g.facts.push_back(label("volume_class", alpha > 1.0, FactBasis::closed_form, "int r^{n-1-n alpha} dr"));
  g.facts.push_back(label("diameter_class", alpha > 1.0, FactBasis::closed_form, "int r^{-alpha} dr"));
  (void)n;
}

}  // namespace

const char* to_string(FactBasis b) {
  switch (b) {
    case FactBasis::by_inspection: return "by_inspection";
    case FactBasis::closed_form: return "closed_form";
    case FactBasis::threshold_result: return "threshold_result";
  }
  return "by_inspection";
}

const ClosedFormFact* GalleryMetric::fact(const std::string& quantity) const {
  for (const auto& f : facts) {
    if (f.quantity == quantity) return &f;
  }
  return nullptr;
}

const std::vector<GalleryEntry>& gallery_entries() {
  static const std::vector<GalleryEntry> entries = {
      {"flat", "u = 0", {}},
      {"sphere", "u = log(2 / (1 + r^2)), the round unit sphere", {}},
      {"cone", "u = -(a/2) log(1 + r^2); complete iff a <= 1",
       {{"a", 0.5, 1e-6, 10.0, "a >= 1 is flagged noncomplete_candidate"}}},
      {"huber", "u = (1 - eta) (-log r + c log log r), eta cutting off on [10, 20]",
       {{"c", 0.0, -10.0, 10.0, ""}}},
      {"gaussian_source", "u = L(f), f a centred Gaussian with G int f = mass",
       {{"mass", 1.0, 1e-3, 10.0, ""}}},
      {"planted", "u = L(f) + P, f Gaussian with seeded mass, P an upper-bounded polynomial",
       {{"seed", 1.0, 0.0, 1e9, ""}, {"degree", 0.0, 0.0, 64.0, "default n - 2, capped at n - 2"}}},
  };
  return entries;
}

ScalarField gaussian_density(Dimension dim, double mass) {
  const int n = dim.value();
  const auto sc = SphereConstants::of(dim);
  const double coef = mass / (sc.green_constant * std::pow(kPi, n / 2.0));
  FieldCaps caps;
  caps.is_radial = true;
  caps.radial = [coef](double r) { return coef * std::exp(-r * r); };
  caps.weighted_radial = [coef, n](double t) { return coef * std::exp(n * t - std::exp(2.0 * t)); };
  return ScalarField(dim, [coef](std::span<const double> x) {
    const double r = norm(x);
    return coef * std::exp(-r * r);
  }, std::move(caps));
}

const PotentialEvaluator& shared_evaluator(Dimension dim) {
  static std::mutex mu;
  static std::map<int, std::unique_ptr<PotentialEvaluator>> cache;
  std::lock_guard lock(mu);
  auto& slot = cache[dim.value()];
  if (!slot) slot = std::make_unique<PotentialEvaluator>(dim);
  return *slot;
}

Polynomial planted_polynomial(Dimension dim, std::uint64_t seed, int degree) {
  const int n = dim.value();
  degree = std::min(degree, n - 2);
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  Polynomial p(dim);
  double c = -1.0 + 2.0 * unit(rng);
  if (degree >= 2) {
    for (int i = 0; i < n; ++i) {
      const bool active = unit(rng) < 0.5;
      const double a = 0.25 + 0.75 * unit(rng);
      const double b = -0.5 + unit(rng);
      if (!active) continue;
      MultiIndex sq(n, 0), lin(n, 0);
      sq[i] = 2;
      lin[i] = 1;
      p.add_term(sq, -a);
      p.add_term(lin, 2.0 * a * b);
      c -= a * b * b;
    }
  }
  p.add_term(MultiIndex(n, 0), c);
  return p;
}

GalleryMetric gallery(const std::string& name, const json& params, int n) {
  const Dimension dim(n);
  const GalleryEntry& entry = find_entry(name);
  const json p = resolve_params(entry, params, n);
  const auto sc = SphereConstants::of(dim);

  if (name == "flat") {
    GalleryMetric g = make_metric(ScalarField::zero(dim));
    g.ctx.log_profile = [](double) { return 0.0; };
    g.ctx.q_density = ScalarField::zero(dim);
    g.facts = {number("alpha0", 0.0, 1e-9, FactBasis::by_inspection),
               number("tau", 1.0, 0.01, FactBasis::by_inspection, "V(B_R) = |B_R|"),
               number("distance_exponent", 1.0, 0.01, FactBasis::by_inspection),
               label("diameter_class", false, FactBasis::by_inspection),
               label("volume_class", false, FactBasis::by_inspection)};
    if (n >= 4) g.facts.push_back(number("scalar_curvature", 0.0, 1e-6, FactBasis::by_inspection));
    g.ctx.label = "flat";
    g.params = p;
    return g;
  }
  if (name == "sphere") {
    const auto rm = rational_metric(dim, RationalRadial::constant(std::log(2.0)) + RationalRadial::log_term(-1.0));
    GalleryMetric g = make_metric(rm.u);
    g.ctx.log_profile = [](double t) { return std::log(2.0) - softplus(2.0 * t); };
    g.ctx.q_density = rm.density;
    g.ctx.complete = true;
    g.facts = {number("alpha0", 2.0, 1e-3, FactBasis::closed_form, "G (n-1)! |S^n| = 2"),
               number("tau", 0.0, 0.05, FactBasis::closed_form, "V(B_R) -> |S^n|"),
               number("distance_exponent", 0.0, 0.1, FactBasis::closed_form, "d(0, R) = 2 atan R"),
               number("diameter", kPi, 1e-6, FactBasis::closed_form, "int_0^inf 2 / (1 + t^2) dt"),
               number("volume", sc.sphere_volume, 1e-3, FactBasis::closed_form, "|S^n|"),
               label("diameter_class", true, FactBasis::closed_form),
               label("volume_class", true, FactBasis::closed_form),
               number("q_curvature", std::tgamma(static_cast<double>(n)), 1e-6, FactBasis::closed_form,
                      "(n-1)! on the unit sphere")};
    if (n >= 4) {
      g.facts.push_back(number("scalar_curvature", n * (n - 1.0), 1e-4, FactBasis::closed_form, "n (n-1)"));
    }
    g.ctx.label = "sphere";
    g.params = p;
    return g;
  }
  if (name == "cone") {
    const double a = p["a"];
    const auto rm = rational_metric(dim, RationalRadial::log_term(-0.5 * a));
    GalleryMetric g = make_metric(rm.u);
    g.ctx.log_profile = [a](double t) { return -0.5 * a * softplus(2.0 * t); };
    g.ctx.q_density = rm.density;
    if (a >= 1.0) g.flags.push_back("noncomplete_candidate");
    g.ctx.complete = a <= 1.0;
    const double tau = std::max(0.0, 1.0 - a);
    g.facts = {number("alpha0", a, 1e-3, FactBasis::closed_form, "alpha is linear in u; a = 2 is the sphere"),
               number("tau", tau, 0.05, FactBasis::closed_form, "V(B_R) ~ c R^{n(1-a)}"),
               number("distance_exponent", tau, 0.1, FactBasis::closed_form, "int_0^R (1 + t^2)^{-a/2} dt"),
               label("diameter_class", a > 1.0, FactBasis::closed_form, "int (1 + t^2)^{-a/2} dt"),
               label("volume_class", a > 1.0, FactBasis::closed_form, "int r^{n-1} (1 + r^2)^{-n a/2} dr")};
    if (a > 1.0) {
      const double ray = std::sqrt(kPi) * std::tgamma(0.5 * (a - 1.0)) / (2.0 * std::tgamma(0.5 * a));
      g.facts.push_back(number("ray_length", ray, 1e-6, FactBasis::closed_form, "Beta integral of (1 + t^2)^{-a/2}"));
      g.facts.push_back(number("diameter", ray, 1e-6, FactBasis::closed_form, "origin to infinity"));
      const double vol = sc.unit_sphere_area * 0.5 * std::beta(0.5 * n, 0.5 * n * (a - 1.0));
      g.facts.push_back(number("volume", vol, 1e-3, FactBasis::closed_form, "Beta integral of r^{n-1} (1 + r^2)^{-n a/2}"));
    }
    g.ctx.label = "cone(a=" + fmt(a) + ")";
    g.params = p;
    return g;
  }
  if (name == "huber") {
    const double c = p["c"];
    const Huber h{n, c};
    FieldCaps caps;
    caps.is_radial = true;
    caps.radial = [h](double r) { return h.phi(r); };
    caps.breakpoints = {Huber::kInner, Huber::kOuter};
    ScalarField u(dim, [h](std::span<const double> x) { return h.phi(norm(x)); }, std::move(caps));
    GalleryMetric g = make_metric(u);
    g.ctx.log_profile = [h](double t) { return h.phi_log(t); };
    FieldCaps qc;
    qc.is_radial = true;
    qc.radial = [h, n](double r) {
      if (r <= Huber::kInner) return 0.0;
      const double t = std::log(r);
      return std::exp(-n * t) * h.weighted_density(t);
    };
    qc.weighted_radial = [h](double t) { return h.weighted_density(t); };
    qc.breakpoints = {Huber::kInner, Huber::kOuter};
    RadialFn qr = qc.radial;
    g.ctx.q_density = ScalarField(dim, [qr](std::span<const double> x) { return qr(norm(x)); }, std::move(qc));
    const double vol_threshold = -1.0 / n;
    g.facts = {number("alpha0", 1.0, 0.02, FactBasis::threshold_result, "total curvature (n-1)! |S^n| / 2"),
               number("tau", 0.0, 0.05, FactBasis::closed_form, "V(B_R) grows at most like a power of log R"),
               label("diameter_class", c < -1.0, FactBasis::threshold_result, "int t^{-1} (log t)^c dt"),
               label("volume_class", c < vol_threshold, FactBasis::threshold_result,
                     "int t^{-1} (log t)^{n c} dt")};
    g.ctx.complete = c >= -1.0;
    g.ctx.label = "huber(c=" + fmt(c) + ")";
    g.params = p;
    return g;
  }
  if (name == "gaussian_source") {
    const double mass = p["mass"];
    auto gp = gaussian_potential(dim, mass);
    GalleryMetric g = make_metric(gp.u);
    g.ctx.log_profile = gp.log_profile;
    g.ctx.q_density = gp.f;
    g.source_density = gp.f;
    potential_facts(g, mass, n);
    g.ctx.label = "gaussian_source(mass=" + fmt(mass) + ")";
    g.params = p;
    return g;
  }
  // planted
  const std::uint64_t seed = to_seed(p["seed"]);
  const int degree = static_cast<int>(std::lround(p["degree"].get<double>()));
  std::mt19937_64 rng(seed ^ 0x9e3779b97f4a7c15ULL);
  const double mass = 0.5 + std::uniform_real_distribution<double>(0.0, 1.0)(rng);
  const Polynomial poly = planted_polynomial(dim, seed, degree);
  auto gp = gaussian_potential(dim, mass);
  GalleryMetric g = make_metric(poly.degree() <= 0 ? gp.u + ScalarField::constant(dim, poly(std::vector<double>(n, 0.0)))
                                                   : gp.u + polynomial_field(poly));
  if (poly.degree() <= 0) {
    const double c0 = poly(std::vector<double>(n, 0.0));
    const RadialFn lp = gp.log_profile;
    g.ctx.log_profile = [lp, c0](double t) { return lp(t) + c0; };
    potential_facts(g, mass, n);
  } else {
    g.facts.push_back(number("alpha0", mass, 1e-3, FactBasis::by_inspection, "G int f equals the planted mass"));
  }
  g.ctx.q_density = gp.f;
  g.source_density = gp.f;
  g.planted = poly;
  g.ctx.label = "planted(seed=" + std::to_string(seed) + ")";
  g.params = p;
  return g;
}

GalleryMetric metric_from_spec(const MetricSpec& spec) {
  if (spec.kind == "builtin") {
    GalleryMetric g = gallery(spec.name, spec.params, spec.n);
    if (spec.complete) g.ctx.complete = spec.complete;
    return g;
  }
  GalleryMetric g = make_metric(field_from_spec(spec));
  g.ctx.complete = spec.complete;
  g.ctx.label = spec.kind;
  return g;
}

}  // namespace qflat
