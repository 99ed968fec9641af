#include "qflat/suite.hpp"

#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <limits>
#include <mutex>
#include <numbers>
#include <random>
#include <sstream>
#include <thread>

#include "qflat/calculus.hpp"
#include "qflat/expression.hpp"
#include "qflat/polynomial.hpp"

namespace qflat {

using nlohmann::json;

namespace {

constexpr double kPi = std::numbers::pi;

json builtin(const std::string& name, json params, int n) {
  return json{{"n", n}, {"kind", "builtin"}, {"name", name}, {"params", std::move(params)}};
}

void number_check(VerificationCase& c, const std::string& quantity, double expected, double actual, double tol,
                  const std::string& anchor, const std::string& note = {}) {
  Check k;
  k.quantity = quantity;
  k.expected = expected;
  k.tolerance = tol;
  k.anchor = anchor;
  k.actual = std::isfinite(actual) ? json(actual) : json(nullptr);
  k.status = std::isfinite(actual) && std::abs(actual - expected) <= tol ? "passed" : "failed";
  k.note = note;
  c.checks.push_back(std::move(k));
}

// actual <= bound (or >= when `above`).
void bound_check(VerificationCase& c, const std::string& quantity, double bound, double actual, bool above,
                 const std::string& anchor, const std::string& note = {}) {
  Check k;
  k.quantity = quantity;
  k.expected = json{{above ? "at_least" : "at_most", bound}};
  k.anchor = anchor;
  k.actual = std::isfinite(actual) ? json(actual) : json(nullptr);
  const bool ok = std::isfinite(actual) && (above ? actual >= bound : actual <= bound);
  k.status = ok ? "passed" : "failed";
  k.note = note;
  c.checks.push_back(std::move(k));
}

// Labels: an "inconclusive" actual is reported as such, not as a mismatch.
void label_check(VerificationCase& c, const std::string& quantity, const std::string& expected,
                 const std::string& actual, const std::string& anchor, const std::string& note = {}) {
  Check k;
  k.quantity = quantity;
  k.expected = expected;
  k.anchor = anchor;
  k.actual = actual;
  k.status = actual == expected ? "passed" : (actual == "inconclusive" ? "inconclusive" : "failed");
  k.note = note;
  c.checks.push_back(std::move(k));
}

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%g", v);
  return buf;
}

std::string num(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

struct CaseDef {
  std::string id;
  int criterion;
  json spec;
  std::function<void(VerificationCase&)> run;
};

// Gallery instances whose facts are re-verified and which feed the
// finite-volume and scalar-criterion sweeps.
std::vector<json> gallery_instances() {
  std::vector<json> out;
  for (int n : {2, 4}) {
    out.push_back(builtin("flat", json::object(), n));
    out.push_back(builtin("sphere", json::object(), n));
    for (double a : n == 2 ? std::vector<double>{0.25, 0.5, 0.75, 2.0} : std::vector<double>{0.5, 2.0}) {
      out.push_back(builtin("cone", {{"a", a}}, n));
    }
    for (double c : n == 2 ? std::vector<double>{-2.0, -0.75, 0.0} : std::vector<double>{0.0}) {
      out.push_back(builtin("huber", {{"c", c}}, n));
    }
    for (double m : n == 2 ? std::vector<double>{0.5, 1.0, 2.0} : std::vector<double>{1.0}) {
      out.push_back(builtin("gaussian_source", {{"mass", m}}, n));
    }
    out.push_back(builtin("planted", {{"seed", n == 2 ? 1 : 3}}, n));
  }
  return out;
}

std::string instance_id(const json& spec) {
  std::string id = spec["name"].get<std::string>() + "_n" + std::to_string(spec["n"].get<int>());
  for (const auto& [k, v] : spec["params"].items()) id += "_" + k + fmt(v.get<double>());
  return id;
}

GalleryMetric metric_of(const json& spec) { return metric_from_spec(parse_metric_spec(spec)); }

std::vector<std::vector<double>> sample_points(int n, std::uint64_t seed, int count, double scale) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-scale, scale);
  std::vector<std::vector<double>> pts;
  for (int i = 0; i < count; ++i) {
    std::vector<double> x(n);
    for (auto& c : x) c = u(rng);
    pts.push_back(std::move(x));
  }
  return pts;
}

// Re-derives one gallery fact from the library's own estimators.
void verify_fact(VerificationCase& c, const GalleryMetric& g, const ClosedFormFact& f) {
  const auto& ctx = g.ctx;
  const int n = ctx.dim().value();
  const std::string note = std::string(to_string(f.basis)) + (f.oracle.empty() ? "" : ": " + f.oracle);
  const std::string& q = f.quantity;
  if (q == "alpha0") {
    const double a = shared_evaluator(ctx.dim()).total_mass_alpha(curvature_density(ctx)).alpha_hat;
    number_check(c, q, *f.value, a, f.tolerance, "gallery_fact", note);
  } else if (q == "tau") {
    number_check(c, q, *f.value, volume_growth(ctx, geometric_radii(1e2, 1e8)).exponent, f.tolerance, "gallery_fact",
                 note);
  } else if (q == "distance_exponent") {
    const std::vector<double> origin(n, 0.0);
    number_check(c, q, *f.value, distance_growth_exponent(ctx, origin, geometric_radii(1e1, 1e4)).exponent,
                 f.tolerance, "gallery_fact", note);
  } else if (q == "diameter_class") {
    label_check(c, q, f.label, to_string(diameter_estimate(ctx).cls), "gallery_fact", note);
  } else if (q == "volume_class") {
    label_check(c, q, f.label, to_string(total_volume(ctx).cls), "gallery_fact", note);
  } else if (q == "diameter") {
    const auto d = diameter_estimate(ctx);
    number_check(c, q, *f.value, d.value.value_or(std::numeric_limits<double>::quiet_NaN()), f.tolerance,
                 "gallery_fact", note);
  } else if (q == "volume") {
    const auto v = total_volume(ctx);
    number_check(c, q, *f.value, v.cls == Finiteness::finite ? v.value : std::numeric_limits<double>::quiet_NaN(),
                 f.tolerance, "gallery_fact", note);
  } else if (q == "ray_length") {
    std::vector<double> e1(n, 0.0);
    e1[0] = 1.0;
    const auto r = ray_length(ctx, e1, 0.0, std::numeric_limits<double>::infinity());
    number_check(c, q, *f.value, r.cls == Finiteness::finite ? r.value : std::numeric_limits<double>::quiet_NaN(),
                 f.tolerance, "gallery_fact", note);
  } else if (q == "q_curvature" || q == "scalar_curvature") {
    double worst = 0.0;
    for (const auto& x : sample_points(n, 11, 20, 2.0)) {
      const double v = q == "q_curvature" ? q_curvature(ctx.u, x) : scalar_curvature(ctx.u, x);
      worst = std::max(worst, std::abs(v - *f.value));
    }
    number_check(c, q + " (max deviation at 20 points)", 0.0, worst, f.tolerance > 0 ? f.tolerance : 1e-4,
                 "gallery_fact", note);
  } else {
    Check k;
    k.quantity = q;
    k.anchor = "gallery_fact";
    k.status = "inconclusive";
    k.note = "no verifier for this quantity";
    c.checks.push_back(std::move(k));
  }
}

std::vector<CaseDef> build_cases() {
  std::vector<CaseDef> cases;

  // Entropy identity and distance exponents on the closed-form family.
  const std::vector<std::pair<std::string, json>> identity_metrics = {
      {"cone_a0.25", builtin("cone", {{"a", 0.25}}, 2)},
      {"cone_a0.5", builtin("cone", {{"a", 0.5}}, 2)},
      {"cone_a0.75", builtin("cone", {{"a", 0.75}}, 2)},
      {"sphere", builtin("sphere", json::object(), 2)}};
  for (const auto& [name, spec] : identity_metrics) {
    cases.push_back({"entropy_identity/" + name, 1, spec, [spec](VerificationCase& c) {
                       const auto g = metric_of(spec);
                       const double expected_alpha = *g.fact("alpha0")->value;
                       const double alpha =
                           shared_evaluator(g.ctx.dim()).total_mass_alpha(curvature_density(g.ctx)).alpha_hat;
                       number_check(c, "alpha0", expected_alpha, alpha, 1e-3, "entropy_identity");
                       const double tau = volume_growth(g.ctx, geometric_radii(1e2, 1e8)).exponent;
                       number_check(c, "tau - (1 - alpha0)+", 0.0, tau - std::max(0.0, 1.0 - alpha), 0.05,
                                    "entropy_identity");
                     }});
  }
  for (const auto& [name, spec] : identity_metrics) {
    cases.push_back({"distance_exponent/" + name, 2, spec, [spec](VerificationCase& c) {
                       const auto g = metric_of(spec);
                       const double alpha = *g.fact("alpha0")->value;
                       const std::vector<double> origin(2, 0.0);
                       const auto e = distance_growth_exponent(g.ctx, origin, geometric_radii(1e1, 1e4));
                       number_check(c, "distance exponent", std::max(0.0, 1.0 - alpha), e.exponent, 0.1,
                                    "distance_exponent");
                     }});
  }

  // Bounded diameter beyond alpha0 = 1.
  cases.push_back({"bounded_diameter/sphere", 3, builtin("sphere", json::object(), 2), [](VerificationCase& c) {
                     const auto g = gallery("sphere", {}, 2);
                     const auto d = diameter_estimate(g.ctx);
                     label_check(c, "diameter_class", "finite", to_string(d.cls), "bounded_diameter");
                     number_check(c, "diameter", kPi, d.value.value_or(std::nan("")), 1e-6, "bounded_diameter");
                   }});
  cases.push_back({"bounded_diameter/cone_a2", 3, builtin("cone", {{"a", 2.0}}, 2), [](VerificationCase& c) {
                     const auto g = gallery("cone", {{"a", 2.0}}, 2);
                     const std::vector<double> e1{1.0, 0.0};
                     const auto r = ray_length(g.ctx, e1, 0.0, std::numeric_limits<double>::infinity());
                     label_check(c, "ray class", "finite", to_string(r.cls), "bounded_diameter");
                     number_check(c, "origin-to-infinity ray length", kPi / 2, r.value, 1e-6, "bounded_diameter");
                   }});

  // Exact potential of the disk density 2 * 1_{B_1}.
  cases.push_back({"exact_potential/disk", 4,
                   json{{"n", 2}, {"kind", "radial-table"}, {"note", "f = 2 on |x| <= 1"}}, [](VerificationCase& c) {
                     const auto f =
                         ScalarField::radial(Dimension(2), [](double r) { return r <= 1.0 ? 2.0 : 0.0; }, {}, 1.0);
                     for (double r : {std::exp(1.0), 10.0, 100.0}) {
                       const std::vector<double> x{r, 0.0};
                       number_check(c, "L(f) at |x| = " + fmt(r), -0.5 - std::log(r), log_potential(f, x), 1e-5,
                                    "exact_potential");
                     }
                   }});

  // Volume growth of potentials.
  for (double mass : {0.5, 1.0, 2.0}) {
    const json spec = builtin("gaussian_source", {{"mass", mass}}, 2);
    cases.push_back({"potential_volume_growth/mass" + fmt(mass), 5, spec, [spec, mass](VerificationCase& c) {
                       const auto g = metric_of(spec);
                       const auto t = volume_growth(g.ctx, geometric_radii(1e2, 1e8));
                       number_check(c, "volume growth exponent", std::max(0.0, 1.0 - mass), t.exponent, 0.05,
                                    "potential_volume_growth");
                     }});
  }

  // Decomposition of planted potentials.
  for (int n : {2, 4}) {
    for (int seed = 1; seed <= 25; ++seed) {
      const json spec = builtin("planted", {{"seed", seed}}, n);
      cases.push_back({"decomposition/n" + std::to_string(n) + "_seed" + std::to_string(seed), 6, spec,
                       [spec, n](VerificationCase& c) {
                         const auto g = metric_of(spec);
                         const Polynomial& planted = *g.planted;
                         const auto d = decompose(g.ctx.u, *g.source_density, SampleSet::make(g.ctx.dim(), 1));
                         double worst = 0.0;
                         for (const auto& a : indices_up_to(n, n - 2)) {
                           const auto pa = planted.coeffs().find(a);
                           const auto da = d.polynomial_part.coeffs().find(a);
                           const double want = pa == planted.coeffs().end() ? 0.0 : pa->second;
                           const double got = da == d.polynomial_part.coeffs().end() ? 0.0 : da->second;
                           worst = std::max(worst, std::abs(want - got));
                         }
                         number_check(c, "max coefficient error", 0.0, worst, 1e-3, "decomposition",
                                      "planted " + planted.to_string());
                         const bool nonconstant = planted.degree() >= 1;
                         label_check(c, "nonconstant flag", nonconstant ? "true" : "false",
                                     d.nonconstant ? "true" : "false", "decomposition");
                         if (n >= 4) {
                           const auto a = normality_condition_a(g.ctx.u, dyadic_radii());
                           label_check(c, "condition (a)", nonconstant ? "not_little_o" : "little_o",
                                       to_string(a.verdict), "decomposition",
                                       "fitted exponent " + num(a.fitted_exponent));
                         }
                       }});
    }
  }

  // Scalar criterion against the entropy verdict on the n = 4 gallery.
  for (const auto& spec : gallery_instances()) {
    if (spec["n"] != 4) continue;
    cases.push_back({"scalar_criterion/" + instance_id(spec), 7, spec, [spec](VerificationCase& c) {
                       const auto g = metric_of(spec);
                       AnalysisConfig cfg;
                       const auto rep = analyze_normality(g, cfg);
                       const std::string scalar = rep.criteria.at("scalar_criterion")["verdict"];
                       const std::string entropy = rep.criteria.at("entropy")["verdict"];
                       Check k;
                       k.quantity = "scalar criterion vs entropy verdict";
                       k.anchor = "scalar_criterion";
                       k.expected = entropy == "normal" ? "little_o" : entropy == "not_normal" ? "not_little_o" : "";
                       k.actual = scalar;
                       if (entropy == "inconclusive" || scalar == "inconclusive") {
                         k.status = "inconclusive";
                       } else {
                         k.status = k.expected == k.actual ? "passed" : "failed";
                       }
                       k.note = "entropy verdict " + entropy;
                       c.checks.push_back(std::move(k));
                     }});
  }
  cases.push_back({"scalar_criterion/sphere_n4_curvature", 7, builtin("sphere", json::object(), 4),
                   [](VerificationCase& c) {
                     const auto g = gallery("sphere", {}, 4);
                     double worst = 0.0;
                     for (const auto& x : sample_points(4, 5, 20, 2.0)) {
                       worst = std::max(worst, std::abs(scalar_curvature(g.ctx.u, x) - 12.0));
                     }
                     number_check(c, "max |R_g - 12| at 20 points", 0.0, worst, 1e-4, "scalar_criterion");
                   }});

  // Total curvature lower bound on finite-volume surfaces.
  for (const auto& spec : gallery_instances()) {
    if (spec["n"] != 2) continue;
    cases.push_back({"total_curvature/" + instance_id(spec), 8, spec, [spec](VerificationCase& c) {
                       const auto g = metric_of(spec);
                       const auto cv = cohn_vossen_check(g.ctx, curvature_density(g.ctx));
                       Check pre;
                       pre.quantity = "preconditions";
                       pre.anchor = "total_curvature_bound";
                       pre.actual = cv.preconditions;
                       pre.status = "passed";
                       pre.note = cv.satisfied ? "bound applies" : "bound does not apply";
                       c.checks.push_back(pre);
                       if (cv.preconditions.at("finite_volume") == "holds" &&
                           cv.preconditions.at("integrable_negative_part") == "holds") {
                         bound_check(c, "total curvature", 2 * kPi - 1e-3, cv.total, true, "total_curvature_bound");
                       }
                       if (spec["name"] == "sphere") {
                         number_check(c, "sphere total curvature", 4 * kPi, cv.total, 1e-3, "total_curvature_bound");
                       }
                     }});
  }

  // Threshold classification of the huber family through the sweep.
  cases.push_back({"huber_thresholds/sweep_c", 9, builtin("huber", {{"c", 0.0}}, 2), [](VerificationCase& c) {
                     AnalysisConfig cfg;
                     cfg.decompose = false;
                     const std::string csv = sweep_csv("c", {-2.0, -0.75, 0.0}, builtin("huber", {{"c", 0.0}}, 2), cfg);
                     std::istringstream in(csv);
                     std::string line;
                     std::getline(in, line);
                     const std::vector<std::pair<std::string, std::string>> expected = {
                         {"finite", "finite"}, {"infinite", "finite"}, {"infinite", "infinite"}};
                     for (const auto& [dc, vc] : expected) {
                       if (!std::getline(in, line)) {
                         label_check(c, "row", "present", "missing", "huber_thresholds");
                         continue;
                       }
                       std::vector<std::string> cols;
                       std::string cell;
                       std::istringstream row(line);
                       while (std::getline(row, cell, ',')) cols.push_back(cell);
                       cols.resize(8);
                       const std::string at = "c = " + cols[0];
                       label_check(c, "diameter_class at " + at, dc, cols[5], "huber_thresholds");
                       label_check(c, "volume_class at " + at, vc, cols[6], "huber_thresholds");
                       number_check(c, "alpha0 at " + at, 1.0, cols[1].empty() ? std::nan("") : std::stod(cols[1]),
                                    0.02, "huber_thresholds");
                     }
                   }});

  // Polyharmonic dimension counts and mean-value expansions.
  for (int n : {2, 4, 6}) {
    cases.push_back({"polyharmonic_dimension/n" + std::to_string(n), 10, json{{"n", n}}, [n](VerificationCase& c) {
                       for (int d = 0; d <= 10; ++d) {
                         const auto ph = ph_dimension_detail(Dimension(n), d);
                         number_check(c, "kernel rank at d = " + std::to_string(d), static_cast<double>(ph.closed_form),
                                      static_cast<double>(ph.kernel_rank_result), 0.0, "polyharmonic_dimension",
                                      ph.certified ? "" : "rank not certified");
                       }
                     }});
    cases.push_back({"polyharmonic_mean/n" + std::to_string(n), 10, json{{"n", n}}, [n](VerificationCase& c) {
                       const Dimension dim(n);
                       std::mt19937_64 rng(2024 + n);
                       std::uniform_real_distribution<double> rr(0.2, 2.0);
                       double worst = 0.0;
                       for (int i = 0; i < 50; ++i) {
                         const Polynomial p = random_polyharmonic(rng, dim, n / 2, 6);
                         const auto ctr = sample_points(n, rng(), 1, 2.0)[0];
                         const double R = rr(rng);
                         const double mean = polynomial_ball_mean(p, ctr, R);
                         worst = std::max(worst, pizzetti_check(p, ctr, R) / (1.0 + std::abs(mean)));
                       }
                       bound_check(c, "max mean-value expansion residual (50 polynomials)", 1e-10, worst, false,
                                   "polyharmonic_dimension");
                     }});
  }

  // Green inverse in the plane.
  const std::string bump = "(1 + x1/2) * cutoff(r, 0.5, 1.5)";
  cases.push_back({"green_inverse/bump", 11, json{{"n", 2}, {"kind", "expression"}, {"u", bump}},
                   [bump](VerificationCase& c) {
                     const Dimension d2(2);
                     const auto expr = ScalarField::from_expression(Expression::parse(bump, d2));
                     FieldCaps caps;
                     caps.support_radius = 1.5;
                     const ScalarField f(d2, [expr](std::span<const double> x) { return expr(x); }, caps);
                     const auto pot = shared_evaluator(d2).potential_field(f);
                     double worst = 0.0;
                     for (const auto& x : sample_points(2, 3, 20, 0.6)) {
                       const double lap = laplacian_power(pot, x, 1, LaplacianMethod::finite_difference, 2e-2);
                       worst = std::max(worst, std::abs(-lap - f(x)) / std::max(std::abs(f(x)), 1e-12));
                     }
                     bound_check(c, "max relative error of -Delta L(f) against f", 1e-3, worst, false,
                                 "green_inverse");
                   }});

  // Determinism of the report.
  cases.push_back({"determinism/cone_a0.75", 12, builtin("cone", {{"a", 0.75}}, 2), [](VerificationCase& c) {
                     const json spec = builtin("cone", {{"a", 0.75}}, 2);
                     const std::string a = run_analysis(spec).to_json().dump();
                     const std::string b = run_analysis(spec).to_json().dump();
                     label_check(c, "repeated report bytes", "identical", a == b ? "identical" : "different",
                                 "determinism");
                     const std::string back = NormalityReport::from_json(json::parse(a)).to_json().dump();
                     label_check(c, "serialize-parse-serialize", "identical", back == a ? "identical" : "different",
                                 "determinism");
                   }});

  // Every gallery fact, re-derived.
  for (const auto& spec : gallery_instances()) {
    cases.push_back({"facts/" + instance_id(spec), 0, spec, [spec](VerificationCase& c) {
                       const auto g = metric_of(spec);
                       for (const auto& f : g.facts) {
                         try {
                           verify_fact(c, g, f);
                         } catch (const Error& e) {
                           Check k;
                           k.quantity = f.quantity;
                           k.anchor = "gallery_fact";
                           k.status = "failed";
                           k.note = e.what();
                           c.checks.push_back(std::move(k));
                         }
                       }
                     }});
  }
  return cases;
}

void finish(VerificationCase& c) {
  bool failed = !c.error.empty(), inconclusive = c.checks.empty() && c.error.empty();
  for (const auto& k : c.checks) {
    failed = failed || k.status == "failed";
    inconclusive = inconclusive || k.status == "inconclusive";
  }
  c.status = failed ? "failed" : inconclusive ? "inconclusive" : "passed";
}

std::string csv_cell(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char ch : s) {
    if (ch == '"') out += '"';
    out += ch == '\n' ? ' ' : ch;
  }
  return out + "\"";
}

}  // namespace

const std::vector<std::string>& check_anchors() {
  static const std::vector<std::string> anchors = {
      "entropy_identity",      "distance_exponent", "bounded_diameter",      "exact_potential",
      "potential_volume_growth", "decomposition",   "scalar_criterion",      "total_curvature_bound",
      "huber_thresholds",      "polyharmonic_dimension", "green_inverse",   "determinism",
      "gallery_fact"};
  return anchors;
}

json Check::to_json() const {
  json j{{"quantity", quantity}, {"expected", expected}, {"tolerance", tolerance}, {"anchor", anchor},
         {"actual", actual},     {"status", status}};
  if (!note.empty()) j["note"] = note;
  return j;
}

json VerificationCase::to_json() const {
  json j{{"id", id}, {"criterion", criterion}, {"spec", spec}, {"status", status}, {"seconds", seconds}};
  j["checks"] = json::array();
  for (const auto& k : checks) j["checks"].push_back(k.to_json());
  if (!error.empty()) j["error"] = error;
  return j;
}

json SuiteSummary::to_json() const {
  json j{{"passed", passed}, {"failed", failed}, {"inconclusive", inconclusive}, {"seconds", seconds}};
  j["cases"] = json::array();
  for (const auto& c : cases) j["cases"].push_back(c.to_json());
  return j;
}

std::vector<std::string> verification_case_ids() {
  std::vector<std::string> ids;
  for (const auto& c : build_cases()) ids.push_back(c.id);
  return ids;
}

SuiteSummary run_verification_suite(const std::string& filter, int workers,
                                    const std::function<void(const VerificationCase&)>& on_case) {
  const auto t0 = std::chrono::steady_clock::now();
  auto all = build_cases();
  // A filter naming a case group selects that group alone; otherwise it is
  // matched against whole ids.
  auto group = [](const std::string& id) { return id.substr(0, id.find('/')); };
  bool by_group = false;
  for (const auto& c : all) by_group = by_group || (!filter.empty() && group(c.id).find(filter) != std::string::npos);
  std::vector<CaseDef> selected;
  for (auto& c : all) {
    const std::string& key = by_group ? group(c.id) : c.id;
    if (filter.empty() || key.find(filter) != std::string::npos) selected.push_back(std::move(c));
  }
  SuiteSummary summary;
  summary.cases.resize(selected.size());
  std::atomic<std::size_t> next{0};
  std::mutex report_mu;
  auto worker = [&] {
    for (std::size_t i = next++; i < selected.size(); i = next++) {
      const auto& def = selected[i];
      VerificationCase c;
      c.id = def.id;
      c.criterion = def.criterion;
      c.spec = def.spec;
      const auto s0 = std::chrono::steady_clock::now();
      try {
        def.run(c);
      } catch (const std::exception& e) {
        c.error = e.what();
      }
      c.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - s0).count();
      finish(c);
      std::lock_guard lock(report_mu);
      if (on_case) on_case(c);
      summary.cases[i] = std::move(c);
    }
  };
  const int count = std::max(1, std::min<int>(workers, static_cast<int>(selected.size())));
  if (count == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int k = 0; k < count; ++k) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  for (const auto& c : summary.cases) {
    if (c.status == "passed") ++summary.passed;
    else if (c.status == "failed") ++summary.failed;
    else ++summary.inconclusive;
  }
  summary.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return summary;
}

NormalityReport run_analysis(const json& spec_document, const AnalysisConfig& config) {
  const MetricSpec spec = parse_metric_spec(spec_document);
  auto rep = analyze_normality(metric_from_spec(spec), config);
  rep.provenance["spec"] = spec.to_json();
  return rep;
}

std::string sweep_csv(const std::string& param, const std::vector<double>& values, const json& spec_template,
                      const AnalysisConfig& config) {
  if (!spec_template.is_object()) throw SchemaError("", "sweep template must be an object");
  const std::string kind = spec_template.value("kind", "");
  const std::string placeholder = "{" + param + "}";
  const bool by_param = kind == "builtin" && spec_template.contains("params") &&
                        spec_template["params"].is_object() && spec_template["params"].contains(param);
  const bool by_expr = kind == "expression" && spec_template.contains("u") && spec_template["u"].is_string() &&
                       spec_template["u"].get<std::string>().find(placeholder) != std::string::npos;
  if (!by_param && !by_expr) throw InputError("sweep template does not reference parameter '" + param + "'");

  std::ostringstream out;
  out << kSweepHeader << "\n";
  for (double v : values) {
    json doc = spec_template;
    if (by_param) {
      doc["params"][param] = v;
    } else {
      std::string u = doc["u"];
      for (auto pos = u.find(placeholder); pos != std::string::npos; pos = u.find(placeholder)) {
        u.replace(pos, placeholder.size(), "(" + num(v) + ")");
      }
      doc["u"] = u;
    }
    std::vector<std::string> cols(8);
    cols[0] = num(v);
    try {
      const auto rep = run_analysis(doc, config);
      if (rep.alpha0) cols[1] = num(*rep.alpha0);
      if (rep.tau) cols[2] = num(rep.tau->exponent);
      if (rep.identity_residual) cols[3] = num(*rep.identity_residual);
      if (rep.distance_exponent) cols[4] = num(*rep.distance_exponent);
      cols[5] = rep.diameter.cls;
      cols[6] = rep.volume.cls;
      std::string err;
      for (const auto& [field, msg] : rep.errors) err += (err.empty() ? "" : "; ") + field + ": " + msg;
      cols[7] = err;
    } catch (const std::exception& e) {
      cols[7] = e.what();
    }
    for (std::size_t i = 0; i < cols.size(); ++i) out << (i ? "," : "") << csv_cell(cols[i]);
    out << "\n";
  }
  return out.str();
}

}  // namespace qflat
