#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "qflat/field.hpp"
#include "qflat/gallery.hpp"
#include "qflat/geometry.hpp"
#include "qflat/polynomial.hpp"
#include "qflat/potential.hpp"

namespace qflat {

// ---------------------------------------------------------------------------
// Decomposition w = L(f) + P

/// Sample points for the polynomial fit: `radii` geometric radii spanning
/// `decades` decades from r_min, `directions` seeded unit directions each.
struct SampleSet {
  std::vector<std::vector<double>> points;
  double r_min = 1.0;
  int decades = 4;
  int radii = 12;
  int directions = 8;
  std::uint64_t seed = 1;

  static SampleSet make(Dimension dim, std::uint64_t seed = 1, double r_min = 1.0, int decades = 4, int radii = 12,
                        int directions = 8);
  std::string describe() const;
};

struct Decomposition {
  Polynomial polynomial_part{Dimension(2)};
  /// Standard error of each fitted coefficient.
  std::map<MultiIndex, double> standard_errors;
  int max_degree = 0;
  /// rms of w - L(f) - P over the samples.
  double fit_residual = 0.0;
  /// rms of w - L(f) itself, the scale the residual is judged against.
  double data_scale = 0.0;
  /// A degree >= 1 coefficient exceeds 10 standard errors and the effect floor.
  bool nonconstant = false;
  /// Residual above 1e-6 (1 + data_scale): the basis cannot represent w - L(f).
  bool residual_flag = false;
  std::string sample_set;
};

/// Least-squares fit of w - L(f) in the monomials of degree <= max_degree
/// (default n - 2). PreconditionError when the samples are fewer than three
/// per monomial or span less than two decades.
Decomposition decompose(const ScalarField& w, const ScalarField& f, const SampleSet& samples,
                        std::optional<int> max_degree = {});
Decomposition decompose(const PotentialEvaluator& ev, const ScalarField& w, const ScalarField& f,
                        const SampleSet& samples, std::optional<int> max_degree = {});

// ---------------------------------------------------------------------------
// Growth classification

enum class Growth { little_o, not_little_o, inconclusive, not_applicable };
const char* to_string(Growth g);
Growth growth_from_string(const std::string& s);

struct GrowthVerdict {
  double fitted_exponent = 0.0;
  double threshold = 0.0;
  double margin = 0.25;
  Growth verdict = Growth::inconclusive;
  std::vector<std::pair<double, double>> samples;
  std::string note;
};

/// Slack below the threshold still read as not_little_o (fits of exact
/// R^threshold data land a hair under it).
inline constexpr double kThresholdSlack = 0.01;

/// Slope of log I against log R over the top half of the samples (by R).
/// little_o if slope <= threshold - margin, not_little_o if slope >=
/// threshold - kThresholdSlack, inconclusive otherwise. All-zero I gives
/// little_o. InputError for fewer than 6 samples, R <= 0 or I < 0.
GrowthVerdict growth_classifier(const std::vector<std::pair<double, double>>& samples, double threshold,
                                double margin = 0.25);

/// Dyadic radii 2^lo .. 2^hi.
std::vector<double> dyadic_radii(int lo = 1, int hi = 14);

/// int_{B_R(0)} g for every R in `radii` (sorted ascending), accumulated
/// shell by shell. Radial g uses its profile; others use sphere means.
std::vector<double> ball_integrals(const ScalarField& g, const std::vector<double>& radii);

/// int_{B_R} |Delta w| against R^n (n >= 4; DimensionError for n = 2).
GrowthVerdict normality_condition_a(const ScalarField& w, const std::vector<double>& radii);
/// int_{B_R} |w| against R^{n+2} (n >= 4).
GrowthVerdict normality_condition_b(const ScalarField& w, const std::vector<double>& radii);
/// int_{B_R} R_g^- e^{2u} against R^n (n >= 4).
GrowthVerdict normality_scalar_criterion(const ScalarField& u, const std::vector<double>& radii);

// ---------------------------------------------------------------------------
// Total curvature lower bound

struct CohnVossen {
  double total = 0.0;  // int Q e^{nu}
  double bound = 0.0;  // (n-1)! |S^n| / 2
  std::optional<bool> satisfied;  // empty when a precondition failed
  /// finite_volume, integrable_negative_part and (n >= 4) laplacian_growth.
  std::map<std::string, std::string> preconditions;
};

/// `density` is Q e^{nu}; the bound check runs only when every precondition
/// holds.
CohnVossen cohn_vossen_check(const MetricContext& ctx, const ScalarField& density,
                             const std::vector<double>& radii = dyadic_radii());

/// Q e^{nu} = (-Delta)^{n/2} u for the metric: the closed form when the
/// context carries one, otherwise the radial recursion (radial u) or the
/// pointwise route of q_density.
ScalarField curvature_density(const MetricContext& ctx);

// ---------------------------------------------------------------------------
// Full analysis

struct AnalysisConfig {
  std::uint64_t seed = 1;
  std::vector<double> volume_radii = geometric_radii(1e2, 1e8);
  std::vector<double> distance_radii = geometric_radii(1e1, 1e4);
  std::vector<double> criteria_radii = dyadic_radii();
  double identity_tolerance = 0.05;
  /// Skip the decomposition corroboration.
  bool decompose = true;
};

struct ClassValue {
  std::string cls = "inconclusive";
  std::optional<double> value;
};

struct NormalityReport {
  int n = 2;
  std::optional<double> alpha0;
  std::optional<GrowthEstimate> tau;
  std::optional<double> identity_residual;
  std::string verdict = "INCONCLUSIVE";  // NORMAL | NOT_NORMAL | INCONCLUSIVE
  /// entropy, condition_a, condition_b, scalar_criterion.
  std::map<std::string, nlohmann::json> criteria;
  std::optional<CohnVossen> cohn_vossen;
  ClassValue diameter;
  ClassValue volume;
  std::optional<double> distance_exponent;
  /// Per-field failures: field name -> message.
  std::map<std::string, std::string> errors;
  nlohmann::json provenance = nlohmann::json::object();

  nlohmann::json to_json() const;
  static NormalityReport from_json(const nlohmann::json& j);
};

NormalityReport analyze_normality(const GalleryMetric& metric, const AnalysisConfig& config = {});
NormalityReport analyze_normality(const MetricContext& ctx, const AnalysisConfig& config = {});

}  // namespace qflat
