#pragma once

#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "qflat/field.hpp"
#include "qflat/geometry.hpp"
#include "qflat/polynomial.hpp"
#include "qflat/potential.hpp"
#include "qflat/spec_document.hpp"

namespace qflat {

/// Where a known value comes from.
enum class FactBasis {
  by_inspection,     // immediate from the formula
  closed_form,       // explicit integral; `oracle` says which
  threshold_result,  // published threshold for the family
};
const char* to_string(FactBasis b);

struct ClosedFormFact {
  /// alpha0, tau, distance_exponent, diameter, volume, diameter_class,
  /// volume_class, scalar_curvature, q_curvature.
  std::string quantity;
  std::optional<double> value;  // numeric facts
  std::string label;            // class facts ("finite" / "infinite")
  double tolerance = 0.0;
  FactBasis basis = FactBasis::by_inspection;
  std::string oracle;
};

struct GalleryParam {
  std::string name;
  double default_value = 0.0;
  double lo = 0.0, hi = 0.0;  // documented range, inclusive
  std::string note;
};

struct GalleryEntry {
  std::string name;
  std::string summary;
  std::vector<GalleryParam> params;
};

const std::vector<GalleryEntry>& gallery_entries();

struct GalleryMetric {
  MetricContext ctx;
  std::vector<ClosedFormFact> facts;
  std::vector<std::string> flags;  // e.g. "noncomplete_candidate"
  /// u = L(f) + P for the potential-built families.
  std::optional<ScalarField> source_density;
  std::optional<Polynomial> planted;
  nlohmann::json params;  // resolved parameters, defaults filled in

  const ClosedFormFact* fact(const std::string& quantity) const;
};

/// Builds a gallery metric on R^n. InputError for unknown names, unknown
/// parameters or values outside the documented range.
GalleryMetric gallery(const std::string& name, const nlohmann::json& params, int n);

/// f = c e^{-|x|^2} normalised so that G int f = mass.
ScalarField gaussian_density(Dimension dim, double mass);

/// Shared potential evaluator per dimension (default configuration).
const PotentialEvaluator& shared_evaluator(Dimension dim);

/// Metric for any spec document: builtins resolve through the gallery,
/// expression and radial-table documents through field_from_spec.
GalleryMetric metric_from_spec(const MetricSpec& spec);

/// Upper-bounded polynomial of degree <= min(degree, n - 2) drawn from the
/// seed: c - sum_i a_i (x_i - b_i)^2 with a_i either 0 or in [0.25, 1].
Polynomial planted_polynomial(Dimension dim, std::uint64_t seed, int degree);

}  // namespace qflat
