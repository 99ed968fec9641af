#pragma once

#include <functional>
#include <string>
#include <vector>

#include <json.hpp>

#include "qflat/gallery.hpp"
#include "qflat/normality.hpp"

namespace qflat {

/// Identifiers a check may cite as the identity or threshold it exercises.
const std::vector<std::string>& check_anchors();

struct Check {
  std::string quantity;
  nlohmann::json expected;  // number or label
  double tolerance = 0.0;
  std::string anchor;
  nlohmann::json actual;
  std::string status = "inconclusive";  // passed | failed | inconclusive
  std::string note;

  nlohmann::json to_json() const;
};

struct VerificationCase {
  std::string id;
  /// Acceptance criterion exercised (1..12); 0 for gallery fact re-checks.
  int criterion = 0;
  nlohmann::json spec;
  std::vector<Check> checks;
  std::string status = "inconclusive";
  std::string error;
  double seconds = 0.0;

  nlohmann::json to_json() const;
};

struct SuiteSummary {
  int passed = 0;
  int failed = 0;
  int inconclusive = 0;
  double seconds = 0.0;
  std::vector<VerificationCase> cases;

  nlohmann::json to_json() const;
  /// 0, or 3 when any case failed (inconclusive does not fail).
  int exit_code() const { return failed > 0 ? 3 : 0; }
};

/// Ids of every case, in execution order.
std::vector<std::string> verification_case_ids();

/// Runs the cases selected by `filter` (all when empty). Ids read
/// "group/instance"; when some group contains `filter` only those groups run,
/// otherwise every id containing it. Cases are independent and may run on
/// `workers` threads; results keep case order.
SuiteSummary run_verification_suite(const std::string& filter = "", int workers = 1,
                                    const std::function<void(const VerificationCase&)>& on_case = {});

/// Metric document -> report. The document is recorded as provenance.spec.
NormalityReport run_analysis(const nlohmann::json& spec_document, const AnalysisConfig& config = {});

inline constexpr const char* kSweepHeader =
    "value,alpha0,tau,identity_residual,distance_exponent,diameter_class,volume_class,error";

/// One CSV row per value. Builtin templates take the value in params[param];
/// expression templates substitute it for "{param}" in u. Row failures go to
/// the error column.
std::string sweep_csv(const std::string& param, const std::vector<double>& values, const nlohmann::json& spec_template,
                      const AnalysisConfig& config = {});

}  // namespace qflat
