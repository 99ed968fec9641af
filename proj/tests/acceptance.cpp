// Runs the whole verification suite and prints one line per acceptance
// criterion. Exit status is nonzero when any criterion fails.

#include <cstdio>
#include <map>
#include <string>
#include <vector>

#include "qflat/suite.hpp"

namespace {

struct Criterion {
  const char* title;
  double budget_seconds;  // 0: no separate budget
};

const std::map<int, Criterion> kCriteria = {
    {1, {"entropy identity on cones and the round sphere", 60}},
    {2, {"distance growth exponent from radial rays", 30}},
    {3, {"bounded diameter beyond alpha0 = 1", 0}},
    {4, {"closed-form potential of the disk density", 0}},
    {5, {"volume growth of potentials", 120}},
    {6, {"decomposition of planted potentials", 0}},
    {7, {"scalar criterion against entropy verdict, n = 4", 0}},
    {8, {"total curvature lower bound, n = 2", 0}},
    {9, {"huber diameter and volume thresholds", 120}},
    {10, {"polyharmonic dimensions and mean-value expansion", 0}},
    {11, {"Green inverse in the plane", 0}},
    {12, {"determinism and full-suite runtime", 0}},
};

constexpr double kSuiteBudget = 15 * 60;

}  // namespace

int main() {
  const auto summary = qflat::run_verification_suite("", 1, [](const qflat::VerificationCase& c) {
    if (c.status != "passed") {
      std::printf("  [%s] %s%s%s\n", c.status.c_str(), c.id.c_str(), c.error.empty() ? "" : ": ", c.error.c_str());
      for (const auto& k : c.checks) {
        if (k.status != "passed") std::printf("      %s\n", k.to_json().dump().c_str());
      }
    }
    std::fflush(stdout);
  });

  struct Tally {
    int cases = 0, passed = 0, failed = 0;
    double seconds = 0;
  };
  std::map<int, Tally> tally;
  for (const auto& c : summary.cases) {
    auto& t = tally[c.criterion];
    ++t.cases;
    t.passed += c.status == "passed";
    t.failed += c.status == "failed";
    t.seconds += c.seconds;
  }

  int failures = 0;
  for (const auto& [id, crit] : kCriteria) {
    const Tally t = tally[id];
    bool ok = t.cases > 0 && t.failed == 0;
    std::string extra;
    if (crit.budget_seconds > 0) {
      ok = ok && t.seconds <= crit.budget_seconds;
      extra = ", budget " + std::to_string(static_cast<int>(crit.budget_seconds)) + " s";
    }
    if (id == 12) {
      ok = ok && summary.seconds <= kSuiteBudget;
      extra = ", suite " + std::to_string(summary.seconds) + " s of " + std::to_string(static_cast<int>(kSuiteBudget));
    }
    failures += !ok;
    std::printf("criterion %2d %s: %s (%d/%d cases passed, %d inconclusive, %.2f s%s)\n", id, ok ? "PASS" : "FAIL",
                crit.title, t.passed, t.cases, t.cases - t.passed - t.failed, t.seconds, extra.c_str());
  }
  const Tally facts = tally[0];
  std::printf("gallery facts: %d/%d cases passed, %d failed\n", facts.passed, facts.cases, facts.failed);
  std::printf("suite: %d passed, %d failed, %d inconclusive in %.1f s\n", summary.passed, summary.failed,
              summary.inconclusive, summary.seconds);
  return failures == 0 && facts.failed == 0 ? 0 : 1;
}
