#pragma once

#include <functional>
#include <optional>
#include <span>
#include <vector>

#include "qflat/core.hpp"

namespace qflat::quad {

using Fn1 = std::function<double(double)>;

struct Tolerance {
  double rel = 1e-10;
  double abs = 1e-300;
  int max_intervals = 400;
};

struct Result {
  double value = 0.0;
  double error = 0.0;
  double l1 = 0.0;  // integral of |f|
  bool converged = true;
  long evaluations = 0;
};

/// Globally adaptive Gauss-Kronrod (7/15) on [a, b]. The worst interval is
/// bisected until error <= max(abs, rel * l1) or the interval budget runs out.
Result integrate(const Fn1& f, double a, double b, Tolerance tol = {});

/// Gauss-Legendre nodes and weights on [-1, 1].
struct GaussRule {
  std::vector<double> nodes, weights;
  static GaussRule legendre(int order);
};

/// Product quadrature for the mean over S^{n-1}. Weights sum to 1.
/// n = 2 uses the periodic trapezoid rule with 2*order points; higher n use
/// Gauss-Gegenbauer nodes in x_1 (weight (1 - x_1^2)^{(n-3)/2}) times the
/// rule for the next lower sphere.
class AngularRule {
 public:
  static AngularRule make(int n, int order);

  int dim() const { return n_; }
  std::size_t size() const { return weights_.size(); }
  std::span<const double> node(std::size_t i) const { return {nodes_.data() + i * n_, static_cast<std::size_t>(n_)}; }
  double weight(std::size_t i) const { return weights_[i]; }

  /// Mean of f over the sphere of radius rho about center.
  double sphere_mean(const std::function<double(std::span<const double>)>& f,
                     std::span<const double> center, double rho) const;

 private:
  int n_ = 2;
  std::vector<double> nodes_;
  std::vector<double> weights_;
};

enum class Convergence { convergent, divergent, inconclusive };

const char* to_string(Convergence c);

/// Outcome of a semi-infinite radial integral with the log-dyadic tail test.
struct TailResult {
  double value = 0.0;        // partial + extrapolated tail (partial when not convergent)
  double partial = 0.0;      // sum of computed segments
  double tail = 0.0;         // extrapolated remainder
  double l1 = 0.0;
  std::vector<double> segments;  // log-dyadic segment sums, in order
  std::vector<double> ratios;    // |S_{k+1}| / |S_k|
  Convergence status = Convergence::inconclusive;
  bool quadrature_converged = true;
  /// Set when evaluation failed numerically in a far segment (t > 32) and the
  /// remaining segments were dropped; the value of t reached.
  std::optional<double> truncated_at;
};

/// Integrand of a radial 1-D integral, given both in r and in t = log r.
/// `in_t(t)` must equal e^t * in_r(e^t); it is derived from `in_r` when
/// empty. Supplying it directly avoids under/overflow at huge radii.
struct RadialIntegrand {
  Fn1 in_r;
  Fn1 in_t;
};

struct TailOptions {
  Tolerance tol{};
  /// Largest t = log r reached by the dyadic segments (2^k boundaries).
  double t_cap = 256.0;
  /// Ratio threshold for convergence and the number of trailing ratios checked.
  double ratio_bound = 0.97;
  int ratios_checked = 6;
  std::vector<double> breakpoints;  // radii
};

/// Integral of F over [r0, inf). The piece r0 < r < 1 is integrated in r;
/// beyond that the integral is split at t = 1, 2, 4, ..., t_cap in t = log r
/// ("log-dyadic" segments). Segment sums decaying with ratio <= ratio_bound
/// over the last `ratios_checked` ratios mark convergence and the remainder is
/// extrapolated geometrically; sustained ratios >= 1 mark divergence.
TailResult integrate_radial_tail(const RadialIntegrand& f, double r0, const TailOptions& opts = {});

/// Integral of F over [r0, r1], split at r = 1 and in unit steps of log r beyond.
Result integrate_radial_range(const RadialIntegrand& f, double r0, double r1, Tolerance tol = {},
                              std::span<const double> breakpoints = {});

}  // namespace qflat::quad
