#pragma once

#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "qflat/core.hpp"
#include "qflat/field.hpp"
#include "qflat/quadrature.hpp"

namespace qflat {

/// Mean over the unit sphere S^{n-1} of log|r e_1 - s w|, closed form.
/// With R = max(r, s), rho = min(r, s) / R and sin^{n-2} t = sum_j a_j cos(2 j t):
///   k_n(r, s) = log R - sum_{j>=1} rho^{2j} a_j / (4 j a_0).
double angular_log_kernel(Dimension dim, double r, double s);

/// Same mean by Gauss-Legendre quadrature in the polar angle (weight
/// sin^{n-2}). Accurate away from r = s where the integrand is singular.
double angular_log_kernel_quadrature(Dimension dim, double r, double s, int nodes = 64);

/// d/dr k_n(r, s).
double angular_log_kernel_dr(Dimension dim, double r, double s);

/// Mean of log|z - y| over z in a ball of radius a whose center is at distance
/// d from y; closed form by integrating k_n over the ball radius.
double ball_log_kernel(Dimension dim, double d, double a);

/// Kernel values k_n(r_i, r_j) on a geometric grid, with a flat binary cache.
class KernelTable {
 public:
  struct Key {
    int n = 2;
    double r_min = 1e-6;
    double r_max = 1e6;
    int nodes_per_decade = 8;
    double tolerance = 1e-10;
    bool operator==(const Key&) const = default;
  };

  static KernelTable build(const Key& key);
  /// Reads a cache file; InputError if the header does not match `key` or the
  /// file is truncated.
  static KernelTable load(const std::string& path, const Key& key);
  void save(const std::string& path) const;

  const Key& key() const { return key_; }
  std::size_t size() const { return nodes_.size(); }
  double node(std::size_t i) const { return nodes_[i]; }
  double at(std::size_t i, std::size_t j) const { return values_[i * nodes_.size() + j]; }
  /// Interpolated kernel: log max(r, s) plus the tabulated ratio part.
  double lookup(double r, double s) const;
  /// Largest |k(r_i, r_j) - k(r_j, r_i)|.
  double symmetry_defect() const;
  /// Largest gap between the table and the polar-angle quadrature route at
  /// nodes with |log10(r/s)| >= 0.25 (set at build time).
  double quadrature_gap() const { return quadrature_gap_; }

 private:
  Key key_;
  std::vector<double> nodes_;
  std::vector<double> values_;
  double quadrature_gap_ = 0.0;
};

struct PotentialConfig {
  double rel_tol = 1e-8;
  int max_intervals = 400;
  /// Optional kernel cache file; built and written when missing.
  std::string kernel_cache;
  KernelTable::Key table{};
};

struct AlphaEstimate {
  double alpha_hat = 0.0;
  double window[2] = {0.0, 0.0};
  double residual = 0.0;
  std::string method;  // "mass_integral" | "asymptote_fit"
  quad::Convergence tail = quad::Convergence::convergent;
  /// Fits restricted to the first and last third of the window (asymptote
  /// fits only); a large gap means the asymptotic regime was not reached.
  std::optional<double> alpha_head, alpha_tail;
};

/// Logarithmic potential L(f)(x) = G int log(|y| / |x - y|) f(y) dy with
/// G = 2 / ((n-1)! |S^n|).
class PotentialEvaluator {
 public:
  explicit PotentialEvaluator(Dimension dim, PotentialConfig config = {});

  Dimension dim() const { return Dimension(n_); }
  const PotentialConfig& config() const { return config_; }
  const KernelTable& table() const { return *table_; }

  /// L(f)(x). Radial densities use the 1-D kernel integral; others split at
  /// B_eps(x), eps = min(1, 1/(1+|x|)), with the singularity subtracted.
  double value(const ScalarField& f, std::span<const double> x) const;
  /// Radial f: L(f) at radius r, its r-derivative and its Laplacian
  /// (Laplacian available for n = 2, 4 through the Newtonian kernel).
  double radial_value(const ScalarField& f, double r) const;
  double radial_derivative(const ScalarField& f, double r) const;
  double radial_laplacian(const ScalarField& f, double r) const;

  /// L(f) as a field. Radial f gives a radial field backed by a spline
  /// profile, with gradient and (n = 2, 4) the analytic Laplacian chain.
  ScalarField potential_field(const ScalarField& f) const;

  /// G int f, with the log-dyadic tail test. NonIntegrable unless convergent.
  AlphaEstimate total_mass_alpha(const ScalarField& f) const;

  /// G int log|y| f(y) dy.
  double log_moment(const ScalarField& f) const;

  /// Means of L(f) over the balls B_a(c) for each center c, from the
  /// ball-averaged kernel (no singular integrand, one pass per center).
  std::vector<double> ball_means(const ScalarField& f, const std::vector<std::vector<double>>& centers,
                                 double a) const;

 private:
  double radial_moment(const ScalarField& f, const std::function<double(double, double)>& kernel,
                       std::vector<double> breakpoints) const;
  double general_w(const ScalarField& f, std::span<const double> x) const;
  double outer_integral(const ScalarField& f, std::span<const double> x, double r0, const quad::Fn1& kernel,
                        std::vector<double> breaks) const;

  int n_;
  PotentialConfig config_;
  std::shared_ptr<const KernelTable> table_;
};

double log_potential(const ScalarField& f, std::span<const double> x);
AlphaEstimate total_mass_alpha(const ScalarField& f);

/// Fits ball means mean_{B_1(R e_1)} L(f) against log R; alpha_hat = -slope.
/// Requires radii spanning at least two decades.
AlphaEstimate potential_asymptote(const PotentialEvaluator& ev, const ScalarField& f, const std::vector<double>& radii);
AlphaEstimate potential_asymptote(const ScalarField& f, const std::vector<double>& radii);

enum class PartSign { plus, minus };

struct MarginStats {
  double max = 0.0;
  double min = 0.0;
  double mean = 0.0;
  double alpha = 0.0;
  int samples = 0;
  /// max for PartSign::plus (bounded above), min for PartSign::minus.
  double margin = 0.0;
};

/// Statistics of L(f)(x) + alpha log|x| over |x| in radii (four directions
/// per radius). The designated part of f must be compactly supported:
/// part_support (or f's own support radius) gives its radius, and samples
/// outside it are checked.
MarginStats potential_bound_check(const PotentialEvaluator& ev, const ScalarField& f, PartSign sign,
                                  const std::vector<double>& radii, std::optional<double> part_support = {});

/// Least-squares line y = a + b x; returns {a, b, rms residual}.
struct LineFit {
  double intercept = 0.0;
  double slope = 0.0;
  double residual = 0.0;
};
LineFit fit_line(const std::vector<double>& x, const std::vector<double>& y);

}  // namespace qflat
