#pragma once

#include <map>
#include <optional>
#include <span>
#include <utility>
#include <vector>

#include "qflat/core.hpp"
#include "qflat/field.hpp"
#include "qflat/polynomial.hpp"

namespace qflat {

enum class LaplacianMethod { analytic, finite_difference, radial };

/// Step used by the Cartesian finite-difference Laplacian when none is given.
double default_fd_step(std::span<const double> x);

/// Delta^m f at x.
///  analytic: the field's closed-form chain (PreconditionError if missing);
///  finite_difference: centered second-order stencil composed m times, step h
///    (h <= 0 selects default_fd_step);
///  radial: recursion Delta phi = phi'' + (n-1) phi' / r on the profile, with
///    the limit n phi''(0) at the origin (NotRadial for non-radial fields).
double laplacian_power(const ScalarField& f, std::span<const double> x, int m, LaplacianMethod method,
                       double h = 0.0);

/// Best available route: analytic chain, then radial recursion, then finite differences.
double laplacian_power(const ScalarField& f, std::span<const double> x, int m);

/// Delta^m of the radial function phi at radius r in R^n. Inside the unit
/// ball the r-variable recursion is used; outside, the operator is applied in
/// t = log r where r^{2m} Delta^m = prod_{k<m} (D - 2k)(D - 2k + n - 2).
/// Both are Richardson-extrapolated central differences.
double radial_laplacian_power(const RadialFn& phi, double r, int n, int m);

/// grad f at x: analytic gradient, radial profile derivative, or fourth-order
/// central differences.
std::vector<double> gradient(const ScalarField& f, std::span<const double> x);

/// (-Delta)^{n/2} u, i.e. Q_g e^{n u}.
double q_density(const ScalarField& u, std::span<const double> x);

/// Q_g = e^{-n u} (-Delta)^{n/2} u. OverflowError when n u < -700.
double q_curvature(const ScalarField& u, std::span<const double> x);

/// R_g = 2(n-1) e^{-2u} (-Delta u - (n-2)/2 |grad u|^2). DimensionError for n = 2.
double scalar_curvature(const ScalarField& u, std::span<const double> x);

/// R_g^- e^{2u} = 2(n-1) max(0, Delta u + (n-2)/2 |grad u|^2); no exponentials involved.
double scalar_negative_part_density(const ScalarField& u, std::span<const double> x);

struct CurvatureReport {
  std::vector<double> point;
  double q_value = 0.0;
  std::optional<double> scalar_value;
};

CurvatureReport curvature_report(const ScalarField& u, std::span<const double> x);

struct PizzettiCoefficients {
  int n = 2;
  int m = 1;
  std::vector<double> c;  // c_0 .. c_{m-1}
};

/// Coefficients of the ball-mean expansion
///   mean_{B_R(x)} h = sum_{i<m} c_i R^{2i} Delta^i h(x)   for Delta^m h = 0,
/// obtained by matching the exact ball means of |y - x|^{2i}.
PizzettiCoefficients pizzetti_coeffs(Dimension dim, int m);

/// Mean of f over B_R(center). Radial fields reduce to a 1-D integral;
/// otherwise polar coordinates about the center with an angular rule refined
/// until two orders agree.
double ball_mean(const ScalarField& f, std::span<const double> center, double R, double rel_tol = 1e-8);

/// Mean over B_R(c) of the radial function phi(|y|), |c| = center_norm, as a
/// 1-D integral weighted by the fraction of each sphere |y| = s inside the ball.
double radial_ball_mean(const RadialFn& phi, int n, double center_norm, double R, double rel_tol = 1e-8);

/// Fraction of the sphere |y| = s lying inside B_R(c), |c| = d.
double sphere_fraction_in_ball(int n, double s, double d, double R);

/// |mean_{B_R(center)} p - sum_i c_i R^{2i} Delta^i p(center)| with m the
/// smallest order for which Delta^m p = 0.
double pizzetti_check(const Polynomial& p, std::span<const double> center, double R);

/// Smallest m with Delta^m p = 0.
int polyharmonic_order(const Polynomial& p);

/// Radial functions sum_{j,k} c_{jk} s^j (1+s)^{-k} + lambda log(1+s), s = r^2,
/// closed under the Laplacian. Sphere and cone conformal factors live here.
class RationalRadial {
 public:
  RationalRadial() = default;
  static RationalRadial log_term(double lambda);
  static RationalRadial constant(double c);

  void add(int j, int k, double c);
  double value(double r) const;
  /// e^{n t} value(e^t), without overflow for large t.
  double weighted_value(double t, int n) const;
  /// d/dr.
  double derivative(double r) const;
  RationalRadial laplacian(int n) const;
  RationalRadial operator+(const RationalRadial& o) const;
  RationalRadial operator*(double s) const;

 private:
  void normalize();

  std::map<std::pair<int, int>, double> terms_;
  // The same terms rewritten as sum b_k (1+r^2)^{-k}. Cancellations between
  // terms of equal decay happen here, in the coefficients, instead of at
  // evaluation time where they would eat every digit at large r.
  std::vector<std::pair<int, double>> decay_terms_;
  double log_coeff_ = 0.0;
};

}  // namespace qflat
