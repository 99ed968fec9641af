#pragma once

#include <cstdint>
#include <map>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "qflat/core.hpp"

namespace qflat {

using MultiIndex = std::vector<int>;

/// Real polynomial on R^n stored as a sparse map multi-index -> coefficient.
/// Zero coefficients are never stored.
class Polynomial {
 public:
  explicit Polynomial(Dimension dim) : n_(dim.value()) {}

  static Polynomial constant(Dimension dim, double c);
  static Polynomial monomial(Dimension dim, MultiIndex alpha, double c = 1.0);
  /// x_i (0-based axis).
  static Polynomial coordinate(Dimension dim, int axis);
  /// |x|^{2k}.
  static Polynomial radius_power(Dimension dim, int k);

  Dimension dim() const { return Dimension(n_); }
  int degree() const;  // -1 for the zero polynomial
  bool is_zero() const { return coeffs_.empty(); }
  const std::map<MultiIndex, double>& coeffs() const { return coeffs_; }
  double coefficient(const MultiIndex& alpha) const;

  void add_term(const MultiIndex& alpha, double c);

  double operator()(std::span<const double> x) const;

  Polynomial operator+(const Polynomial& o) const;
  Polynomial operator-(const Polynomial& o) const;
  Polynomial operator*(const Polynomial& o) const;
  Polynomial operator*(double s) const;
  bool operator==(const Polynomial& o) const { return n_ == o.n_ && coeffs_ == o.coeffs_; }

  /// p(x + shift) expanded in powers of x.
  Polynomial translated(std::span<const double> shift) const;

  std::string to_string() const;

 private:
  int n_;
  std::map<MultiIndex, double> coeffs_;
};

/// All multi-indices of total degree exactly k, in lexicographic order.
std::vector<MultiIndex> homogeneous_indices(int n, int k);
/// All multi-indices of total degree <= k, by increasing degree.
std::vector<MultiIndex> indices_up_to(int n, int k);

/// Exact coefficient-level Delta^m p.
Polynomial apply_laplacian_poly(const Polynomial& p, int m);

/// Exact mean of p over the ball B_R(center) from monomial moments.
double polynomial_ball_mean(const Polynomial& p, std::span<const double> center, double R);

/// Dimension of the kernel of Delta^{n/2} on polynomials of degree <= floor(d).
struct PhDimension {
  long kernel_rank_result = 0;  // from exact ranks of the coefficient map
  long closed_form = 0;         // C(n + D, n) - C(D, n)
  bool certified = true;        // every block reached full row rank mod p
};
PhDimension ph_dimension_detail(Dimension dim, double d);
long ph_dimension(Dimension dim, double d);

/// Binomial coefficient as an exact integer (small arguments).
long binomial(int a, int b);

/// Re or Im of (x_a + i x_b)^k, harmonic in any dimension.
Polynomial complex_power_part(Dimension dim, int a, int b, int k, bool imaginary);
/// Random harmonic polynomial of degree <= max_degree with dyadic coefficients.
Polynomial random_harmonic(std::mt19937_64& rng, Dimension dim, int max_degree);
/// Random solution of Delta^m p = 0: sum_{i<m} |x|^{2i} h_i with harmonic h_i.
Polynomial random_polyharmonic(std::mt19937_64& rng, Dimension dim, int m, int max_degree);

}  // namespace qflat
