#include "qflat/calculus.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <functional>
#include <mutex>

#include <boost/math/special_functions/beta.hpp>

#include "qflat/quadrature.hpp"

namespace qflat {

namespace {

void check_point(const ScalarField& f, std::span<const double> x) {
  if (static_cast<int>(x.size()) != f.dim().value()) {
    throw DimensionError("point dimension does not match the field");
  }
}

// m-fold composition of the unit-step 5-point (2n+1-point) Laplacian stencil.
std::map<std::vector<int>, double> composed_stencil(int n, int m) {
  std::map<std::vector<int>, double> st{{std::vector<int>(n, 0), 1.0}};
  for (int step = 0; step < m; ++step) {
    std::map<std::vector<int>, double> next;
    for (const auto& [off, w] : st) {
      next[off] += -2.0 * n * w;
      for (int k = 0; k < n; ++k) {
        auto p = off;
        p[k] += 1;
        next[p] += w;
        p[k] -= 2;
        next[p] += w;
      }
    }
    st = std::move(next);
  }
  return st;
}

const std::map<std::vector<int>, double>& cached_stencil(int n, int m) {
  static std::mutex mu;
  static std::map<std::pair<int, int>, std::map<std::vector<int>, double>> cache;
  std::lock_guard<std::mutex> lock(mu);
  auto it = cache.find({n, m});
  if (it == cache.end()) it = cache.emplace(std::make_pair(n, m), composed_stencil(n, m)).first;
  return it->second;
}

double fd_laplacian_power(const ScalarField& f, std::span<const double> x, int m, double h) {
  const int n = f.dim().value();
  if (!(h > 0.0)) h = default_fd_step(x);
  if (h < 1e-8 * (1.0 + norm(x))) throw NumericError("finite-difference step underflow");
  const auto& st = cached_stencil(n, m);
  std::vector<double> y(n);
  double acc = 0.0;
  for (const auto& [off, w] : st) {
    for (int k = 0; k < n; ++k) y[k] = x[k] + h * off[k];
    acc += w * f(y);
  }
  return acc / std::pow(h, 2 * m);
}

// Laurent polynomial in the shift operator: coefficient of E^j at index j + offset.
std::vector<double> log_variable_stencil(int n, int m, double h) {
  std::vector<double> poly{1.0};
  for (int k = 0; k < m; ++k) {
    const double b = n - 2 - 4.0 * k;
    const double c = -2.0 * k * (n - 2 - 2.0 * k);
    // D^2 + b D + c with D^2 ~ (E - 2 + E^-1)/h^2, D ~ (E - E^-1)/(2h).
    const double q[3] = {1.0 / (h * h) - b / (2 * h), -2.0 / (h * h) + c, 1.0 / (h * h) + b / (2 * h)};
    std::vector<double> next(poly.size() + 2, 0.0);
    for (std::size_t i = 0; i < poly.size(); ++i) {
      for (int j = 0; j < 3; ++j) next[i + j] += poly[i] * q[j];
    }
    poly = std::move(next);
  }
  return poly;
}

double inner_step(int m) { return m == 1 ? 1e-2 : (m == 2 ? 2e-2 : 5e-2); }
double outer_step(int m) { return m == 1 ? 1e-2 : (m == 2 ? 4e-2 : 8e-2); }

// Cartesian composed stencil applied to x = r e_1; consistent through r = 0.
double radial_inner(const RadialFn& phi, double r, int n, int m, double h) {
  const auto& st = cached_stencil(n, m);
  double acc = 0.0;
  for (const auto& [off, w] : st) {
    double s2 = (r + h * off[0]) * (r + h * off[0]);
    for (int k = 1; k < n; ++k) s2 += h * h * off[k] * off[k];
    acc += w * phi(std::sqrt(s2));
  }
  return acc / std::pow(h, 2 * m);
}

double radial_outer(const RadialFn& phi, double r, int n, int m, double h) {
  const double t = std::log(r);
  const auto st = log_variable_stencil(n, m, h);
  double acc = 0.0;
  for (std::size_t i = 0; i < st.size(); ++i) {
    const double ti = t + (static_cast<double>(i) - m) * h;
    acc += st[i] * phi(std::exp(ti));
  }
  return acc * std::exp(-2.0 * m * t);
}

}  // namespace

double default_fd_step(std::span<const double> x) { return std::max(1e-2, 1e-2 * (1.0 + norm(x))); }

double radial_laplacian_power(const RadialFn& phi, double r, int n, int m) {
  if (m < 0) throw InputError("Laplacian power must be nonnegative");
  if (m == 0) return phi(r);
  double a, b;
  if (r < 1.0) {
    const double h = inner_step(m);
    a = radial_inner(phi, r, n, m, h);
    b = radial_inner(phi, r, n, m, h / 2);
  } else {
    const double h = outer_step(m);
    a = radial_outer(phi, r, n, m, h);
    b = radial_outer(phi, r, n, m, h / 2);
  }
  return (4.0 * b - a) / 3.0;
}

double laplacian_power(const ScalarField& f, std::span<const double> x, int m, LaplacianMethod method, double h) {
  check_point(f, x);
  if (m < 1) throw InputError("Laplacian power must be positive");
  switch (method) {
    case LaplacianMethod::analytic:
      if (!f.has_laplacian_chain(m)) {
        throw PreconditionError("field has no analytic Laplacian chain of order " + std::to_string(m));
      }
      return f.caps().laplacian_chain[m - 1](x);
    case LaplacianMethod::finite_difference:
      return fd_laplacian_power(f, x, m, h);
    case LaplacianMethod::radial: {
      if (!f.is_radial()) throw NotRadial("radial Laplacian requested for a non-radial field");
      const RadialFn& phi = f.caps().radial;
      return radial_laplacian_power(phi, norm(x), f.dim().value(), m);
    }
  }
  throw InputError("unknown Laplacian method");
}

double laplacian_power(const ScalarField& f, std::span<const double> x, int m) {
  if (f.has_laplacian_chain(m)) return laplacian_power(f, x, m, LaplacianMethod::analytic);
  if (f.is_radial()) return laplacian_power(f, x, m, LaplacianMethod::radial);
  return laplacian_power(f, x, m, LaplacianMethod::finite_difference);
}

std::vector<double> gradient(const ScalarField& f, std::span<const double> x) {
  check_point(f, x);
  const int n = f.dim().value();
  std::vector<double> g(n, 0.0);
  if (f.caps().gradient) {
    f.caps().gradient(x, g);
    return g;
  }
  if (f.is_radial()) {
    const double r = norm(x);
    if (r == 0.0) return g;
    const RadialFn& phi = f.caps().radial;
    const double h = 1e-3 * std::max(r, 1.0);
    auto p = [&](double s) { return phi(std::abs(s)); };
    const double d = (8.0 * (p(r + h) - p(r - h)) - (p(r + 2 * h) - p(r - 2 * h))) / (12.0 * h);
    for (int k = 0; k < n; ++k) g[k] = d * x[k] / r;
    return g;
  }
  const double h = 1e-3 * (1.0 + norm(x));
  std::vector<double> y(x.begin(), x.end());
  for (int k = 0; k < n; ++k) {
    auto at = [&](double s) {
      y[k] = x[k] + s;
      const double v = f(y);
      y[k] = x[k];
      return v;
    };
    g[k] = (8.0 * (at(h) - at(-h)) - (at(2 * h) - at(-2 * h))) / (12.0 * h);
  }
  return g;
}

double q_density(const ScalarField& u, std::span<const double> x) {
  const int half = u.dim().half();
  const double sign = half % 2 == 0 ? 1.0 : -1.0;
  return sign * laplacian_power(u, x, half);
}

double q_curvature(const ScalarField& u, std::span<const double> x) {
  check_point(u, x);
  const int n = u.dim().value();
  const double nu = n * u(x);
  if (nu < -700.0) throw OverflowError("e^{-n u} overflows (n u = " + std::to_string(nu) + ")");
  return std::exp(-nu) * q_density(u, x);
}

double scalar_curvature(const ScalarField& u, std::span<const double> x) {
  check_point(u, x);
  const int n = u.dim().value();
  if (n == 2) throw DimensionError("scalar curvature is used for n >= 4; for n = 2 use q_curvature");
  const double two_u = 2.0 * u(x);
  if (two_u < -700.0) throw OverflowError("e^{-2u} overflows (2u = " + std::to_string(two_u) + ")");
  const double lap = laplacian_power(u, x, 1);
  const auto g = gradient(u, x);
  double g2 = 0.0;
  for (double c : g) g2 += c * c;
  return 2.0 * (n - 1) * std::exp(-two_u) * (-lap - 0.5 * (n - 2) * g2);
}

double scalar_negative_part_density(const ScalarField& u, std::span<const double> x) {
  check_point(u, x);
  const int n = u.dim().value();
  if (n == 2) throw DimensionError("scalar curvature criterion is stated for n >= 4");
  const double lap = laplacian_power(u, x, 1);
  const auto g = gradient(u, x);
  double g2 = 0.0;
  for (double c : g) g2 += c * c;
  return 2.0 * (n - 1) * std::max(0.0, lap + 0.5 * (n - 2) * g2);
}

CurvatureReport curvature_report(const ScalarField& u, std::span<const double> x) {
  CurvatureReport rep;
  rep.point.assign(x.begin(), x.end());
  rep.q_value = q_curvature(u, x);
  if (u.dim().value() >= 4) rep.scalar_value = scalar_curvature(u, x);
  return rep;
}

PizzettiCoefficients pizzetti_coeffs(Dimension dim, int m) {
  if (m < 1) throw InputError("Pizzetti order must be positive");
  const int n = dim.value();
  PizzettiCoefficients pc;
  pc.n = n;
  pc.m = m;
  for (int i = 0; i < m; ++i) {
    // mean_{B_R} |y|^{2i} = n/(n+2i) R^{2i} (exact radial integral) and only
    // the i-th term of the expansion survives at the center:
    // Delta^i |y|^{2i} = prod_{k<i} (2i-2k)(2i-2k+n-2).
    double K = 1.0;
    for (int k = 0; k < i; ++k) K *= (2.0 * i - 2 * k) * (2.0 * i - 2 * k + n - 2);
    pc.c.push_back(static_cast<double>(n) / ((n + 2.0 * i) * K));
  }
  return pc;
}

namespace {

const quad::AngularRule& cached_rule(int n, int order) {
  static std::mutex mu;
  static std::map<std::pair<int, int>, std::unique_ptr<quad::AngularRule>> cache;
  std::lock_guard<std::mutex> lock(mu);
  auto& slot = cache[{n, order}];
  if (!slot) slot = std::make_unique<quad::AngularRule>(quad::AngularRule::make(n, order));
  return *slot;
}

}  // namespace

double ball_mean(const ScalarField& f, std::span<const double> center, double R, double rel_tol) {
  check_point(f, center);
  if (!(R > 0.0)) throw InputError("ball radius must be positive");
  const int n = f.dim().value();
  quad::Tolerance tol{rel_tol * 1e-2, 1e-300, 400};
  const double scale = n / std::pow(R, n);
  if (f.is_radial()) return radial_ball_mean(f.caps().radial, n, norm(center), R, rel_tol);
  const std::vector<int> orders = n == 2 ? std::vector<int>{16, 32, 64} : (n == 4 ? std::vector<int>{6, 12} : std::vector<int>{4, 8});
  double prev = 0.0;
  double fmax = 0.0;
  for (std::size_t i = 0; i < orders.size(); ++i) {
    const auto& rule = cached_rule(n, orders[i]);
    auto sphere = [&](double s) {
      auto g = [&](std::span<const double> y) {
        const double v = f(y);
        fmax = std::max(fmax, std::abs(v));
        return v;
      };
      return rule.sphere_mean(g, center, s) * std::pow(s, n - 1);
    };
    auto res = quad::integrate(sphere, 0.0, R, tol);
    const double value = scale * res.value;
    if (i > 0 && std::abs(value - prev) <= rel_tol * std::abs(value) + 1e-13 * fmax) return value;
    prev = value;
  }
  throw QuadratureError("ball mean: angular refinement did not converge");
}

namespace {

// P(x_1 >= gamma) on S^{n-1} given x = (1 - gamma)/2; (1 + x_1)/2 is Beta((n-1)/2, (n-1)/2).
double cap_fraction(int n, double x) {
  if (x <= 0.0) return 0.0;
  if (x >= 1.0) return 1.0;
  const double a = 0.5 * (n - 1);
  return boost::math::ibeta(a, a, x);
}

}  // namespace

double sphere_fraction_in_ball(int n, double s, double d, double R) {
  if (s + d <= R) return 1.0;
  if (s == 0.0 || d == 0.0) return s <= R ? 1.0 : 0.0;
  // (1 - gamma)/2 with gamma = (s^2 + d^2 - R^2)/(2 s d), factored to avoid cancellation.
  return cap_fraction(n, (R - s + d) * (R + s - d) / (4.0 * s * d));
}

double radial_ball_mean(const RadialFn& phi, int n, double center_norm, double R, double rel_tol) {
  if (!(R > 0.0)) throw InputError("ball radius must be positive");
  const double d = center_norm;
  quad::Tolerance tol{rel_tol * 1e-2, 1e-300, 400};
  double total = 0.0;
  bool converged = true;
  if (d < R) {
    // Spheres |y| = s <= R - d lie entirely inside the ball.
    auto res = quad::integrate([&](double s) { return phi(s) * std::pow(s, n - 1); }, 0.0, R - d, tol);
    total += res.value;
    converged = res.converged;
  }
  if (d > 0.0) {
    // Partial spheres, s = c - h cos(psi): the substitution absorbs the square-root
    // behaviour of the cap fraction at both ends.
    const double h = std::min(R, d);
    const double c = std::abs(R - d) + h;
    auto integrand = [&](double psi) {
      const double sn = std::sin(0.5 * psi), cs = std::cos(0.5 * psi);
      const double s = c - h * std::cos(psi);
      if (s <= 0.0) return 0.0;
      const double near_outer = 2.0 * h * cs * cs;  // R + d - s
      const double near_inner = d >= R ? 2.0 * h * sn * sn : R + s - d;
      const double frac = cap_fraction(n, near_outer * near_inner / (4.0 * s * d));
      return phi(s) * std::pow(s, n - 1) * frac * h * std::sin(psi);
    };
    auto res = quad::integrate(integrand, 0.0, std::numbers::pi, tol);
    total += res.value;
    converged = converged && res.converged;
  }
  if (!converged) throw QuadratureError("radial ball mean did not converge");
  return n / std::pow(R, n) * total;
}

int polyharmonic_order(const Polynomial& p) {
  int m = 0;
  Polynomial q = p;
  while (!q.is_zero()) {
    q = apply_laplacian_poly(q, 1);
    ++m;
  }
  return m;
}

double pizzetti_check(const Polynomial& p, std::span<const double> center, double R) {
  const int m = polyharmonic_order(p);
  if (m == 0) return 0.0;
  const auto pc = pizzetti_coeffs(p.dim(), m);
  const double lhs = polynomial_ball_mean(p, center, R);
  double rhs = 0.0;
  Polynomial q = p;
  for (int i = 0; i < m; ++i) {
    rhs += pc.c[i] * std::pow(R, 2 * i) * q(center);
    q = apply_laplacian_poly(q, 1);
  }
  return std::abs(lhs - rhs);
}

// ---------------------------------------------------------------------------
// RationalRadial

RationalRadial RationalRadial::log_term(double lambda) {
  RationalRadial r;
  r.log_coeff_ = lambda;
  return r;
}

RationalRadial RationalRadial::constant(double c) {
  RationalRadial r;
  r.add(0, 0, c);
  return r;
}

void RationalRadial::add(int j, int k, double c) {
  if (j < 0) throw InputError("negative power of r^2 in a rational radial term");
  if (c == 0.0) return;
  terms_[{j, k}] += c;
  normalize();
}

void RationalRadial::normalize() {
  // s^j = ((1+s) - 1)^j.
  std::map<int, std::pair<double, double>> acc;  // power -> (sum, sum of magnitudes)
  for (const auto& [jk, c] : terms_) {
    const auto [j, k] = jk;
    double binom = 1.0;
    for (int i = 0; i <= j; ++i) {
      const double v = c * binom * ((j - i) % 2 == 0 ? 1.0 : -1.0);
      auto& slot = acc[k - i];
      slot.first += v;
      slot.second += std::abs(v);
      binom = binom * (j - i) / (i + 1);
    }
  }
  decay_terms_.clear();
  for (const auto& [k, sums] : acc) {
    if (std::abs(sums.first) > 1e-13 * sums.second) decay_terms_.emplace_back(k, sums.first);
  }
}

namespace {

// log(1 + r^2) for any finite r.
double log1p_sq(double r) {
  r = std::abs(r);
  if (r > 1e100) return 2.0 * std::log(r);
  return std::log1p(r * r);
}

// r^{2j} (1+r^2)^{-k} without overflow at large r.
double term_value(int j, int k, double r) {
  const double lt = log1p_sq(r);
  if (j == 0) return std::exp(-k * lt);
  if (r == 0.0) return 0.0;
  // s/(1+s) = 1/(1 + r^-2).
  return std::exp(-j * log1p_sq(1.0 / r) + (j - k) * lt);
}

}  // namespace

double RationalRadial::value(double r) const {
  const double lt = log1p_sq(r);
  double v = log_coeff_ * lt;
  for (const auto& [k, b] : decay_terms_) v += b * std::exp(-k * lt);
  return v;
}

double RationalRadial::weighted_value(double t, int n) const {
  // log(1 + e^{2t}).
  const double lt = t > 0.0 ? 2.0 * t + std::log1p(std::exp(-2.0 * t)) : std::log1p(std::exp(2.0 * t));
  double v = 0.0;
  if (log_coeff_ != 0.0) v += log_coeff_ * lt * std::exp(n * t);
  for (const auto& [k, b] : decay_terms_) v += b * std::exp(n * t - k * lt);
  return v;
}

double RationalRadial::derivative(double r) const {
  // d/dr = 2r d/ds.
  double v = log_coeff_ * term_value(0, 1, r);
  for (const auto& [jk, c] : terms_) {
    const auto [j, k] = jk;
    if (j > 0) v += c * j * term_value(j - 1, k, r);
    v -= c * k * term_value(j, k + 1, r);
  }
  return 2.0 * r * v;
}

RationalRadial RationalRadial::laplacian(int n) const {
  RationalRadial out;
  // Delta log(1+s) = 2n (1+s)^{-2} + 2(n-2) s (1+s)^{-2}.
  out.add(0, 2, 2.0 * n * log_coeff_);
  out.add(1, 2, 2.0 * (n - 2) * log_coeff_);
  for (const auto& [jk, c] : terms_) {
    const auto [j, k] = jk;
    if (j > 0) out.add(j - 1, k, c * (4.0 * j * (j - 1) + 2.0 * n * j));
    out.add(j, k + 1, -c * (8.0 * j * k + 2.0 * n * k));
    out.add(j + 1, k + 2, c * 4.0 * k * (k + 1));
  }
  return out;
}

RationalRadial RationalRadial::operator+(const RationalRadial& o) const {
  RationalRadial out = *this;
  out.log_coeff_ += o.log_coeff_;
  for (const auto& [jk, c] : o.terms_) out.add(jk.first, jk.second, c);
  return out;
}

RationalRadial RationalRadial::operator*(double s) const {
  RationalRadial out;
  out.log_coeff_ = log_coeff_ * s;
  for (const auto& [jk, c] : terms_) out.add(jk.first, jk.second, c * s);
  return out;
}

}  // namespace qflat
