#include "qflat/quadrature.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <queue>

#include <boost/math/quadrature/gauss.hpp>
#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/math/special_functions/legendre.hpp>
#include <Eigen/Dense>

namespace qflat::quad {

namespace {

struct Piece {
  double a, b, value, error, l1;
  bool operator<(const Piece& o) const { return error < o.error; }
};

Piece gk15(const Fn1& f, double a, double b) {
  using GK = boost::math::quadrature::gauss_kronrod<double, 15>;
  using G = boost::math::quadrature::gauss<double, 7>;
  static const auto& xk = GK::abscissa();
  static const auto& wk = GK::weights();
  static const auto& wg = G::weights();
  const double c = 0.5 * (a + b);
  const double h = 0.5 * (b - a);
  // Abscissae are stored for x >= 0; odd indices of the Kronrod set are the Gauss nodes.
  const double fc = f(c);
  double k = fc * wk[0];
  double g = fc * wg[0];
  double l1 = std::abs(fc) * wk[0];
  for (std::size_t i = 1; i < xk.size(); ++i) {
    const double dx = h * xk[i];
    const double f1 = f(c - dx);
    const double f2 = f(c + dx);
    k += (f1 + f2) * wk[i];
    l1 += (std::abs(f1) + std::abs(f2)) * wk[i];
    if (i % 2 == 0) g += (f1 + f2) * wg[i / 2];
  }
  Piece p{a, b, k * h, std::abs((k - g) * h), l1 * std::abs(h)};
  if (!std::isfinite(p.value)) throw QuadratureError("non-finite integrand value during quadrature");
  return p;
}

}  // namespace

Result integrate(const Fn1& f, double a, double b, Tolerance tol) {
  Result res;
  if (a == b) return res;
  std::priority_queue<Piece> heap;
  Piece first = gk15(f, a, b);
  double value = first.value, error = first.error, l1 = first.l1;
  heap.push(first);
  long evals = 15;
  int intervals = 1;
  while (error > std::max(tol.abs, tol.rel * l1) && intervals < tol.max_intervals) {
    Piece worst = heap.top();
    heap.pop();
    const double mid = 0.5 * (worst.a + worst.b);
    if (!(mid > std::min(worst.a, worst.b) && mid < std::max(worst.a, worst.b))) {
      heap.push(worst);
      break;  // interval can no longer be split
    }
    Piece left = gk15(f, worst.a, mid);
    Piece right = gk15(f, mid, worst.b);
    evals += 30;
    ++intervals;
    value += left.value + right.value - worst.value;
    error += left.error + right.error - worst.error;
    l1 += left.l1 + right.l1 - worst.l1;
    heap.push(left);
    heap.push(right);
  }
  // Resum to shed accumulated rounding from the incremental updates.
  value = 0.0;
  error = 0.0;
  l1 = 0.0;
  while (!heap.empty()) {
    value += heap.top().value;
    error += heap.top().error;
    l1 += heap.top().l1;
    heap.pop();
  }
  res.value = value;
  res.error = error;
  res.l1 = l1;
  res.evaluations = evals;
  res.converged = error <= std::max(tol.abs, tol.rel * l1) * 10.0;
  return res;
}

GaussRule GaussRule::legendre(int order) {
  if (order < 1) throw InputError("Gauss-Legendre order must be positive");
  GaussRule rule;
  const auto zeros = boost::math::legendre_p_zeros<double>(order);  // nonnegative zeros
  for (double z : zeros) {
    const double d = boost::math::legendre_p_prime(order, z);
    const double w = 2.0 / ((1.0 - z * z) * d * d);
    if (z == 0.0) {
      rule.nodes.push_back(0.0);
      rule.weights.push_back(w);
    } else {
      rule.nodes.push_back(-z);
      rule.weights.push_back(w);
      rule.nodes.push_back(z);
      rule.weights.push_back(w);
    }
  }
  return rule;
}

AngularRule AngularRule::make(int n, int order) {
  if (n < 2) throw DimensionError("angular rule needs n >= 2");
  if (order < 1) throw InputError("angular rule order must be positive");
  AngularRule rule;
  rule.n_ = n;
  if (n == 2) {
    const int m = 2 * order;
    for (int i = 0; i < m; ++i) {
      const double phi = 2.0 * std::numbers::pi * (i + 0.5) / m;
      rule.nodes_.push_back(std::cos(phi));
      rule.nodes_.push_back(std::sin(phi));
      rule.weights_.push_back(1.0 / m);
    }
    return rule;
  }
  // S^{n-1}: x_1 = c, rest = sqrt(1 - c^2) * omega', with density
  // (1 - c^2)^{(n-3)/2} on [-1, 1]: Gauss-Gegenbauer nodes from the Jacobi matrix.
  const AngularRule lower = make(n - 1, order);
  const double lambda = 0.5 * (n - 2);
  Eigen::MatrixXd jac = Eigen::MatrixXd::Zero(order, order);
  for (int k = 1; k < order; ++k) {
    const double b = std::sqrt(k * (k + 2.0 * lambda - 1.0) / (4.0 * (k + lambda) * (k + lambda - 1.0)));
    jac(k, k - 1) = b;
    jac(k - 1, k) = b;
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(jac);
  double total = 0.0;
  for (int i = 0; i < order; ++i) {
    const double c = eig.eigenvalues()(i);
    const double s = std::sqrt(std::max(0.0, 1.0 - c * c));
    const double w = eig.eigenvectors()(0, i) * eig.eigenvectors()(0, i);
    for (std::size_t j = 0; j < lower.size(); ++j) {
      rule.nodes_.push_back(c);
      for (double x : lower.node(j)) rule.nodes_.push_back(s * x);
      rule.weights_.push_back(w * lower.weight(j));
      total += w * lower.weight(j);
    }
  }
  for (auto& w : rule.weights_) w /= total;
  return rule;
}

double AngularRule::sphere_mean(const std::function<double(std::span<const double>)>& f,
                                std::span<const double> center, double rho) const {
  std::vector<double> x(n_);
  double acc = 0.0;
  for (std::size_t i = 0; i < weights_.size(); ++i) {
    const double* v = nodes_.data() + i * n_;
    for (int k = 0; k < n_; ++k) x[k] = center[k] + rho * v[k];
    acc += weights_[i] * f(x);
  }
  return acc;
}

const char* to_string(Convergence c) {
  switch (c) {
    case Convergence::convergent:
      return "convergent";
    case Convergence::divergent:
      return "divergent";
    case Convergence::inconclusive:
      return "inconclusive";
  }
  return "inconclusive";
}

namespace {

Fn1 t_integrand(const RadialIntegrand& f) {
  if (f.in_t) return f.in_t;
  Fn1 in_r = f.in_r;
  return [in_r](double t) {
    const double r = std::exp(t);
    return r * in_r(r);
  };
}

// Integrates over [a, b] in the given variable, splitting at cut points and
// into pieces no wider than max_width.
Result integrate_split(const Fn1& f, double a, double b, std::vector<double> cuts, double max_width,
                       Tolerance tol) {
  Result total;
  if (!(b > a)) return total;
  std::vector<double> pts{a};
  std::sort(cuts.begin(), cuts.end());
  for (double c : cuts) {
    if (c > a && c < b) pts.push_back(c);
  }
  pts.push_back(b);
  for (std::size_t i = 0; i + 1 < pts.size(); ++i) {
    const double lo = pts[i], hi = pts[i + 1];
    const int pieces = std::max(1, static_cast<int>(std::ceil((hi - lo) / max_width)));
    for (int k = 0; k < pieces; ++k) {
      const double p0 = lo + (hi - lo) * k / pieces;
      const double p1 = (k + 1 == pieces) ? hi : lo + (hi - lo) * (k + 1) / pieces;
      Result r = integrate(f, p0, p1, tol);
      total.value += r.value;
      total.error += r.error;
      total.l1 += r.l1;
      total.evaluations += r.evaluations;
      total.converged = total.converged && r.converged;
    }
  }
  return total;
}

std::vector<double> log_cuts(std::span<const double> radii) {
  std::vector<double> out;
  for (double r : radii) {
    if (r > 0.0) out.push_back(std::log(r));
  }
  return out;
}

}  // namespace

Result integrate_radial_range(const RadialIntegrand& f, double r0, double r1, Tolerance tol,
                              std::span<const double> breakpoints) {
  Result total;
  if (!(r1 > r0)) return total;
  if (r0 < 1.0) {
    std::vector<double> cuts(breakpoints.begin(), breakpoints.end());
    Result core = integrate_split(f.in_r, r0, std::min(1.0, r1), cuts, 1.0, tol);
    total = core;
  }
  if (r1 > 1.0) {
    const double t0 = std::log(std::max(1.0, r0));
    const double t1 = std::log(r1);
    Result outer = integrate_split(t_integrand(f), t0, t1, log_cuts(breakpoints), 1.0, tol);
    total.value += outer.value;
    total.error += outer.error;
    total.l1 += outer.l1;
    total.evaluations += outer.evaluations;
    total.converged = total.converged && outer.converged;
  }
  return total;
}

TailResult integrate_radial_tail(const RadialIntegrand& f, double r0, const TailOptions& opts) {
  TailResult out;
  double core = 0.0;
  if (r0 < 1.0) {
    Result c = integrate_split(f.in_r, std::max(r0, 0.0), 1.0, opts.breakpoints, 1.0, opts.tol);
    core = c.value;
    out.l1 += c.l1;
    out.quadrature_converged = c.converged;
  }
  const Fn1 g = t_integrand(f);
  std::vector<double> running_l1;
  const auto cuts = log_cuts(opts.breakpoints);
  double t = r0 > 1.0 ? std::log(r0) : 0.0;
  double next = 1.0;
  while (next <= t) next *= 2.0;
  while (next <= opts.t_cap) {
    Result s;
    try {
      s = integrate_split(g, t, next, cuts, 2.0, opts.tol);
    } catch (const NumericError&) {
      // Formulas like (1+r^2)^-4 overflow long before the integrand matters;
      // judge the segments computed so far.
      if (next <= 32.0) throw;
      out.truncated_at = t;
      break;
    }
    out.segments.push_back(s.value);
    out.l1 += s.l1;
    running_l1.push_back(out.l1);
    out.quadrature_converged = out.quadrature_converged && s.converged;
    t = next;
    next *= 2.0;
  }
  double partial = core;
  for (double s : out.segments) partial += s;
  out.partial = partial;
  out.value = partial;

  for (std::size_t k = 0; k + 1 < out.segments.size(); ++k) {
    // A segment counts as zero when negligible against everything integrated so far.
    const double tiny = 1e-15 * std::max(running_l1[k + 1], std::numeric_limits<double>::min());
    const double a = std::abs(out.segments[k]);
    const double b = std::abs(out.segments[k + 1]);
    double q;
    if (b <= tiny) {
      q = 0.0;
    } else if (a <= tiny) {
      q = std::numeric_limits<double>::infinity();
    } else {
      q = b / a;
    }
    out.ratios.push_back(q);
  }
  const int need = opts.ratios_checked;
  if (static_cast<int>(out.ratios.size()) < need) {
    out.status = Convergence::inconclusive;
    return out;
  }
  const auto last = std::span<const double>(out.ratios).last(need);
  const bool decays = std::all_of(last.begin(), last.end(), [&](double q) { return q <= opts.ratio_bound; });
  const bool grows = std::all_of(last.begin(), last.end(), [](double q) { return q >= 1.0 - 1e-9; });
  if (decays) {
    out.status = Convergence::convergent;
    const double q = last.back();
    out.tail = q > 0.0 ? out.segments.back() * q / (1.0 - q) : 0.0;
    out.value = partial + out.tail;
  } else if (grows) {
    out.status = Convergence::divergent;
  } else {
    out.status = Convergence::inconclusive;
  }
  return out;
}

}  // namespace qflat::quad
