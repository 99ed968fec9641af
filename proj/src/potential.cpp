#include "qflat/potential.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <random>

#include "qflat/calculus.hpp"
#include "qflat/polynomial.hpp"

namespace qflat {

namespace {

// c_j = a_j / (4 j a_0), j = 1..(n-2)/2, for sin^{n-2} t = sum_j a_j cos(2 j t).
const std::vector<double>& kernel_coefficients(int n) {
  static std::mutex mu;
  static std::map<int, std::vector<double>> cache;
  std::lock_guard<std::mutex> lock(mu);
  auto it = cache.find(n);
  if (it != cache.end()) return it->second;
  const int p = n - 2;
  std::vector<double> c;
  const double a0 = std::ldexp(static_cast<double>(binomial(p, p / 2)), -p);
  for (int j = 1; j <= p / 2; ++j) {
    const double aj = std::ldexp(static_cast<double>(binomial(p, p / 2 - j)), 1 - p) * (j % 2 ? -1.0 : 1.0);
    c.push_back(aj / (4.0 * j * a0));
  }
  return cache.emplace(n, std::move(c)).first->second;
}

// Mean of f over the sphere |y - center| = rho. Polar coordinates with the pole
// pointing back at the origin: when |center| is large the mass of f is seen in
// a narrow cap around that pole, so the polar angle is integrated adaptively on
// pieces graded toward it, and the small spheres of latitude by a fixed rule.
double sphere_mean_about(const ScalarField& f, std::span<const double> center, double rho, double rel_tol) {
  const int n = f.dim().value();
  const double cn = norm(center);
  std::vector<double> pole(n, 0.0);
  if (cn > 0.0) {
    for (int i = 0; i < n; ++i) pole[i] = -center[i] / cn;
  } else {
    pole[0] = 1.0;
  }
  // Orthonormal basis of the complement by Gram-Schmidt on the standard basis.
  std::vector<std::vector<double>> basis{pole};
  for (int k = 0; k < n && static_cast<int>(basis.size()) < n; ++k) {
    std::vector<double> v(n, 0.0);
    v[k] = 1.0;
    for (const auto& b : basis) {
      double d = 0.0;
      for (int i = 0; i < n; ++i) d += v[i] * b[i];
      for (int i = 0; i < n; ++i) v[i] -= d * b[i];
    }
    const double vn = norm(v);
    if (vn < 1e-8) continue;
    for (auto& c : v) c /= vn;
    basis.push_back(std::move(v));
  }
  static std::mutex mu;
  static std::map<int, std::shared_ptr<quad::AngularRule>> rules;
  std::shared_ptr<quad::AngularRule> lower;
  if (n > 2) {
    std::lock_guard<std::mutex> lock(mu);
    auto& slot = rules[n - 1];
    if (!slot) slot = std::make_shared<quad::AngularRule>(quad::AngularRule::make(n - 1, n == 3 ? 16 : 5));
    lower = slot;
  }
  std::vector<double> y(n);
  auto latitude_mean = [&](double th) {
    const double c = rho * std::cos(th), sn = rho * std::sin(th);
    if (n == 2) {
      double acc = 0.0;
      for (double sign : {1.0, -1.0}) {
        for (int i = 0; i < n; ++i) y[i] = center[i] + c * pole[i] + sign * sn * basis[1][i];
        acc += f(y);
      }
      return 0.5 * acc;
    }
    double acc = 0.0;
    for (std::size_t j = 0; j < lower->size(); ++j) {
      const auto w = lower->node(j);
      for (int i = 0; i < n; ++i) {
        double v = center[i] + c * pole[i];
        for (int k = 1; k < n; ++k) v += sn * w[k - 1] * basis[k][i];
        y[i] = v;
      }
      acc += lower->weight(j) * f(y);
    }
    return acc;
  };
  auto integrand = [&](double th) {
    const double m = latitude_mean(th);
    return n == 2 ? m : std::pow(std::sin(th), n - 2) * m;
  };
  std::vector<double> cuts{std::numbers::pi};
  // The cap holding the mass near the origin has angular size ~ 1 / min(|c|, rho).
  const double reach = std::min(cn, rho);
  const int grading = reach > 0.0 ? static_cast<int>(std::ceil(std::log2(2.0 + reach))) + 2 : 1;
  for (int k = 1; k <= grading; ++k) cuts.push_back(std::numbers::pi * std::ldexp(1.0, -k));
  cuts.push_back(0.0);
  double total = 0.0;
  for (std::size_t k = 0; k + 1 < cuts.size(); ++k) {
    total += quad::integrate(integrand, cuts[k + 1], cuts[k], {rel_tol, 1e-300, 200}).value;
  }
  const double norm_const = std::sqrt(std::numbers::pi) * std::tgamma(0.5 * (n - 1)) / std::tgamma(0.5 * n);
  return total / norm_const;
}

quad::RadialIntegrand radial_integrand(const ScalarField& f, const std::function<double(double, double)>& kernel) {
  const int n = f.dim().value();
  const RadialFn phi = f.caps().radial;
  const RadialFn weighted = f.caps().weighted_radial;
  quad::RadialIntegrand in;
  // kernel(s, log s) lets callers avoid recomputing logs.
  in.in_r = [=](double s) {
    if (s == 0.0) return 0.0;
    return kernel(s, std::log(s)) * phi(s) * std::pow(s, n - 1);
  };
  in.in_t = [=](double t) {
    const double s = std::exp(t);
    const double w = weighted ? weighted(t) : std::exp(n * t) * phi(s);
    if (w == 0.0) return 0.0;
    return kernel(s, t) * w;
  };
  return in;
}

}  // namespace

double angular_log_kernel(Dimension dim, double r, double s) {
  if (r < 0.0 || s < 0.0) throw InputError("kernel radii must be nonnegative");
  if (r == 0.0 && s == 0.0) throw InputError("kernel undefined at r = s = 0");
  const double R = std::max(r, s);
  const double rho = std::min(r, s) / R;
  const double rho2 = rho * rho;
  double v = std::log(R);
  double pw = 1.0;
  for (double c : kernel_coefficients(dim.value())) {
    pw *= rho2;
    v -= c * pw;
  }
  return v;
}

double angular_log_kernel_dr(Dimension dim, double r, double s) {
  if (!(r > 0.0)) return 0.0;
  const auto& c = kernel_coefficients(dim.value());
  double v = 0.0;
  if (r >= s) {
    const double q = (s / r) * (s / r);
    double pw = 1.0;
    v = 1.0 / r;
    for (std::size_t j = 1; j <= c.size(); ++j) {
      pw *= q;
      v += c[j - 1] * 2.0 * j * pw / r;
    }
  } else {
    const double q = (r / s) * (r / s);
    double pw = 1.0;
    for (std::size_t j = 1; j <= c.size(); ++j) {
      v -= c[j - 1] * 2.0 * j * pw * r / (s * s);
      pw *= q;
    }
  }
  return v;
}

double ball_log_kernel(Dimension dim, double d, double a) {
  if (!(a > 0.0) || d < 0.0) throw InputError("ball kernel needs a > 0 and d >= 0");
  const int n = dim.value();
  if (d == 0.0) return std::log(a) - 1.0 / n;
  const auto& c = kernel_coefficients(n);
  // n/a^n int_0^a rho^{n-1} k_n(rho, d) d rho, split at rho = d.
  const double m = std::min(a, d);
  const double log_d = std::log(d);
  double acc = std::pow(m, n) / n * log_d;
  for (std::size_t j = 1; j <= c.size(); ++j) {
    acc -= c[j - 1] * std::pow(m, n + 2.0 * j) / ((n + 2.0 * j) * std::pow(d, 2.0 * j));
  }
  if (a > d) {
    auto prim = [n](double rho) { return std::pow(rho, n) * (std::log(rho) / n - 1.0 / (n * n)); };
    acc += prim(a) - prim(d);
    for (std::size_t j = 1; j <= c.size(); ++j) {
      const double p = n - 2.0 * j;
      acc -= c[j - 1] * std::pow(d, 2.0 * j) * (std::pow(a, p) - std::pow(d, p)) / p;
    }
  }
  return n / std::pow(a, n) * acc;
}

double angular_log_kernel_quadrature(Dimension dim, double r, double s, int nodes) {
  if (r == 0.0 && s == 0.0) throw InputError("kernel undefined at r = s = 0");
  const int n = dim.value();
  const auto gl = quad::GaussRule::legendre(nodes);
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < gl.nodes.size(); ++i) {
    const double th = 0.5 * std::numbers::pi * (gl.nodes[i] + 1.0);
    const double w = gl.weights[i] * std::pow(std::sin(th), n - 2);
    const double d2 = r * r - 2.0 * r * s * std::cos(th) + s * s;
    num += w * 0.5 * std::log(d2);
    den += w;
  }
  return num / den;
}

// ---------------------------------------------------------------------------
// KernelTable

namespace {

constexpr char kMagic[8] = {'Q', 'F', 'L', 'K', 'T', 'B', 'L', '1'};
constexpr std::uint32_t kVersion = 1;

}  // namespace

KernelTable KernelTable::build(const Key& key) {
  if (!(key.r_min > 0.0 && key.r_max > key.r_min && key.nodes_per_decade >= 1)) {
    throw InputError("invalid kernel table grid");
  }
  const Dimension dim(key.n);
  KernelTable t;
  t.key_ = key;
  const int count = static_cast<int>(std::lround(std::log10(key.r_max / key.r_min) * key.nodes_per_decade)) + 1;
  for (int i = 0; i < count; ++i) t.nodes_.push_back(key.r_min * std::pow(10.0, static_cast<double>(i) / key.nodes_per_decade));
  t.values_.resize(t.nodes_.size() * t.nodes_.size());
  for (std::size_t i = 0; i < t.nodes_.size(); ++i) {
    for (std::size_t j = 0; j < t.nodes_.size(); ++j) {
      t.values_[i * t.nodes_.size() + j] = angular_log_kernel(dim, t.nodes_[i], t.nodes_[j]);
      if (std::abs(static_cast<double>(i) - static_cast<double>(j)) >= 0.25 * key.nodes_per_decade) {
        const double q = angular_log_kernel_quadrature(dim, t.nodes_[i], t.nodes_[j]);
        t.quadrature_gap_ = std::max(t.quadrature_gap_, std::abs(q - t.values_[i * t.nodes_.size() + j]));
      }
    }
  }
  return t;
}

void KernelTable::save(const std::string& path) const {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw InputError("cannot write kernel cache " + path);
  const std::int32_t n = key_.n, npd = key_.nodes_per_decade;
  const std::uint64_t count = nodes_.size();
  out.write(kMagic, sizeof kMagic);
  out.write(reinterpret_cast<const char*>(&kVersion), sizeof kVersion);
  out.write(reinterpret_cast<const char*>(&n), sizeof n);
  out.write(reinterpret_cast<const char*>(&key_.r_min), sizeof(double));
  out.write(reinterpret_cast<const char*>(&key_.r_max), sizeof(double));
  out.write(reinterpret_cast<const char*>(&npd), sizeof npd);
  out.write(reinterpret_cast<const char*>(&key_.tolerance), sizeof(double));
  out.write(reinterpret_cast<const char*>(&quadrature_gap_), sizeof(double));
  out.write(reinterpret_cast<const char*>(&count), sizeof count);
  out.write(reinterpret_cast<const char*>(nodes_.data()), static_cast<std::streamsize>(count * sizeof(double)));
  out.write(reinterpret_cast<const char*>(values_.data()), static_cast<std::streamsize>(values_.size() * sizeof(double)));
  if (!out) throw InputError("failed writing kernel cache " + path);
}

KernelTable KernelTable::load(const std::string& path, const Key& key) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open kernel cache " + path);
  char magic[8];
  std::uint32_t version = 0;
  std::int32_t n = 0, npd = 0;
  double r_min = 0, r_max = 0, tol = 0, gap = 0;
  std::uint64_t count = 0;
  in.read(magic, sizeof magic);
  in.read(reinterpret_cast<char*>(&version), sizeof version);
  in.read(reinterpret_cast<char*>(&n), sizeof n);
  in.read(reinterpret_cast<char*>(&r_min), sizeof r_min);
  in.read(reinterpret_cast<char*>(&r_max), sizeof r_max);
  in.read(reinterpret_cast<char*>(&npd), sizeof npd);
  in.read(reinterpret_cast<char*>(&tol), sizeof tol);
  in.read(reinterpret_cast<char*>(&gap), sizeof gap);
  in.read(reinterpret_cast<char*>(&count), sizeof count);
  if (!in || std::memcmp(magic, kMagic, sizeof magic) != 0) throw InputError("kernel cache " + path + ": bad header");
  if (version != kVersion) throw InputError("kernel cache " + path + ": unsupported version");
  const Key stored{n, r_min, r_max, npd, tol};
  if (!(stored == key)) throw InputError("kernel cache " + path + ": key does not match the requested table");
  const std::uint64_t expected =
      static_cast<std::uint64_t>(std::lround(std::log10(key.r_max / key.r_min) * key.nodes_per_decade)) + 1;
  if (count != expected) throw InputError("kernel cache " + path + ": node count mismatch");
  KernelTable t;
  t.key_ = key;
  t.quadrature_gap_ = gap;
  t.nodes_.resize(count);
  t.values_.resize(count * count);
  in.read(reinterpret_cast<char*>(t.nodes_.data()), static_cast<std::streamsize>(count * sizeof(double)));
  in.read(reinterpret_cast<char*>(t.values_.data()), static_cast<std::streamsize>(count * count * sizeof(double)));
  if (!in) throw InputError("kernel cache " + path + ": truncated");
  if (in.peek() != std::ifstream::traits_type::eof()) throw InputError("kernel cache " + path + ": trailing data");
  return t;
}

double KernelTable::lookup(double r, double s) const {
  const double R = std::max(r, s);
  if (!(R > 0.0)) throw InputError("kernel undefined at r = s = 0");
  // The part beyond log R depends on the ratio only; take it from row 0.
  const double d = std::log10(R / std::max(std::min(r, s), 1e-300)) * key_.nodes_per_decade;
  const std::size_t N = nodes_.size();
  auto ratio_part = [&](std::size_t k) { return at(0, k) - std::log(nodes_[k]); };
  if (d >= static_cast<double>(N - 1)) return std::log(R) + ratio_part(N - 1);
  const std::size_t k = static_cast<std::size_t>(std::floor(d));
  const double w = d - k;
  return std::log(R) + (1.0 - w) * ratio_part(k) + w * ratio_part(k + 1);
}

double KernelTable::symmetry_defect() const {
  double worst = 0.0;
  for (std::size_t i = 0; i < nodes_.size(); ++i) {
    for (std::size_t j = i + 1; j < nodes_.size(); ++j) worst = std::max(worst, std::abs(at(i, j) - at(j, i)));
  }
  return worst;
}

// ---------------------------------------------------------------------------
// PotentialEvaluator

PotentialEvaluator::PotentialEvaluator(Dimension dim, PotentialConfig config)
    : n_(dim.value()), config_(std::move(config)) {
  config_.table.n = n_;
  static std::mutex mu;
  static std::map<std::tuple<int, double, double, int, double>, std::shared_ptr<const KernelTable>> memo;
  const auto& k = config_.table;
  const auto id = std::make_tuple(k.n, k.r_min, k.r_max, k.nodes_per_decade, k.tolerance);
  std::lock_guard<std::mutex> lock(mu);
  if (config_.kernel_cache.empty()) {
    auto& slot = memo[id];
    if (!slot) slot = std::make_shared<const KernelTable>(KernelTable::build(k));
    table_ = slot;
    return;
  }
  if (std::filesystem::exists(config_.kernel_cache)) {
    table_ = std::make_shared<const KernelTable>(KernelTable::load(config_.kernel_cache, k));
  } else {
    auto t = std::make_shared<const KernelTable>(KernelTable::build(k));
    t->save(config_.kernel_cache);
    table_ = t;
  }
}

double PotentialEvaluator::radial_moment(const ScalarField& f, const std::function<double(double, double)>& kernel,
                                         std::vector<double> breakpoints) const {
  const auto& caps = f.caps();
  breakpoints.insert(breakpoints.end(), caps.breakpoints.begin(), caps.breakpoints.end());
  const auto in = radial_integrand(f, kernel);
  const quad::Tolerance tol{config_.rel_tol * 1e-2, 1e-300, config_.max_intervals};
  if (caps.support_radius) {
    auto res = quad::integrate_radial_range(in, 0.0, *caps.support_radius, tol, breakpoints);
    return res.value;
  }
  quad::TailOptions opts;
  opts.tol = tol;
  opts.breakpoints = breakpoints;
  auto res = quad::integrate_radial_tail(in, 0.0, opts);
  if (res.status != quad::Convergence::convergent) {
    throw NonIntegrable(std::string("radial integral tail is ") + quad::to_string(res.status));
  }
  return res.value;
}

double PotentialEvaluator::radial_value(const ScalarField& f, double r) const {
  if (!f.is_radial()) throw NotRadial("radial potential requested for a non-radial density");
  if (r == 0.0) return 0.0;
  const Dimension dim(n_);
  const auto sc = SphereConstants::of(dim);
  const double log_r = std::log(r);
  const auto& c = kernel_coefficients(n_);
  auto kernel = [&, log_r](double s, double log_s) {
    // log s - k_n(r, s), written to avoid cancellation of the log R terms.
    double v;
    double rho2;
    if (s < r) {
      v = log_s - log_r;
      rho2 = (s / r) * (s / r);
    } else {
      v = 0.0;
      rho2 = (r / s) * (r / s);
    }
    double pw = 1.0;
    for (double cj : c) {
      pw *= rho2;
      v += cj * pw;
    }
    return v;
  };
  return sc.green_constant * sc.unit_sphere_area * radial_moment(f, kernel, {r});
}

double PotentialEvaluator::radial_derivative(const ScalarField& f, double r) const {
  if (!f.is_radial()) throw NotRadial("radial potential requested for a non-radial density");
  if (r == 0.0) return 0.0;
  const Dimension dim(n_);
  const auto sc = SphereConstants::of(dim);
  auto kernel = [&](double s, double) { return -angular_log_kernel_dr(dim, r, s); };
  return sc.green_constant * sc.unit_sphere_area * radial_moment(f, kernel, {r});
}

double PotentialEvaluator::radial_laplacian(const ScalarField& f, double r) const {
  if (!f.is_radial()) throw NotRadial("radial potential requested for a non-radial density");
  if (n_ == 2) return -f.radial_value(r);
  if (n_ != 4) throw PreconditionError("closed-form potential Laplacian is available for n = 2 and 4");
  const auto sc = SphereConstants::of(Dimension(n_));
  // Delta_x log(1/|x-y|) = -(n-2) |x-y|^{-2}; in R^4 its sphere mean is -2 max(r, s)^{-2}.
  auto kernel = [&](double s, double) {
    const double m = std::max(r, s);
    return -2.0 / (m * m);
  };
  return sc.green_constant * sc.unit_sphere_area * radial_moment(f, kernel, {r});
}

double PotentialEvaluator::general_w(const ScalarField& f, std::span<const double> x) const {
  const int n = n_;
  const auto sc = SphereConstants::of(Dimension(n));
  const double eps = std::min(1.0, 1.0 / (1.0 + norm(x)));
  const double rel = config_.rel_tol * 1e-2;
  const quad::Tolerance tol{rel, 1e-300, config_.max_intervals};
  const double fx = f(x);
  auto mean = [&](double rho) { return sphere_mean_about(f, x, rho, rel); };
  // Inner ball, singularity subtracted: int_{B_eps} log|z| dz = omega_n eps^n (log eps - 1/n).
  auto inner = quad::integrate(
      [&](double rho) {
        if (rho == 0.0) return 0.0;
        return std::pow(rho, n - 1) * std::log(rho) * (mean(rho) - fx);
      },
      0.0, eps, tol);
  double w = sc.unit_sphere_area * inner.value + fx * sc.unit_ball_volume * std::pow(eps, n) * (std::log(eps) - 1.0 / n);

  return w + outer_integral(f, x, eps, [](double t) { return t; }, {});
}

// |S| int_{r0}^inf rho^{n-1} kernel(log rho) M_x(rho) d rho, M_x the sphere mean about x.
double PotentialEvaluator::outer_integral(const ScalarField& f, std::span<const double> x, double r0,
                                          const quad::Fn1& kernel, std::vector<double> breaks) const {
  const int n = n_;
  const auto sc = SphereConstants::of(Dimension(n));
  const double xn = norm(x);
  const double rel = config_.rel_tol * 1e-2;
  const quad::Tolerance tol{rel, 1e-300, config_.max_intervals};
  auto mean = [&](double rho) { return sphere_mean_about(f, x, rho, rel); };
  breaks.push_back(xn);
  for (double b : f.caps().breakpoints) {
    breaks.push_back(std::abs(xn - b));
    breaks.push_back(xn + b);
  }
  quad::RadialIntegrand outer;
  outer.in_r = [&](double rho) {
    if (rho == 0.0) return 0.0;
    return std::pow(rho, n - 1) * kernel(std::log(rho)) * mean(rho);
  };
  outer.in_t = [&](double t) {
    const double m = mean(std::exp(t));
    return m == 0.0 ? 0.0 : std::exp(n * t) * kernel(t) * m;
  };
  if (f.caps().support_radius) {
    const double top = xn + *f.caps().support_radius;
    if (top <= r0) return 0.0;
    std::vector<double> cuts;
    for (double b : breaks) {
      if (b > r0 && b < top) cuts.push_back(b);
    }
    return sc.unit_sphere_area * quad::integrate_radial_range(outer, r0, top, tol, cuts).value;
  }
  // Run the dyadic tail test in rho / L, L = 1 + |x|, so that mass near the
  // origin (at rho ~ |x|) falls in the first segments wherever x is.
  const double L = 1.0 + xn, log_L = std::log(L);
  quad::RadialIntegrand scaled;
  scaled.in_r = [&](double u) { return L * outer.in_r(L * u); };
  scaled.in_t = [&](double t) { return outer.in_t(t + log_L); };
  quad::TailOptions opts;
  opts.tol = tol;
  for (double b : breaks) opts.breakpoints.push_back(b / L);
  auto res = quad::integrate_radial_tail(scaled, r0 / L, opts);
  if (res.status != quad::Convergence::convergent) {
    throw NonIntegrable(std::string("potential integral tail is ") + quad::to_string(res.status));
  }
  return sc.unit_sphere_area * res.value;
}

std::vector<double> PotentialEvaluator::ball_means(const ScalarField& f, const std::vector<std::vector<double>>& centers,
                                                   double a) const {
  if (!(a > 0.0)) throw InputError("ball radius must be positive");
  const Dimension dim(n_);
  const auto sc = SphereConstants::of(dim);
  const double cf = log_moment(f);
  std::vector<double> out;
  for (const auto& c : centers) {
    if (static_cast<int>(c.size()) != n_) throw DimensionError("ball center has the wrong dimension");
    const double w = outer_integral(f, c, 0.0, [&](double t) { return ball_log_kernel(dim, std::exp(t), a); }, {a});
    out.push_back(cf - sc.green_constant * w);
  }
  return out;
}

double PotentialEvaluator::log_moment(const ScalarField& f) const {
  const auto sc = SphereConstants::of(Dimension(n_));
  if (f.is_radial()) {
    return sc.green_constant * sc.unit_sphere_area *
           radial_moment(f, [](double, double log_s) { return log_s; }, {});
  }
  const std::vector<double> origin(n_, 0.0);
  return sc.green_constant * general_w(f, origin);
}

double PotentialEvaluator::value(const ScalarField& f, std::span<const double> x) const {
  if (static_cast<int>(x.size()) != n_ || !(f.dim() == Dimension(n_))) {
    throw DimensionError("potential evaluated with mismatched dimensions");
  }
  const double xn = norm(x);
  if (xn == 0.0) return 0.0;
  if (f.is_radial()) return radial_value(f, xn);
  const auto sc = SphereConstants::of(Dimension(n_));
  return log_moment(f) - sc.green_constant * general_w(f, x);
}

ScalarField PotentialEvaluator::potential_field(const ScalarField& f) const {
  const Dimension dim(n_);
  if (!f.is_radial()) {
    const double cf = log_moment(f);
    const auto sc = SphereConstants::of(dim);
    PotentialEvaluator self = *this;
    return ScalarField(dim, [self, f, cf, g = sc.green_constant](std::span<const double> x) {
      if (norm(x) == 0.0) return 0.0;
      return cf - g * self.general_w(f, x);
    });
  }
  PotentialEvaluator self = *this;
  auto exact = [self, f](double r) { return self.radial_value(f, r); };
  // 64 nodes per decade miss 1e-9 on smooth potentials and the profile would
  // fall back to a quadrature per call.
  ProfileGrid grid;
  grid.nodes_per_decade = 128;
  auto profile = std::make_shared<RadialProfile>(RadialProfile::sample(exact, 1e-9, grid));
  FieldCaps caps;
  caps.is_radial = true;
  caps.radial = [profile](double r) { return (*profile)(r); };
  caps.gradient = [self, f](std::span<const double> x, std::span<double> g) {
    const double r = norm(x);
    const double d = r > 0.0 ? self.radial_derivative(f, r) / r : 0.0;
    for (std::size_t k = 0; k < x.size(); ++k) g[k] = d * x[k];
  };
  if (n_ == 2) {
    caps.laplacian_chain.push_back([f](std::span<const double> x) { return -f.radial_value(norm(x)); });
  } else if (n_ == 4) {
    caps.laplacian_chain.push_back([self, f](std::span<const double> x) { return self.radial_laplacian(f, norm(x)); });
    caps.laplacian_chain.push_back([f](std::span<const double> x) { return f.radial_value(norm(x)); });
  }
  return ScalarField(dim, [profile](std::span<const double> x) { return (*profile)(norm(x)); }, std::move(caps));
}

AlphaEstimate PotentialEvaluator::total_mass_alpha(const ScalarField& f) const {
  const auto sc = SphereConstants::of(Dimension(n_));
  AlphaEstimate est;
  est.method = "mass_integral";
  const quad::Tolerance tol{config_.rel_tol * 1e-2, 1e-300, config_.max_intervals};
  quad::RadialIntegrand in;
  std::vector<double> breaks = f.caps().breakpoints;
  if (f.is_radial()) {
    in = radial_integrand(f, [](double, double) { return 1.0; });
  } else {
    const std::vector<double> origin(n_, 0.0);
    const double rel = config_.rel_tol * 1e-2;
    in.in_r = [&, origin](double s) {
      if (s == 0.0) return 0.0;
      return std::pow(s, n_ - 1) * sphere_mean_about(f, origin, s, rel);
    };
    in.in_t = [&, origin](double t) {
      const double m = sphere_mean_about(f, origin, std::exp(t), rel);
      return m == 0.0 ? 0.0 : std::exp(n_ * t) * m;
    };
  }
  double integral;
  if (f.caps().support_radius) {
    integral = quad::integrate_radial_range(in, 0.0, *f.caps().support_radius, tol, breaks).value;
    est.window[1] = *f.caps().support_radius;
  } else {
    quad::TailOptions opts;
    opts.tol = tol;
    opts.breakpoints = breaks;
    auto res = quad::integrate_radial_tail(in, 0.0, opts);
    est.tail = res.status;
    if (res.status != quad::Convergence::convergent) {
      throw NonIntegrable(std::string("density tail sums fail the ratio test (") + quad::to_string(res.status) + ")");
    }
    integral = res.value;
    est.window[1] = std::exp(opts.t_cap);
    est.residual = std::abs(res.tail);
  }
  est.alpha_hat = sc.green_constant * sc.unit_sphere_area * integral;
  est.residual *= sc.green_constant * sc.unit_sphere_area;
  return est;
}

double log_potential(const ScalarField& f, std::span<const double> x) {
  return PotentialEvaluator(f.dim()).value(f, x);
}

AlphaEstimate total_mass_alpha(const ScalarField& f) { return PotentialEvaluator(f.dim()).total_mass_alpha(f); }

LineFit fit_line(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size() || x.size() < 2) throw InputError("line fit needs at least two points");
  const double N = static_cast<double>(x.size());
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= N;
  my /= N;
  double sxx = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
  }
  if (!(sxx > 0.0)) throw InputError("line fit needs distinct abscissae");
  LineFit fit;
  fit.slope = sxy / sxx;
  fit.intercept = my - fit.slope * mx;
  double rss = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double e = y[i] - fit.intercept - fit.slope * x[i];
    rss += e * e;
  }
  fit.residual = std::sqrt(rss / N);
  return fit;
}

AlphaEstimate potential_asymptote(const PotentialEvaluator& ev, const ScalarField& f, const std::vector<double>& radii) {
  if (radii.size() < 3) throw InputError("asymptote fit needs at least three radii");
  const auto [lo, hi] = std::minmax_element(radii.begin(), radii.end());
  if (!(*lo > 0.0) || *hi / *lo < 100.0 * (1.0 - 1e-12)) throw InputError("asymptote window must span two decades");
  const int n = ev.dim().value();
  std::vector<double> rs = radii;
  std::sort(rs.begin(), rs.end());
  std::vector<double> xs, ys;
  if (f.is_radial()) {
    const ScalarField pot = ev.potential_field(f);
    const RadialFn phi = pot.caps().radial;
    for (double R : rs) {
      xs.push_back(std::log(R));
      ys.push_back(radial_ball_mean(phi, n, R, 1.0, ev.config().rel_tol));
    }
  } else {
    std::vector<std::vector<double>> centers;
    for (double R : rs) {
      std::vector<double> c(n, 0.0);
      c[0] = R;
      centers.push_back(std::move(c));
      xs.push_back(std::log(R));
    }
    ys = ev.ball_means(f, centers, 1.0);
  }
  const auto fit = fit_line(xs, ys);
  AlphaEstimate est;
  est.method = "asymptote_fit";
  est.alpha_hat = -fit.slope;
  est.window[0] = *lo;
  est.window[1] = *hi;
  est.residual = fit.residual;
  const std::size_t third = xs.size() / 3;
  if (third >= 2) {
    std::vector<double> hx(xs.begin(), xs.begin() + third), hy(ys.begin(), ys.begin() + third);
    std::vector<double> tx(xs.end() - third, xs.end()), ty(ys.end() - third, ys.end());
    est.alpha_head = -fit_line(hx, hy).slope;
    est.alpha_tail = -fit_line(tx, ty).slope;
  }
  return est;
}

AlphaEstimate potential_asymptote(const ScalarField& f, const std::vector<double>& radii) {
  return potential_asymptote(PotentialEvaluator(f.dim()), f, radii);
}

MarginStats potential_bound_check(const PotentialEvaluator& ev, const ScalarField& f, PartSign sign,
                                  const std::vector<double>& radii, std::optional<double> part_support) {
  const int n = ev.dim().value();
  if (!part_support) part_support = f.caps().support_radius;
  if (!part_support) {
    throw PreconditionError(std::string("the ") + (sign == PartSign::plus ? "positive" : "negative") +
                            " part of the density needs a known support radius");
  }
  std::mt19937_64 rng(0xb0b0ULL);
  std::normal_distribution<double> gauss;
  std::uniform_real_distribution<double> scale(1.0, 10.0);
  for (int i = 0; i < 200; ++i) {
    std::vector<double> x(n);
    double s = 0.0;
    for (auto& c : x) {
      c = gauss(rng);
      s += c * c;
    }
    const double r = *part_support * scale(rng) * (1.0 + 1e-9) / std::sqrt(s);
    for (auto& c : x) c *= r;
    const double v = f(x);
    if ((sign == PartSign::plus && v > 0.0) || (sign == PartSign::minus && v < 0.0)) {
      throw PreconditionError("designated part of the density is not supported in the stated ball");
    }
  }
  MarginStats st;
  st.alpha = ev.total_mass_alpha(f).alpha_hat;
  st.max = -std::numeric_limits<double>::infinity();
  st.min = std::numeric_limits<double>::infinity();
  const ScalarField pot = ev.potential_field(f);
  const int dirs = f.is_radial() ? 1 : 4;
  double sum = 0.0;
  for (double R : radii) {
    for (int d = 0; d < dirs; ++d) {
      std::vector<double> x(n, 0.0);
      const double a = 2.0 * std::numbers::pi * d / dirs;
      x[0] = R * std::cos(a);
      x[1] = R * std::sin(a);
      const double v = pot(x) + st.alpha * std::log(R);
      st.max = std::max(st.max, v);
      st.min = std::min(st.min, v);
      sum += v;
      ++st.samples;
    }
  }
  st.mean = st.samples ? sum / st.samples : 0.0;
  st.margin = sign == PartSign::plus ? st.max : st.min;
  return st;
}

}  // namespace qflat
