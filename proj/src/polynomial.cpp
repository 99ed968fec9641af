#include "qflat/polynomial.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <random>
#include <sstream>

namespace qflat {

namespace {

void check_dim(int a, int b) {
  if (a != b) throw DimensionError("polynomials live in different dimensions");
}

double double_factorial_odd(int k) {  // (k-1)!! for even k >= 0
  double v = 1.0;
  for (int j = k - 1; j > 1; j -= 2) v *= j;
  return v;
}

}  // namespace

Polynomial Polynomial::constant(Dimension dim, double c) {
  Polynomial p(dim);
  p.add_term(MultiIndex(dim.value(), 0), c);
  return p;
}

Polynomial Polynomial::monomial(Dimension dim, MultiIndex alpha, double c) {
  if (static_cast<int>(alpha.size()) != dim.value()) throw DimensionError("multi-index length mismatch");
  for (int a : alpha) {
    if (a < 0) throw InputError("multi-index entries must be nonnegative");
  }
  Polynomial p(dim);
  p.add_term(alpha, c);
  return p;
}

Polynomial Polynomial::coordinate(Dimension dim, int axis) {
  MultiIndex a(dim.value(), 0);
  a.at(axis) = 1;
  return monomial(dim, a);
}

Polynomial Polynomial::radius_power(Dimension dim, int k) {
  Polynomial r2(dim);
  for (int i = 0; i < dim.value(); ++i) {
    MultiIndex a(dim.value(), 0);
    a[i] = 2;
    r2.add_term(a, 1.0);
  }
  Polynomial p = constant(dim, 1.0);
  for (int i = 0; i < k; ++i) p = p * r2;
  return p;
}

int Polynomial::degree() const {
  int d = -1;
  for (const auto& [a, c] : coeffs_) {
    int s = 0;
    for (int e : a) s += e;
    d = std::max(d, s);
  }
  return d;
}

double Polynomial::coefficient(const MultiIndex& alpha) const {
  auto it = coeffs_.find(alpha);
  return it == coeffs_.end() ? 0.0 : it->second;
}

void Polynomial::add_term(const MultiIndex& alpha, double c) {
  if (static_cast<int>(alpha.size()) != n_) throw DimensionError("multi-index length mismatch");
  if (c == 0.0) return;
  auto [it, inserted] = coeffs_.emplace(alpha, c);
  if (!inserted) {
    it->second += c;
    if (it->second == 0.0) coeffs_.erase(it);
  }
}

double Polynomial::operator()(std::span<const double> x) const {
  if (static_cast<int>(x.size()) != n_) throw DimensionError("polynomial evaluated at a point of the wrong dimension");
  double s = 0.0;
  for (const auto& [a, c] : coeffs_) {
    double m = c;
    for (int i = 0; i < n_; ++i) {
      for (int e = 0; e < a[i]; ++e) m *= x[i];
    }
    s += m;
  }
  return s;
}

Polynomial Polynomial::operator+(const Polynomial& o) const {
  check_dim(n_, o.n_);
  Polynomial p = *this;
  for (const auto& [a, c] : o.coeffs_) p.add_term(a, c);
  return p;
}

Polynomial Polynomial::operator-(const Polynomial& o) const { return *this + o * -1.0; }

Polynomial Polynomial::operator*(const Polynomial& o) const {
  check_dim(n_, o.n_);
  Polynomial p{Dimension(n_)};
  MultiIndex sum(n_);
  for (const auto& [a, c] : coeffs_) {
    for (const auto& [b, d] : o.coeffs_) {
      for (int i = 0; i < n_; ++i) sum[i] = a[i] + b[i];
      p.add_term(sum, c * d);
    }
  }
  return p;
}

Polynomial Polynomial::operator*(double s) const {
  Polynomial p{Dimension(n_)};
  for (const auto& [a, c] : coeffs_) p.add_term(a, c * s);
  return p;
}

Polynomial Polynomial::translated(std::span<const double> shift) const {
  if (static_cast<int>(shift.size()) != n_) throw DimensionError("shift has the wrong dimension");
  const Dimension dim(n_);
  Polynomial out(dim);
  for (const auto& [a, c] : coeffs_) {
    Polynomial term = constant(dim, c);
    for (int i = 0; i < n_; ++i) {
      // (x_i + s_i)^{a_i} by the binomial theorem.
      Polynomial factor(dim);
      for (int j = 0; j <= a[i]; ++j) {
        MultiIndex e(n_, 0);
        e[i] = j;
        factor.add_term(e, static_cast<double>(binomial(a[i], j)) * std::pow(shift[i], a[i] - j));
      }
      term = term * factor;
    }
    out = out + term;
  }
  return out;
}

std::string Polynomial::to_string() const {
  if (coeffs_.empty()) return "0";
  std::ostringstream os;
  os.precision(17);
  bool first = true;
  for (const auto& [a, c] : coeffs_) {
    if (!first) os << " + ";
    first = false;
    os << c;
    for (int i = 0; i < n_; ++i) {
      if (a[i] == 1) os << "*x" << (i + 1);
      if (a[i] > 1) os << "*x" << (i + 1) << "^" << a[i];
    }
  }
  return os.str();
}

long binomial(int a, int b) {
  if (b < 0 || a < 0 || b > a) return 0;
  b = std::min(b, a - b);
  long v = 1;
  for (int i = 1; i <= b; ++i) v = v * (a - b + i) / i;
  return v;
}

std::vector<MultiIndex> homogeneous_indices(int n, int k) {
  std::vector<MultiIndex> out;
  MultiIndex cur(n, 0);
  // Distribute k among n slots, first slot largest first (lexicographic descending).
  std::function<void(int, int)> rec = [&](int slot, int left) {
    if (slot == n - 1) {
      cur[slot] = left;
      out.push_back(cur);
      return;
    }
    for (int v = left; v >= 0; --v) {
      cur[slot] = v;
      rec(slot + 1, left - v);
    }
  };
  if (k >= 0) rec(0, k);
  return out;
}

std::vector<MultiIndex> indices_up_to(int n, int k) {
  std::vector<MultiIndex> out;
  for (int d = 0; d <= k; ++d) {
    auto h = homogeneous_indices(n, d);
    out.insert(out.end(), h.begin(), h.end());
  }
  return out;
}

Polynomial apply_laplacian_poly(const Polynomial& p, int m) {
  if (m < 0) throw InputError("Laplacian power must be nonnegative");
  const int n = p.dim().value();
  Polynomial cur = p;
  for (int step = 0; step < m; ++step) {
    Polynomial next(p.dim());
    for (const auto& [a, c] : cur.coeffs()) {
      for (int i = 0; i < n; ++i) {
        if (a[i] < 2) continue;
        MultiIndex b = a;
        b[i] -= 2;
        next.add_term(b, c * a[i] * (a[i] - 1));
      }
    }
    cur = std::move(next);
  }
  return cur;
}

double polynomial_ball_mean(const Polynomial& p, std::span<const double> center, double R) {
  if (!(R > 0.0)) throw InputError("ball radius must be positive");
  const int n = p.dim().value();
  const Polynomial q = p.translated(center);
  double mean = 0.0;
  for (const auto& [a, c] : q.coeffs()) {
    int deg = 0;
    bool even = true;
    double num = 1.0;
    for (int e : a) {
      deg += e;
      even = even && e % 2 == 0;
      num *= double_factorial_odd(e);
    }
    if (!even) continue;
    // Sphere mean of omega^a is prod (a_i - 1)!! / (n (n+2) ... (n + deg - 2)).
    double den = 1.0;
    for (int j = 0; j < deg; j += 2) den *= n + j;
    mean += c * (num / den) * n / (n + deg) * std::pow(R, deg);
  }
  return mean;
}

namespace {

using u64 = std::uint64_t;
using u128 = unsigned __int128;

u64 mulmod(u64 a, u64 b, u64 p) { return static_cast<u64>(static_cast<u128>(a) * b % p); }

u64 powmod(u64 a, u64 e, u64 p) {
  u64 r = 1;
  while (e) {
    if (e & 1) r = mulmod(r, a, p);
    a = mulmod(a, a, p);
    e >>= 1;
  }
  return r;
}

// Rank mod p of Delta^{n/2} : H_k -> H_{k-n}.
long block_rank(int n, int k, u64 p) {
  const auto cols = homogeneous_indices(n, k);
  const auto rows = homogeneous_indices(n, k - n);
  std::map<MultiIndex, std::size_t> row_of;
  for (std::size_t i = 0; i < rows.size(); ++i) row_of[rows[i]] = i;
  std::vector<std::vector<u64>> mat(rows.size(), std::vector<u64>(cols.size(), 0));
  for (std::size_t j = 0; j < cols.size(); ++j) {
    std::map<MultiIndex, u64> cur{{cols[j], 1}};
    for (int step = 0; step < n / 2; ++step) {
      std::map<MultiIndex, u64> next;
      for (const auto& [a, c] : cur) {
        for (int i = 0; i < n; ++i) {
          if (a[i] < 2) continue;
          MultiIndex b = a;
          b[i] -= 2;
          u64& slot = next[b];
          slot = (slot + mulmod(c, static_cast<u64>(a[i]) * (a[i] - 1), p)) % p;
        }
      }
      cur = std::move(next);
    }
    for (const auto& [a, c] : cur) mat[row_of.at(a)][j] = c;
  }
  // Gaussian elimination over Z/p.
  long rank = 0;
  const std::size_t R = rows.size(), C = cols.size();
  std::size_t r = 0;
  for (std::size_t c = 0; c < C && r < R; ++c) {
    std::size_t piv = r;
    while (piv < R && mat[piv][c] == 0) ++piv;
    if (piv == R) continue;
    std::swap(mat[piv], mat[r]);
    const u64 inv = powmod(mat[r][c], p - 2, p);
    for (std::size_t i = r + 1; i < R; ++i) {
      if (mat[i][c] == 0) continue;
      const u64 f = mulmod(mat[i][c], inv, p);
      for (std::size_t j = c; j < C; ++j) {
        mat[i][j] = (mat[i][j] + p - mulmod(f, mat[r][j], p)) % p;
      }
    }
    ++r;
    ++rank;
  }
  return rank;
}

}  // namespace

PhDimension ph_dimension_detail(Dimension dim, double d) {
  if (!(d >= 0.0) || !std::isfinite(d)) throw InputError("growth degree must be finite and >= 0");
  const int n = dim.value();
  const int D = static_cast<int>(std::floor(d));
  if (D > 40) throw InputError("growth degree too large for the exact rank computation");
  PhDimension out;
  const u64 primes[] = {(u64{1} << 61) - 1, 1000000007ULL};
  for (int k = 0; k <= D; ++k) {
    const long cols = binomial(k + n - 1, n - 1);
    if (k < n) {
      out.kernel_rank_result += cols;
      continue;
    }
    const long rows = binomial(k - n + n - 1, n - 1);
    // A mod-p rank is a lower bound for the rational rank; reaching the row
    // count certifies the block is onto.
    long rank = 0;
    for (u64 p : primes) {
      rank = std::max(rank, block_rank(n, k, p));
      if (rank == rows) break;
    }
    out.certified = out.certified && rank == rows;
    out.kernel_rank_result += cols - rank;
  }
  out.closed_form = binomial(n + D, n) - binomial(D, n);
  return out;
}

long ph_dimension(Dimension dim, double d) { return ph_dimension_detail(dim, d).kernel_rank_result; }

// Re or Im of (x_a + i x_b)^k: harmonic in any dimension.
Polynomial complex_power_part(Dimension dim, int a, int b, int k, bool imaginary) {
  Polynomial p(dim);
  for (int j = 0; j <= k; ++j) {
    // binomial term x_a^{k-j} (i x_b)^j; i^j real for even j, imaginary for odd j.
    if ((j % 2 == 1) != imaginary) continue;
    const double sign = ((j / 2) % 2 == 0) ? 1.0 : -1.0;
    MultiIndex e(dim.value(), 0);
    e[a] = k - j;
    e[b] = j;
    p.add_term(e, sign * static_cast<double>(binomial(k, j)));
  }
  return p;
}

// Harmonic polynomial: product of complex-power parts on disjoint coordinate pairs.
Polynomial random_harmonic(std::mt19937_64& rng, Dimension dim, int max_degree) {
  const int n = dim.value();
  Polynomial h = Polynomial::constant(dim, 1.0);
  std::vector<int> axes(n);
  for (int i = 0; i < n; ++i) axes[i] = i;
  std::shuffle(axes.begin(), axes.end(), rng);
  int budget = max_degree;
  for (int pair = 0; pair + 1 < n && budget > 0; pair += 2) {
    const int k = static_cast<int>(rng() % (budget + 1));
    budget -= k;
    h = h * complex_power_part(dim, axes[pair], axes[pair + 1], k, rng() % 2 == 1);
  }
  // Dyadic coefficients keep every later operation exact.
  std::uniform_int_distribution<int> c(-16, 16);
  return h * (c(rng) / 8.0);
}

// Polyharmonic of order m: sum_{i<m} |x|^{2i} h_i with harmonic h_i (Almansi).
Polynomial random_polyharmonic(std::mt19937_64& rng, Dimension dim, int m, int max_degree) {
  Polynomial p(dim);
  for (int i = 0; i < m; ++i) {
    const int room = std::max(0, max_degree - 2 * i);
    p = p + Polynomial::radius_power(dim, i) * random_harmonic(rng, dim, room);
  }
  return p;
}

}  // namespace qflat
