#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <random>

#include "qflat/calculus.hpp"
#include "qflat/potential.hpp"
#include "support/generators.hpp"

using namespace qflat;
using qflat::testing::random_point;

namespace {

ScalarField expr(const char* src, int n) { return ScalarField::from_expression(Expression::parse(src, Dimension(n))); }

ScalarField disk_indicator(int n, double height) {
  auto f = ScalarField::radial(Dimension(n), [height](double r) { return r <= 1.0 ? height : 0.0; }, {}, 1.0);
  return f;
}

// Same function with every structural hint stripped, so the general route runs.
ScalarField opaque(const ScalarField& f, std::optional<double> support = {}) {
  FieldCaps caps;
  caps.support_radius = support;
  return ScalarField(f.dim(), [f](std::span<const double> x) { return f(x); }, caps);
}

// Midpoint rule in the polar angle with a million nodes.
double brute_force_kernel(int n, double r, double s) {
  const int N = 1000000;
  double num = 0.0, den = 0.0;
  for (int i = 0; i < N; ++i) {
    const double th = std::numbers::pi * (i + 0.5) / N;
    const double w = std::pow(std::sin(th), n - 2);
    num += w * 0.5 * std::log(r * r - 2 * r * s * std::cos(th) + s * s);
    den += w;
  }
  return num / den;
}

std::string temp_path(const char* name) { return (std::filesystem::temp_directory_path() / name).string(); }

}  // namespace

TEST_CASE("angular kernel examples") {
  CHECK(angular_log_kernel(Dimension(2), 2.0, 1.0) == doctest::Approx(std::log(2.0)).epsilon(1e-12));
  CHECK(angular_log_kernel_quadrature(Dimension(2), 2.0, 1.0) == doctest::Approx(std::log(2.0)).epsilon(1e-10));
  for (int n : {2, 4, 6, 8}) {
    CHECK(angular_log_kernel(Dimension(n), 1.0, 0.0) == 0.0);
    CHECK(std::abs(angular_log_kernel_quadrature(Dimension(n), 1.0, 0.0)) < 1e-14);
  }
  const double golden = brute_force_kernel(4, 2.0, 1.0);
  CHECK(golden == doctest::Approx(std::log(2.0) + 1.0 / 16.0).epsilon(1e-9));
  CHECK(angular_log_kernel(Dimension(4), 2.0, 1.0) == doctest::Approx(golden).epsilon(1e-10));
  CHECK_THROWS_AS(angular_log_kernel(Dimension(4), 0.0, 0.0), InputError);
}

TEST_CASE("kernel closed form agrees with the brute-force mean") {
  for (int n : {4, 6, 8}) {
    for (auto [r, s] : {std::pair{2.0, 1.0}, {0.3, 1.7}, {1.0, 0.99}, {5.0, 0.1}}) {
      CHECK(angular_log_kernel(Dimension(n), r, s) == doctest::Approx(brute_force_kernel(n, r, s)).epsilon(1e-8));
    }
  }
}

TEST_CASE("kernel symmetry, quadrature route and derivative") {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> u(-4.0, 4.0);
  for (int n : {2, 4, 6}) {
    const Dimension d(n);
    for (int i = 0; i < 50; ++i) {
      const double r = std::exp(u(rng)), s = std::exp(u(rng));
      CHECK(std::abs(angular_log_kernel(d, r, s) - angular_log_kernel(d, s, r)) < 1e-10);
      if (std::abs(std::log10(r / s)) >= 0.25) {
        CHECK(std::abs(angular_log_kernel(d, r, s) - angular_log_kernel_quadrature(d, r, s)) < 1e-10);
      }
      const double h = 1e-6 * r;
      const double fd = (angular_log_kernel(d, r + h, s) - angular_log_kernel(d, r - h, s)) / (2 * h);
      if (std::abs(r - s) > 1e-3 * r) CHECK(angular_log_kernel_dr(d, r, s) == doctest::Approx(fd).epsilon(1e-6));
    }
  }
}

TEST_CASE("kernel table: symmetry, lookup and cache round trip") {
  KernelTable::Key key{4, 1e-2, 1e2, 4, 1e-10};
  const auto t = KernelTable::build(key);
  CHECK(t.size() == 17);
  CHECK(t.symmetry_defect() < 1e-10);
  CHECK(t.quadrature_gap() < 1e-10);
  CHECK(t.lookup(t.node(3), t.node(9)) == doctest::Approx(t.at(3, 9)).epsilon(1e-12));
  CHECK(t.lookup(2.0, 1.0) == doctest::Approx(angular_log_kernel(Dimension(4), 2.0, 1.0)).epsilon(1e-2));

  const auto path = temp_path("qflat_kernel_test.bin");
  t.save(path);
  const auto back = KernelTable::load(path, key);
  REQUIRE(back.size() == t.size());
  for (std::size_t i = 0; i < t.size(); ++i) {
    for (std::size_t j = 0; j < t.size(); ++j) CHECK(back.at(i, j) == t.at(i, j));
  }
  KernelTable::Key other = key;
  other.nodes_per_decade = 5;
  CHECK_THROWS_AS(KernelTable::load(path, other), InputError);
  other = key;
  other.n = 2;
  CHECK_THROWS_AS(KernelTable::load(path, other), InputError);

  std::filesystem::resize_file(path, std::filesystem::file_size(path) - 8);
  CHECK_THROWS_AS(KernelTable::load(path, key), InputError);
  std::filesystem::remove(path);
  CHECK_THROWS_AS(KernelTable::load(path, key), InputError);
}

TEST_CASE("evaluator writes and reuses the kernel cache file") {
  const auto path = temp_path("qflat_kernel_eval.bin");
  std::filesystem::remove(path);
  PotentialConfig cfg;
  cfg.kernel_cache = path;
  cfg.table = {2, 1e-3, 1e3, 4, 1e-10};
  PotentialEvaluator a(Dimension(2), cfg);
  CHECK(std::filesystem::exists(path));
  PotentialEvaluator b(Dimension(2), cfg);
  CHECK(b.table().at(2, 5) == a.table().at(2, 5));
  std::filesystem::remove(path);
}

TEST_CASE("total_mass_alpha examples") {
  CHECK(total_mass_alpha(ScalarField::zero(Dimension(2))).alpha_hat == 0.0);
  CHECK(total_mass_alpha(disk_indicator(2, 2.0)).alpha_hat == doctest::Approx(1.0).epsilon(1e-8));
  const auto sphere = expr("4/(1+r^2)^2", 2);
  const auto est = total_mass_alpha(sphere);
  CHECK(est.alpha_hat == doctest::Approx(2.0).epsilon(1e-8));
  CHECK(est.method == "mass_integral");
  CHECK(est.tail == quad::Convergence::convergent);
  // Round sphere in R^4: Q e^{4u} = 6 (2/(1+r^2))^4 integrates to 6 |S^4|, alpha = 2.
  CHECK(total_mass_alpha(expr("6*16/(1+r^2)^4", 4)).alpha_hat == doctest::Approx(2.0).epsilon(1e-8));
  // Non-radial route.
  CHECK(total_mass_alpha(opaque(sphere)).alpha_hat == doctest::Approx(2.0).epsilon(1e-7));
  CHECK_THROWS_AS(total_mass_alpha(expr("1/(1+r^2)", 2)), NonIntegrable);
  CHECK_THROWS_AS(total_mass_alpha(expr("1/(1+r)^2", 2)), NonIntegrable);
}

TEST_CASE("log_potential examples") {
  const auto f = disk_indicator(2, 2.0);
  const std::vector<double> x{std::exp(1.0), 0.0};
  CHECK(log_potential(f, x) == doctest::Approx(-1.5).epsilon(1e-9));
  CHECK(log_potential(f, std::vector<double>{0.0, 0.0}) == 0.0);
  CHECK(log_potential(ScalarField::zero(Dimension(2)), x) == 0.0);
  // Inside the disk: -r^2/2 from the exact computation.
  CHECK(log_potential(f, std::vector<double>{0.3, 0.4}) == doctest::Approx(-0.125).epsilon(1e-9));
  CHECK_THROWS_AS(log_potential(f, std::vector<double>{1.0, 0.0, 0.0}), DimensionError);
}

TEST_CASE("general route matches the radial route") {
  for (int n : {2, 4}) {
    const auto f = expr("exp(-r^2)", n);
    const auto g = opaque(f);
    PotentialEvaluator ev{Dimension(n)};
    const auto radii = n == 2 ? std::vector<double>{0.2, 1.0, 3.0, 20.0} : std::vector<double>{1.0, 20.0};
    for (double r : radii) {
      std::vector<double> x(n, 0.0);
      x[0] = r * 0.6;
      x[1] = r * 0.8;
      CHECK(ev.value(g, x) == doctest::Approx(ev.value(f, x)).epsilon(1e-6));
    }
  }
}

TEST_CASE("linearity at random points") {
  const auto f = opaque(expr("exp(-(x1-0.5)^2 - x2^2)", 2));
  const auto g = expr("1/(1+r^2)^2", 2);
  const auto fg = f + g;
  PotentialEvaluator ev{Dimension(2)};
  std::mt19937_64 rng(11);
  for (int i = 0; i < 20; ++i) {
    const auto x = random_point(rng, 2, 5.0);
    const double a = ev.value(f, x), b = ev.value(g, x), c = ev.value(fg, x);
    CHECK(std::abs(c - a - b) <= 2e-8 * (std::abs(a) + std::abs(b) + 1.0));
  }
}

TEST_CASE("Green inverse in the plane") {
  // Smooth compactly supported, not radial.
  const auto bump = expr("(1 + x1/2) * cutoff(r, 0.5, 1.5)", 2);
  const auto f = opaque(bump, 1.5);
  PotentialEvaluator ev{Dimension(2)};
  const auto pot = ev.potential_field(f);
  std::mt19937_64 rng(3);
  for (int i = 0; i < 20; ++i) {
    const auto x = random_point(rng, 2, 0.6);
    const double lap = laplacian_power(pot, x, 1, LaplacianMethod::finite_difference, 2e-2);
    CHECK(-lap == doctest::Approx(f(x)).epsilon(1e-3));
  }
}

TEST_CASE("radial potential field carries its Laplacian chain") {
  const auto f = expr("4/(1+r^2)^2", 2);
  PotentialEvaluator ev{Dimension(2)};
  const auto pot = ev.potential_field(f);
  const std::vector<double> x{0.7, -0.4};
  // Differencing the cubic spline profile: second derivatives jump at nodes.
  CHECK(laplacian_power(pot, x, 1, LaplacianMethod::radial) == doctest::Approx(-f(x)).epsilon(1e-4));
  CHECK(laplacian_power(pot, x, 1, LaplacianMethod::analytic) == doctest::Approx(-f(x)).epsilon(1e-12));
  // L(f) = -log(1+r^2) exactly for this density.
  CHECK(pot(x) == doctest::Approx(-std::log(1 + 0.65)).epsilon(1e-8));
  const auto grad = gradient(pot, x);
  CHECK(grad[0] == doctest::Approx(-2 * 0.7 / 1.65).epsilon(1e-7));

  const auto f4 = expr("6*16/(1+r^2)^4", 4);
  PotentialEvaluator ev4{Dimension(4)};
  const auto pot4 = ev4.potential_field(f4);
  const std::vector<double> y{0.3, 0.2, -0.5, 0.1};
  // L(f) = -log(1+r^2) for the round 4-sphere density too.
  CHECK(pot4(y) == doctest::Approx(-std::log(1 + 0.39)).epsilon(1e-8));
  CHECK(laplacian_power(pot4, y, 2, LaplacianMethod::analytic) == doctest::Approx(f4(y)).epsilon(1e-12));
  CHECK(laplacian_power(pot4, y, 1, LaplacianMethod::analytic) ==
        doctest::Approx(laplacian_power(pot4, y, 1, LaplacianMethod::radial)).epsilon(1e-5));
}

TEST_CASE("potential_asymptote examples") {
  std::vector<double> radii;
  for (double R = 10.0; R <= 1e4 * 1.0001; R *= std::sqrt(10.0)) radii.push_back(R);
  CHECK(std::abs(potential_asymptote(ScalarField::zero(Dimension(2)), radii).alpha_hat) < 1e-12);
  const auto disk = potential_asymptote(disk_indicator(2, 2.0), radii);
  CHECK(disk.alpha_hat == doctest::Approx(1.0).epsilon(0.02));
  CHECK(disk.method == "asymptote_fit");
  REQUIRE(disk.alpha_head.has_value());
  const auto sph = potential_asymptote(expr("4/(1+r^2)^2", 2), radii);
  CHECK(sph.alpha_hat == doctest::Approx(2.0).epsilon(0.025));
  CHECK_THROWS_AS(potential_asymptote(disk_indicator(2, 2.0), {10.0, 20.0, 50.0}), InputError);
}

TEST_CASE("asymptote fit agrees with the mass integral on a non-radial density") {
  const auto f = opaque(expr("exp(-(x1-1)^2 - x2^2)", 2));
  const std::vector<double> radii{10.0, 31.6, 100.0, 316.0, 1000.0};
  PotentialEvaluator ev{Dimension(2)};
  const double alpha = ev.total_mass_alpha(f).alpha_hat;
  CHECK(alpha == doctest::Approx(0.5).epsilon(1e-7));
  CHECK(potential_asymptote(ev, f, radii).alpha_hat == doctest::Approx(alpha).epsilon(0.02));
}

TEST_CASE("ball-averaged kernel") {
  for (int n : {2, 4, 6}) {
    const Dimension d(n);
    for (double dist : {0.0, 0.3, 1.0, 2.5}) {
      // Reference: radial integral of the angular kernel over the ball radius.
      auto res = quad::integrate([&](double rho) { return rho == 0.0 && dist == 0.0 ? 0.0 : n * std::pow(rho, n - 1) * angular_log_kernel(d, rho, dist); },
                                 0.0, 1.0, {1e-13, 1e-300, 400});
      CHECK(ball_log_kernel(d, dist, 1.0) == doctest::Approx(res.value).epsilon(1e-10));
    }
  }
  for (int n : {2, 4}) {
    const auto f = expr("exp(-r^2)", n);
    PotentialEvaluator ev{Dimension(n)};
    const auto profile = ev.potential_field(f).caps().radial;
    std::vector<double> c(n, 0.0);
    c[0] = 2.0;
    c[1] = 1.0;
    const double m = ev.ball_means(opaque(f), {c}, 1.5)[0];
    CHECK(m == doctest::Approx(radial_ball_mean(profile, n, std::sqrt(5.0), 1.5)).epsilon(1e-7));
  }
}

TEST_CASE("potential_bound_check examples") {
  PotentialEvaluator ev{Dimension(2)};
  const std::vector<double> radii{1.0, 2.0, 5.0, 10.0, 100.0};
  const auto plus = potential_bound_check(ev, disk_indicator(2, 2.0), PartSign::plus, radii);
  const auto minus = potential_bound_check(ev, disk_indicator(2, 2.0), PartSign::minus, radii);
  CHECK(plus.margin == doctest::Approx(-0.5).epsilon(1e-6));
  CHECK(minus.margin == doctest::Approx(-0.5).epsilon(1e-6));
  CHECK(plus.max - plus.min < 1e-6);

  const auto zero = potential_bound_check(ev, ScalarField::zero(Dimension(2)), PartSign::plus, radii, 0.0);
  CHECK(zero.margin == 0.0);

  // Gaussian minus a compact bump: the negative part is compact.
  const auto mixed = expr("exp(-r^2/4) - 2*cutoff(r, 0.5, 1)", 2);
  CHECK_THROWS_AS(potential_bound_check(ev, mixed, PartSign::minus, radii), PreconditionError);
  const auto a = potential_bound_check(ev, mixed, PartSign::minus, {2.0, 4.0, 8.0}, 1.0);
  const auto b = potential_bound_check(ev, mixed, PartSign::minus, {2.0, 4.0, 8.0, 16.0, 32.0}, 1.0);
  CHECK(std::isfinite(a.margin));
  CHECK(std::abs(a.margin - b.margin) < 0.05);
  // Its positive part is not compact.
  CHECK_THROWS_AS(potential_bound_check(ev, mixed, PartSign::plus, radii, 1.0), PreconditionError);
}
