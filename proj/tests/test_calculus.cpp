#include <doctest.h>

#include <cmath>
#include <random>

#include "qflat/calculus.hpp"
#include "support/generators.hpp"

using namespace qflat;
using qflat::testing::random_point;

namespace {

ScalarField expr(const char* src, int n) { return ScalarField::from_expression(Expression::parse(src, Dimension(n))); }

}  // namespace

TEST_CASE("laplacian_power examples") {
  for (int n : {2, 4, 6}) {
    auto f = expr("r^2", n);
    std::vector<double> x(n, 0.3);
    CHECK(laplacian_power(f, x, 1, LaplacianMethod::finite_difference) == doctest::Approx(2.0 * n).epsilon(1e-8));
    CHECK(laplacian_power(f, x, 1, LaplacianMethod::radial) == doctest::Approx(2.0 * n).epsilon(1e-8));
  }
  auto r4 = expr("r^4", 4);
  std::vector<double> x{0.2, -0.1, 0.5, 0.3};
  CHECK(laplacian_power(r4, x, 2, LaplacianMethod::finite_difference) == doctest::Approx(192.0).epsilon(1e-6));
  CHECK(laplacian_power(r4, x, 2, LaplacianMethod::radial) == doctest::Approx(192.0).epsilon(1e-6));
  CHECK(laplacian_power(r4, std::vector<double>(4, 0.0), 2, LaplacianMethod::radial) == doctest::Approx(192.0).epsilon(1e-6));

  auto lg = expr("log(1+r^2)", 2);
  std::vector<double> x1{0.6, 0.8};
  CHECK(laplacian_power(lg, x1, 1, LaplacianMethod::finite_difference) == doctest::Approx(1.0).epsilon(1e-4));
  CHECK(laplacian_power(lg, x1, 1, LaplacianMethod::radial) == doctest::Approx(1.0).epsilon(1e-9));
  CHECK_THROWS_AS(laplacian_power(lg, x1, 1, LaplacianMethod::analytic), PreconditionError);
  CHECK_THROWS_AS(laplacian_power(expr("x1", 2), x1, 1, LaplacianMethod::radial), NotRadial);
  CHECK_THROWS_AS(laplacian_power(lg, x1, 1, LaplacianMethod::finite_difference, 1e-12), NumericError);
}

TEST_CASE("finite differences converge at second order") {
  auto f = expr("exp(x1) * atan(x2) + x1^4", 2);
  std::vector<double> x{0.3, 0.7};
  // exp(x1) (atan(x2) + atan''(x2)) + 12 x1^2, atan''(y) = -2y/(1+y^2)^2.
  const double exact = std::exp(0.3) * (std::atan(0.7) - 2 * 0.7 / std::pow(1 + 0.49, 2)) + 12 * 0.09;
  const double e1 = std::abs(laplacian_power(f, x, 1, LaplacianMethod::finite_difference, 0.04) - exact);
  const double e2 = std::abs(laplacian_power(f, x, 1, LaplacianMethod::finite_difference, 0.02) - exact);
  CHECK(e1 / e2 == doctest::Approx(4.0).epsilon(0.05));
}

TEST_CASE("radial recursion agrees with closed-form chains") {
  for (int n : {2, 4, 6}) {
    RationalRadial u = RationalRadial::log_term(-0.5) + RationalRadial::constant(0.3);
    RationalRadial lap = u;
    for (int m = 1; m <= n / 2; ++m) {
      lap = lap.laplacian(n);
      for (double r : {0.0, 0.3, 0.9, 1.0, 2.0, 30.0}) {
        const double num = radial_laplacian_power([&](double s) { return u.value(s); }, r, n, m);
        const double ref = lap.value(r);
        const double scale = std::abs(ref) + std::pow(1 + r * r, -m);
        CHECK(std::abs(num - ref) <= (m == 3 ? 1e-3 : 2e-6) * scale);
      }
    }
  }
}

TEST_CASE("rational radial derivative") {
  RationalRadial u = RationalRadial::log_term(1.5);
  u.add(1, 2, 0.7);
  for (double r : {0.0, 0.5, 3.0}) {
    const double h = 1e-5;
    const double fd = (u.value(r + h) - u.value(std::abs(r - h))) / (2 * h);
    CHECK(u.derivative(r) == doctest::Approx(fd).epsilon(1e-7));
  }
  CHECK(std::isfinite(u.value(1e200)));
}

TEST_CASE("q_curvature examples") {
  for (int n : {2, 4}) {
    auto zero = ScalarField::zero(Dimension(n));
    CHECK(q_curvature(zero, std::vector<double>(n, 1.3)) == 0.0);
  }
  auto sphere = expr("log(2/(1+r^2))", 2);
  for (double r : {0.0, 0.5, 2.0, 10.0}) {
    CHECK(q_curvature(sphere, std::vector<double>{r, 0.0}) == doctest::Approx(1.0).epsilon(1e-7));
  }
  auto cone = expr("-(0.5/2)*log(1+r^2)", 2);
  CHECK(q_curvature(cone, std::vector<double>{0.0, 0.0}) == doctest::Approx(1.0).epsilon(1e-7));
  auto huge = expr("-200 + 0*r", 4);
  CHECK_THROWS_AS(q_curvature(huge, std::vector<double>(4, 0.0)), OverflowError);
  std::mt19937_64 rng(5);
  auto c = expr("3.5", 4);
  for (int i = 0; i < 50; ++i) CHECK(std::abs(q_curvature(c, random_point(rng, 4, 5.0))) <= 1e-8);
}

TEST_CASE("scalar_curvature examples") {
  CHECK(scalar_curvature(ScalarField::zero(Dimension(4)), std::vector<double>(4, 0.5)) == 0.0);
  auto sphere = expr("log(2/(1+r^2))", 4);
  std::mt19937_64 rng(17);
  for (int i = 0; i < 10; ++i) {
    CHECK(scalar_curvature(sphere, random_point(rng, 4, 3.0)) == doctest::Approx(12.0).epsilon(1e-6));
  }
  auto planted = expr("-x1^2", 4);
  CHECK(scalar_curvature(planted, std::vector<double>(4, 0.0)) == doctest::Approx(12.0).epsilon(1e-8));
  CHECK_THROWS_AS(scalar_curvature(sphere.dim().value() == 2 ? sphere : expr("r", 2), std::vector<double>{1, 1}),
                  DimensionError);
  CHECK(scalar_negative_part_density(sphere, std::vector<double>(4, 0.2)) == 0.0);
  // -x1^2: Delta u = -2, |grad u|^2 = 4 x1^2 -> 6 max(0, -2 + 4 x1^2).
  CHECK(scalar_negative_part_density(planted, std::vector<double>{2, 0, 0, 0}) == doctest::Approx(6 * 14.0).epsilon(1e-6));
}

TEST_CASE("pizzetti coefficients") {
  for (int n : {2, 4, 6}) {
    auto pc = pizzetti_coeffs(Dimension(n), 3);
    CHECK(pc.c[0] == 1.0);
    CHECK(pc.c[1] == doctest::Approx(1.0 / (2.0 * (n + 2))).epsilon(1e-15));
    // Independent closed form Gamma(n/2+1) / (4^i i! Gamma(n/2+i+1)).
    for (int i = 0; i < 3; ++i) {
      const double ref = std::tgamma(n / 2.0 + 1) / (std::pow(4.0, i) * std::tgamma(i + 1.0) * std::tgamma(n / 2.0 + i + 1));
      CHECK(pc.c[i] == doctest::Approx(ref).epsilon(1e-14));
      CHECK(pc.c[i] > 0.0);
    }
  }
  auto p21 = pizzetti_coeffs(Dimension(2), 1);
  CHECK(p21.c == std::vector<double>{1.0});
}

TEST_CASE("ball_mean examples") {
  const Dimension d2(2);
  std::vector<double> c0{0.0, 0.0};
  CHECK(ball_mean(ScalarField::constant(d2, 2.5), std::vector<double>{1.0, -2.0}, 0.7) == doctest::Approx(2.5).epsilon(1e-12));
  CHECK(ball_mean(expr("r^2", 2), c0, 1.0) == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(std::abs(ball_mean(expr("x1", 2), c0, 3.0)) < 1e-12);
  // Off-center polynomial against the exact moment formula.
  Polynomial p = Polynomial::coordinate(d2, 0) * Polynomial::coordinate(d2, 0) * Polynomial::coordinate(d2, 1);
  auto f = ScalarField(d2, [p](std::span<const double> x) { return p(x); });
  std::vector<double> ctr{0.4, -1.1};
  CHECK(ball_mean(f, ctr, 1.3) == doctest::Approx(polynomial_ball_mean(p, ctr, 1.3)).epsilon(1e-10));
  auto g = expr("exp(-(x1-1)^2 - x2^2 - x3^2 - x4^2)", 4);
  std::vector<double> c4{0.5, 0.0, 0.0, 0.0};
  // Radial about (1,0,0,0); mean over B_R(c) checked against a ball centered there.
  const double ref = ball_mean(expr("exp(-r^2)", 4), std::vector<double>(4, 0.0), 0.8);
  CHECK(ball_mean(g, std::vector<double>{1.0, 0.0, 0.0, 0.0}, 0.8) == doctest::Approx(ref).epsilon(1e-8));
  CHECK_THROWS_AS(ball_mean(g, c4, -1.0), InputError);
}

TEST_CASE("pizzetti_check examples") {
  const Dimension d2(2), d4(4);
  CHECK(pizzetti_check(Polynomial::constant(d2, 1.0), std::vector<double>{1, 2}, 3.0) == 0.0);
  Polynomial h = Polynomial::coordinate(d2, 0) * Polynomial::coordinate(d2, 0) -
                 Polynomial::coordinate(d2, 1) * Polynomial::coordinate(d2, 1);
  CHECK(pizzetti_check(h, std::vector<double>{0.3, -2.0}, 1.7) <= 1e-10);
  CHECK(pizzetti_check(Polynomial::radius_power(d4, 1), std::vector<double>(4, 0.0), 1.0) <= 1e-10);
  CHECK(polynomial_ball_mean(Polynomial::radius_power(d4, 1), std::vector<double>(4, 0.0), 1.0) ==
        doctest::Approx(4.0 / 6.0).epsilon(1e-15));
}

TEST_CASE("pizzetti residual on random polyharmonic polynomials") {
  std::mt19937_64 rng(2024);
  for (auto [n, m] : {std::pair{2, 1}, std::pair{4, 2}, std::pair{6, 3}}) {
    const Dimension dim(n);
    for (int i = 0; i < 50; ++i) {
      Polynomial p = qflat::testing::random_polyharmonic(rng, dim, m, 6);
      REQUIRE(apply_laplacian_poly(p, m).is_zero());
      auto c = random_point(rng, n, 2.0);
      std::uniform_real_distribution<double> rr(0.2, 2.0);
      const double R = rr(rng);
      const double mean = polynomial_ball_mean(p, c, R);
      CHECK(pizzetti_check(p, c, R) <= 1e-10 * (1.0 + std::abs(mean)));
    }
  }
}

TEST_CASE("apply_laplacian_poly") {
  const Dimension d2(2), d4(4);
  auto x1 = Polynomial::coordinate(d2, 0);
  CHECK(apply_laplacian_poly(x1 * x1, 1) == Polynomial::constant(d2, 2.0));
  CHECK(apply_laplacian_poly(x1 * Polynomial::coordinate(d2, 1), 1).is_zero());
  CHECK(apply_laplacian_poly(Polynomial::radius_power(d4, 2), 1) == Polynomial::radius_power(d4, 1) * 24.0);
  std::mt19937_64 rng(7);
  for (int i = 0; i < 100; ++i) {
    const Dimension dim(rng() % 2 ? 2 : 4);
    auto p = qflat::testing::random_integer_polynomial(rng, dim, 8, 12);
    CHECK(apply_laplacian_poly(apply_laplacian_poly(p, 1), 1) == apply_laplacian_poly(p, 2));
  }
}

TEST_CASE("polynomial algebra") {
  const Dimension d2(2);
  auto x = Polynomial::coordinate(d2, 0), y = Polynomial::coordinate(d2, 1);
  auto p = x * x * 3.0 + y - Polynomial::constant(d2, 2.0);
  CHECK(p.degree() == 2);
  CHECK(p(std::vector<double>{2.0, 5.0}) == 15.0);
  std::vector<double> shift{1.0, -1.0};
  auto q = p.translated(shift);
  CHECK(q(std::vector<double>{0.5, 0.25}) == doctest::Approx(p(std::vector<double>{1.5, -0.75})));
  CHECK((p - p).is_zero());
  CHECK(Polynomial(d2).degree() == -1);
  CHECK(homogeneous_indices(4, 3).size() == 20);
  CHECK(indices_up_to(2, 2).size() == 6);
}

TEST_CASE("ph_dimension") {
  CHECK(ph_dimension(Dimension(2), 0) == 1);
  CHECK(ph_dimension(Dimension(2), 2) == 5);
  CHECK(ph_dimension(Dimension(4), 3) == 35);
  CHECK(ph_dimension(Dimension(4), 3.9) == 35);
  for (int n : {2, 4, 6}) {
    for (int d = 0; d <= 10; ++d) {
      auto r = ph_dimension_detail(Dimension(n), d);
      CHECK(r.certified);
      CHECK(r.kernel_rank_result == r.closed_form);
    }
  }
}
