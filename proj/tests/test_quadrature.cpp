#include <doctest.h>

#include <cmath>

#include "qflat/quadrature.hpp"

using namespace qflat;
using namespace qflat::quad;

TEST_CASE("adaptive Gauss-Kronrod") {
  auto r = integrate([](double x) { return std::exp(x); }, 0.0, 1.0);
  CHECK(r.value == doctest::Approx(std::exp(1.0) - 1.0).epsilon(1e-14));
  CHECK(r.converged);
  auto s = integrate([](double x) { return 1.0 / std::sqrt(x); }, 0.0, 1.0, {1e-10, 1e-300, 2000});
  CHECK(s.value == doctest::Approx(2.0).epsilon(1e-8));
  auto k = integrate([](double x) { return std::abs(x - 0.3); }, 0.0, 1.0);
  CHECK(k.value == doctest::Approx(0.045 + 0.245).epsilon(1e-10));
  CHECK(integrate([](double) { return 1.0; }, 2.0, 2.0).value == 0.0);
}

TEST_CASE("Gauss-Legendre rule") {
  auto g = GaussRule::legendre(7);
  REQUIRE(g.nodes.size() == 7);
  double s = 0.0, x6 = 0.0;
  for (std::size_t i = 0; i < g.nodes.size(); ++i) {
    s += g.weights[i];
    x6 += g.weights[i] * std::pow(g.nodes[i], 12);
  }
  CHECK(s == doctest::Approx(2.0).epsilon(1e-14));
  CHECK(x6 == doctest::Approx(2.0 / 13.0).epsilon(1e-13));
}

TEST_CASE("angular rules integrate polynomial moments") {
  for (int n : {2, 3, 4, 6}) {
    auto rule = AngularRule::make(n, 8);
    double w = 0.0, x1sq = 0.0, x1x2 = 0.0, x1q = 0.0;
    for (std::size_t i = 0; i < rule.size(); ++i) {
      auto v = rule.node(i);
      CHECK(norm(v) == doctest::Approx(1.0).epsilon(1e-14));
      w += rule.weight(i);
      x1sq += rule.weight(i) * v[n - 1] * v[n - 1];
      x1x2 += rule.weight(i) * v[0] * v[1];
      x1q += rule.weight(i) * std::pow(v[0], 4);
    }
    CHECK(w == doctest::Approx(1.0).epsilon(1e-14));
    CHECK(x1sq == doctest::Approx(1.0 / n).epsilon(1e-13));
    CHECK(std::abs(x1x2) < 1e-14);
    CHECK(x1q == doctest::Approx(3.0 / (n * (n + 2.0))).epsilon(1e-13));
  }
}

TEST_CASE("radial tail classification") {
  // Integrable power tail.
  RadialIntegrand f{[](double r) { return 1.0 / ((1 + r * r) * (1 + r * r)); }, {}};
  auto res = integrate_radial_tail(f, 0.0);
  CHECK(res.status == Convergence::convergent);
  CHECK(res.value == doctest::Approx(M_PI / 4.0).epsilon(1e-10));

  // 1/(r log r (log log r)^2)-type: in t, t^{-1} (log t)^{-2} converges slowly.
  RadialIntegrand flat{[](double) { return 1.0; }, {}};
  CHECK(integrate_radial_tail(flat, 0.0).status == Convergence::divergent);

  // t^c with c = -0.75: ratio 2^{0.25} > 1, divergent; c = -2: ratio 1/2.
  RadialIntegrand slow{{}, [](double t) { return t > 0 ? std::pow(t, -0.75) : 0.0; }};
  slow.in_r = [](double r) { return r > 1 ? std::pow(std::log(r), -0.75) / r : 0.0; };
  CHECK(integrate_radial_tail(slow, 1.0).status == Convergence::divergent);
  RadialIntegrand fast{{}, [](double t) { return t > 1 ? std::pow(t, -2.0) : 0.0; }};
  fast.in_r = [](double r) { return 0.0 * r; };
  auto fr = integrate_radial_tail(fast, 1.0);
  CHECK(fr.status == Convergence::convergent);
  CHECK(fr.value == doctest::Approx(1.0).epsilon(1e-8));

  auto range = integrate_radial_range(f, 0.0, 1e3);
  CHECK(range.value == doctest::Approx(0.5 * std::atan(1e3) + 0.5 * 1e3 / (1 + 1e6)).epsilon(1e-10));
}
