#include <doctest.h>

#include <cmath>
#include <limits>
#include <numbers>
#include <random>

#include "qflat/gallery.hpp"
#include "qflat/geometry.hpp"

using namespace qflat;

namespace {

constexpr double kPi = std::numbers::pi;
constexpr double kInf = std::numeric_limits<double>::infinity();

MetricContext metric(const char* name, nlohmann::json params = nlohmann::json::object(), int n = 2) {
  return gallery(name, params, n).ctx;
}

using Pt = std::vector<double>;

}  // namespace

TEST_CASE("conformal volume examples") {
  const auto flat = metric("flat");
  CHECK(conformal_volume(flat, 1.0) == doctest::Approx(kPi).epsilon(1e-10));
  const auto sphere = metric("sphere");
  CHECK(conformal_volume(sphere, 1.0) == doctest::Approx(2 * kPi).epsilon(1e-9));
  CHECK(std::abs(conformal_volume(sphere, 1e4) / (4 * kPi) - 1.0) < 1e-4);
  // 4 pi R^2 / (1 + R^2) at other radii, centred and off-centre against the
  // generic ball route.
  CHECK(conformal_volume(sphere, 3.0) == doctest::Approx(4 * kPi * 9 / 10).epsilon(1e-9));
  const Pt c{0.7, -0.4};
  MetricContext opaque(ScalarField(Dimension(2), [](std::span<const double> x) {
    return std::log(2.0 / (1.0 + x[0] * x[0] + x[1] * x[1]));
  }));
  CHECK(conformal_volume(sphere, 1.3, c) == doctest::Approx(conformal_volume(opaque, 1.3, c)).epsilon(1e-6));

  MetricContext hot(ScalarField::constant(Dimension(2), 400.0));
  CHECK_THROWS_AS(conformal_volume(hot, 1.0), OverflowError);
  CHECK_THROWS_AS(conformal_volume(flat, 0.0), InputError);
  CHECK_THROWS_AS(conformal_volume(flat, 1.0, Pt{0, 0, 0}), DimensionError);
}

TEST_CASE("total volume classification") {
  auto sv = total_volume(metric("sphere"));
  CHECK(sv.cls == Finiteness::finite);
  CHECK(sv.value == doctest::Approx(4 * kPi).epsilon(1e-8));
  CHECK(total_volume(metric("flat")).cls == Finiteness::infinite);
  auto c2 = total_volume(metric("cone", {{"a", 2.0}}));
  CHECK(c2.cls == Finiteness::finite);
  CHECK(c2.value == doctest::Approx(kPi).epsilon(1e-8));
  auto s4 = total_volume(metric("sphere", {}, 4));
  CHECK(s4.value == doctest::Approx(8 * kPi * kPi / 3).epsilon(1e-8));
}

TEST_CASE("volume growth exponents") {
  const auto radii = geometric_radii(1e2, 1e8);
  auto flat = volume_growth(metric("flat"), radii);
  CHECK(flat.exponent == doctest::Approx(1.0).epsilon(0.01));
  CHECK_FALSE(flat.low_confidence);
  CHECK(flat.inf_exponent <= flat.exponent + 1e-12);
  CHECK(flat.exponent <= flat.sup_exponent + 1e-12);
  auto cone = volume_growth(metric("cone", {{"a", 0.5}}), radii);
  CHECK(std::abs(cone.exponent - 0.5) <= 0.05);
  auto sphere = volume_growth(metric("sphere"), radii);
  CHECK(std::abs(sphere.exponent) <= 0.05);
  auto narrow = volume_growth(metric("flat"), geometric_radii(10, 100));
  CHECK(narrow.low_confidence);
}

TEST_CASE("measure distance") {
  const auto flat = metric("flat");
  const Pt x{0.3, -1.2}, y{2.0, 0.5};
  CHECK(measure_distance(flat, x, y) == doctest::Approx(std::sqrt(kPi) * distance(x, y) / 2).epsilon(1e-9));

  // Sphere metric, B_1((1, 0)): midpoint rule on a 3163^2 grid covering the
  // ball (about 10^7 samples).
  const int N = 3163;
  const double h = 2.0 / N;
  double acc = 0.0;
  for (int i = 0; i < N; ++i) {
    const double px = h * (i + 0.5);
    for (int j = 0; j < N; ++j) {
      const double py = -1.0 + h * (j + 0.5);
      if ((px - 1) * (px - 1) + py * py > 1.0) continue;
      const double s = 1.0 + px * px + py * py;
      acc += 4.0 / (s * s);
    }
  }
  const double golden = std::sqrt(acc * h * h);
  const auto sphere = metric("sphere");
  CHECK(measure_distance(sphere, Pt{0, 0}, Pt{2, 0}) == doctest::Approx(golden).epsilon(1e-4));

  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> U(-3, 3);
  for (int k = 0; k < 5; ++k) {
    const Pt a{U(rng), U(rng)}, b{U(rng), U(rng)};
    CHECK(measure_distance(sphere, a, b) == doctest::Approx(measure_distance(sphere, b, a)).epsilon(1e-12));
  }
  CHECK_THROWS_AS(measure_distance(sphere, x, x), PreconditionError);
}

TEST_CASE("ray lengths") {
  const Pt e1{1, 0};
  CHECK(ray_length(metric("flat"), e1, 0.5, 3.0).value == doctest::Approx(2.5).epsilon(1e-12));
  const auto sphere = ray_length(metric("sphere"), e1, 0, kInf);
  CHECK(sphere.cls == Finiteness::finite);
  CHECK(std::abs(sphere.value - kPi) < 1e-8);
  const auto cone2 = ray_length(metric("cone", {{"a", 2.0}}), e1, 0, kInf);
  CHECK(std::abs(cone2.value - kPi / 2) < 1e-8);
  // Cone metrics with alpha0 < 1 have infinite rays (complete).
  for (double a : {0.25, 0.5, 0.75, 1.0}) {
    CAPTURE(a);
    CHECK(ray_length(metric("cone", {{"a", a}}), e1, 0, kInf).divergent());
  }
  CHECK_THROWS_AS(ray_length(metric("flat"), Pt{1, 1}, 0, 1), InputError);
  CHECK_THROWS_AS(ray_length(metric("flat"), e1, 2, 1), InputError);
}

TEST_CASE("geodesic distance") {
  const auto flat = metric("flat");
  const auto grid = geodesic_distance(flat, Pt{0, 0}, Pt{1, 0}, DistanceMethod::grid_dijkstra);
  CHECK(grid.method == "grid_dijkstra");
  CHECK(grid.upper_bound);
  CHECK(grid.value >= 1.0 - 1e-12);
  CHECK(grid.value <= 1.03);
  const auto sphere = metric("sphere");
  auto r1 = geodesic_distance(sphere, Pt{0, 0}, Pt{0, 1});
  CHECK(r1.method == "radial_ray");
  CHECK_FALSE(r1.upper_bound);
  CHECK(r1.value == doctest::Approx(kPi / 2).epsilon(1e-10));
  auto r2 = geodesic_distance(sphere, Pt{1e3 * std::cos(1.0), 1e3 * std::sin(1.0)}, Pt{0, 0});
  CHECK(r2.value == doctest::Approx(2 * std::atan(1e3)).epsilon(1e-10));
  // The grid route is an upper bound on the exact ray value.
  auto g1 = geodesic_distance(sphere, Pt{0, 0}, Pt{0, 1}, DistanceMethod::grid_dijkstra);
  CHECK(g1.value >= r1.value * (1 - 1e-4));
  CHECK(g1.value <= 1.03 * r1.value);

  CHECK_THROWS_AS(geodesic_distance(sphere, Pt{1, 0}, Pt{0, 1}, DistanceMethod::radial_ray), PreconditionError);
  GridSpec small = grid_around(Pt{0, 0}, Pt{1, 0});
  CHECK_THROWS_AS(geodesic_distance(sphere, Pt{0, 0}, Pt{5, 0}, DistanceMethod::grid_dijkstra, small), InputError);
  small.cells_per_axis = 4;
  CHECK_THROWS_AS(geodesic_distance(sphere, Pt{0, 0}, Pt{1, 0}, DistanceMethod::grid_dijkstra, small), InputError);
  CHECK_THROWS_AS(geodesic_distance(metric("flat", {}, 4), Pt{1, 0, 0, 0}, Pt{0, 1, 0, 0}), PreconditionError);
}

TEST_CASE("grid distance properties") {
  const auto sphere = metric("sphere");
  GridSpec spec;
  spec.box = {{-3, -3}, {3, 3}};
  spec.cells_per_axis = 32;
  const GridGraph graph(sphere, spec);
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> U(-3, 3);
  double worst = -kInf;
  for (int k = 0; k < 100; ++k) {
    const Pt x{U(rng), U(rng)}, y{U(rng), U(rng)}, z{U(rng), U(rng)};
    worst = std::max(worst, graph.distance(x, z) - graph.distance(x, y) - graph.distance(y, z));
  }
  CHECK(worst <= 1e-9);

  // Doubling the resolution moves d_g by at most 3%.
  for (const char* name : {"sphere", "cone", "flat"}) {
    CAPTURE(name);
    const auto ctx = metric(name);
    const Pt a{-1.0, 0.5}, b{2.0, 1.0};
    const double coarse = geodesic_distance(ctx, a, b, DistanceMethod::grid_dijkstra, grid_around(a, b, 32)).value;
    const double fine = geodesic_distance(ctx, a, b, DistanceMethod::grid_dijkstra, grid_around(a, b, 64)).value;
    CHECK(std::abs(fine - coarse) <= 0.03 * coarse);
    CHECK(fine <= coarse * (1 + 1e-9) + 0.03 * coarse);
  }
}

TEST_CASE("diameter classification") {
  const auto s = diameter_estimate(metric("sphere"));
  CHECK(s.cls == Finiteness::finite);
  REQUIRE(s.value);
  CHECK(std::abs(*s.value - kPi) < 1e-6);
  CHECK(diameter_estimate(metric("flat")).cls == Finiteness::infinite);
  CHECK(diameter_estimate(metric("huber", {{"c", -2.0}})).cls == Finiteness::finite);
  CHECK(diameter_estimate(metric("huber", {{"c", 0.0}})).cls == Finiteness::infinite);
  // Non-radial metric: every sampled direction must agree.
  MetricContext tilted(ScalarField(Dimension(2), [](std::span<const double> x) {
    return std::log(2.0 / (1.0 + x[0] * x[0] + x[1] * x[1])) + 0.1 * x[0] / (1.0 + x[0] * x[0] + x[1] * x[1]);
  }));
  const auto t = diameter_estimate(tilted);
  CHECK(t.cls == Finiteness::finite);
  CHECK_FALSE(t.value);
}

TEST_CASE("distance growth exponents") {
  const auto radii = geometric_radii(10, 1e4);
  const Pt origin{0, 0};
  CHECK(distance_growth_exponent(metric("flat"), origin, radii).exponent == doctest::Approx(1.0).epsilon(0.01));
  CHECK(std::abs(distance_growth_exponent(metric("cone", {{"a", 0.5}}), origin, radii).exponent - 0.5) <= 0.05);
  CHECK(std::abs(distance_growth_exponent(metric("sphere"), origin, radii).exponent) <= 0.05);
}

TEST_CASE("strong A-infinity ratio") {
  const auto flat = metric("flat");
  std::vector<std::pair<Pt, Pt>> pairs = {{{0, 0}, {1, 0}}, {{-1, 2}, {2, -2}}, {{0.5, 0.5}, {0.5, 3.0}}};
  const auto st = strong_ainfty_ratio(flat, pairs);
  CHECK(st.samples == 3);
  CHECK(st.min >= 2 / std::sqrt(kPi) * (1 - 1e-9));
  CHECK(st.max <= 2 / std::sqrt(kPi) * 1.03);

  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> U(-1, 1);
  std::vector<std::pair<Pt, Pt>> sp;
  while (sp.size() < 20) {
    Pt a{5 * U(rng), 5 * U(rng)}, b{5 * U(rng), 5 * U(rng)};
    if (norm(a) < 5 && norm(b) < 5) sp.emplace_back(a, b);
  }
  const auto ss = strong_ainfty_ratio(metric("sphere"), sp);
  CHECK(ss.samples == 20);
  CHECK(ss.min > 0.0);
  CHECK(std::isfinite(ss.max));
  CHECK(ss.min <= ss.mean);
  CHECK(ss.mean <= ss.max);
  CHECK_THROWS_AS(strong_ainfty_ratio(flat, {{{1, 1}, {1, 1}}}), PreconditionError);
}

TEST_CASE("growth fit helpers") {
  const auto r = geometric_radii(1, 1e4, 2);
  CHECK(r.size() == 9);
  CHECK(r.front() == doctest::Approx(1));
  CHECK(r.back() == doctest::Approx(1e4));
  std::vector<double> x, y;
  for (double R : r) {
    x.push_back(std::log(R));
    y.push_back(3 * std::log(R) + 1);
  }
  const auto g = fit_growth(r, x, y);
  CHECK(g.exponent == doctest::Approx(3));
  CHECK(g.residual < 1e-12);
  CHECK_THROWS_AS(geometric_radii(10, 1), InputError);
  CHECK_THROWS_AS(fit_growth({1, 2}, {0, 1}, {0, 1}), InputError);
}
