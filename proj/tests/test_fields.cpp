#include <doctest.h>

#include <cmath>
#include <random>

#include "qflat/expression.hpp"
#include "qflat/field.hpp"
#include "qflat/spec_document.hpp"

using namespace qflat;

namespace {

std::vector<double> random_point(std::mt19937_64& rng, int n, double scale) {
  std::uniform_real_distribution<double> u(-scale, scale);
  std::vector<double> x(n);
  for (auto& c : x) c = u(rng);
  return x;
}

}  // namespace

TEST_CASE("dimension rejects odd and nonpositive n") {
  CHECK_THROWS_AS(Dimension(3), DimensionError);
  CHECK_THROWS_AS(Dimension(0), DimensionError);
  CHECK_THROWS_AS(Dimension(-2), DimensionError);
  CHECK(Dimension(4).half() == 2);
  CHECK_THROWS_AS(Point(Dimension(2), {1.0}), DimensionError);
  CHECK_THROWS_AS(Point(Dimension(2), {1.0, NAN}), InputError);
}

TEST_CASE("sphere constants") {
  const auto c4 = SphereConstants::of(Dimension(4));
  CHECK(c4.green_constant == doctest::Approx(1.0 / (8.0 * M_PI * M_PI)).epsilon(1e-14));
  const auto c2 = SphereConstants::of(Dimension(2));
  CHECK(c2.green_constant == doctest::Approx(1.0 / (2.0 * M_PI)).epsilon(1e-14));
  CHECK(c2.unit_ball_volume == doctest::Approx(M_PI));
  CHECK(c4.unit_sphere_area == doctest::Approx(2.0 * M_PI * M_PI));
}

TEST_CASE("parse_field examples") {
  const Dimension d2(2);
  auto zero = Expression::parse("0", d2);
  CHECK(zero.evaluate(std::vector<double>{3.0, -1.0}) == 0.0);

  auto sphere = Expression::parse("log(2/(1+r^2))", d2);
  CHECK(sphere.evaluate(std::vector<double>{0.0, 0.0}) == doctest::Approx(std::log(2.0)).epsilon(1e-15));
  CHECK(sphere.evaluate(std::vector<double>{1.0, 0.0}) == doctest::Approx(0.0));
  CHECK(sphere.depends_only_on_radius());

  auto cone = Expression::parse("-(0.5/2)*log(1+r^2)", d2);
  CHECK(cone.evaluate(std::vector<double>{0.0, 1.0}) == doctest::Approx(-0.25 * std::log(2.0)));
  CHECK(cone.evaluate(std::vector<double>{std::sqrt(3.0), 0.0}) == doctest::Approx(-0.25 * std::log(4.0)));
}

TEST_CASE("parser errors carry positions") {
  const Dimension d2(2);
  try {
    Expression::parse("1 + * 2", d2);
    FAIL("expected a parse error");
  } catch (const ParseError& e) {
    CHECK(e.position() == 4);
  }
  CHECK_THROWS_AS(Expression::parse("x3", d2), ParseError);
  CHECK_THROWS_AS(Expression::parse("foo(r)", d2), ParseError);
  CHECK_THROWS_AS(Expression::parse("log(r, 2)", d2), ParseError);
  CHECK_THROWS_AS(Expression::parse("cutoff(r, 1)", d2), ParseError);
  CHECK_THROWS_AS(Expression::parse("", d2), ParseError);
  CHECK_THROWS_AS(Expression::parse("(1 + r", d2), ParseError);
}

TEST_CASE("evaluation domain errors") {
  const Dimension d2(2);
  auto e = Expression::parse("log(x1)", d2);
  CHECK_THROWS_AS(e.evaluate(std::vector<double>{-1.0, 0.0}), DomainError);
  CHECK_THROWS_AS(Expression::parse("sqrt(x1)", d2).evaluate(std::vector<double>{-1.0, 0.0}), DomainError);
  CHECK_THROWS_AS(Expression::parse("1/x1", d2).evaluate(std::vector<double>{0.0, 0.0}), DomainError);
  CHECK_THROWS_AS(e.evaluate(std::vector<double>{1.0, 0.0, 0.0}), DimensionError);
}

TEST_CASE("operator precedence and power associativity") {
  const Dimension d2(2);
  const std::vector<double> x{2.0, 3.0};
  CHECK(Expression::parse("-2^2", d2).evaluate(x) == -4.0);
  CHECK(Expression::parse("2^3^2", d2).evaluate(x) == 512.0);
  CHECK(Expression::parse("2^-1", d2).evaluate(x) == 0.5);
  CHECK(Expression::parse("1 - 2 - 3", d2).evaluate(x) == -4.0);
  CHECK(Expression::parse("8 / 2 / 2", d2).evaluate(x) == 2.0);
  CHECK(Expression::parse("x1*x2 + min(x1, x2) - max(x1, x2)", d2).evaluate(x) == 5.0);
  CHECK(Expression::parse("pow(x1, 3)", d2).evaluate(x) == 8.0);
  CHECK(Expression::parse("1e-3 * 2.5E2", d2).evaluate(x) == doctest::Approx(0.25));
}

TEST_CASE("smooth cutoff") {
  CHECK(smooth_cutoff(5.0, 10.0, 20.0) == 1.0);
  CHECK(smooth_cutoff(10.0, 10.0, 20.0) == 1.0);
  CHECK(smooth_cutoff(20.0, 10.0, 20.0) == 0.0);
  CHECK(smooth_cutoff(25.0, 10.0, 20.0) == 0.0);
  CHECK(smooth_cutoff(15.0, 10.0, 20.0) == doctest::Approx(0.5));
  double prev = 1.0;
  for (double r = 10.0; r <= 20.0; r += 0.25) {
    const double v = smooth_cutoff(r, 10.0, 20.0);
    CHECK(v <= prev);
    prev = v;
  }
}

TEST_CASE("parse-print round trip on random expressions") {
  std::mt19937_64 rng(11);
  const Dimension d2(2);
  const char* atoms[] = {"x1", "x2", "r", "1.5", "0.1", "3"};
  const char* unary[] = {"exp", "atan", "log", "sqrt"};
  std::function<std::string(int)> gen = [&](int depth) -> std::string {
    std::uniform_int_distribution<int> pick(0, depth > 0 ? 6 : 0);
    switch (pick(rng)) {
      case 0:
        return atoms[rng() % 6];
      case 1:
        return "(" + gen(depth - 1) + " + " + gen(depth - 1) + ")";
      case 2:
        return "(" + gen(depth - 1) + " * " + gen(depth - 1) + ")";
      case 3:
        return "-" + gen(depth - 1);
      case 4:
        return std::string(unary[rng() % 2]) + "(" + gen(depth - 1) + ")";
      case 5:
        return std::string(unary[2 + rng() % 2]) + "(1 + r^2 + " + "(" + gen(depth - 1) + ")^2)";
      default:
        return "max(" + gen(depth - 1) + ", " + gen(depth - 1) + ")";
    }
  };
  int compared = 0;
  for (int i = 0; i < 40; ++i) {
    const std::string src = gen(3);
    auto e1 = Expression::parse(src, d2);
    auto e2 = Expression::parse(e1.print(), d2);
    CHECK(e2.print() == e1.print());
    for (int k = 0; k < 100; ++k) {
      auto x = random_point(rng, 2, 2.0);
      double v1 = 0.0, v2 = 0.0;
      bool ok1 = true, ok2 = true;
      try { v1 = e1.evaluate(x); } catch (const DomainError&) { ok1 = false; }
      try { v2 = e2.evaluate(x); } catch (const DomainError&) { ok2 = false; }
      CHECK(ok1 == ok2);
      if (ok1 && ok2) {
        CHECK(v1 == v2);
        ++compared;
      }
    }
  }
  CHECK(compared > 1000);
}

TEST_CASE("eval_field examples") {
  const Dimension d2(2);
  auto zero = ScalarField::zero(d2);
  CHECK(zero(Point(d2, {3.0, 4.0})) == 0.0);
  auto sphere = ScalarField::from_expression(Expression::parse("log(2/(1+r^2))", d2));
  CHECK(sphere.is_radial());
  CHECK(std::abs(sphere(Point(d2, {0.6, 0.8}))) < 1e-15);
  auto cone = ScalarField::from_expression(Expression::parse("-(0.5/2)*log(1+r^2)", d2));
  CHECK(cone(Point(d2, {0.0, std::sqrt(3.0)})) == doctest::Approx(-0.25 * std::log(4.0)));
  CHECK_THROWS_AS(sphere(std::vector<double>{1.0}), DimensionError);
}

TEST_CASE("declared radial fields are spot-checked") {
  const Dimension d2(2);
  CHECK_THROWS_AS(ScalarField(d2, [](std::span<const double> x) { return x[0]; }, FieldCaps{.is_radial = true}),
                  NotRadial);
}

TEST_CASE("restrict_radial") {
  const Dimension d2(2);
  auto sphere = ScalarField::from_expression(Expression::parse("log(2/(1+r^2))", d2));
  auto prof = restrict_radial(sphere);
  CHECK(prof(0.0) == doctest::Approx(std::log(2.0)).epsilon(1e-15));
  for (double r : {1e-3, 0.37, 1.0, 2.5, 77.0, 5e4}) {
    CHECK(std::abs(prof(r) - (std::log(2.0) - std::log1p(r * r))) <= 1e-10 * (1.0 + std::abs(prof(r))));
  }
  auto zprof = restrict_radial(ScalarField::zero(d2));
  CHECK(zprof(3.0) == 0.0);
  auto x1 = ScalarField::from_expression(Expression::parse("x1", d2));
  CHECK_THROWS_AS(restrict_radial(x1), NotRadial);
}

TEST_CASE("radial profile derivatives") {
  auto prof = RadialProfile::sample([](double r) { return std::log1p(r * r); });
  for (double r : {0.5, 1.0, 3.0}) {
    CHECK(prof.derivative(r, 1) == doctest::Approx(2 * r / (1 + r * r)).epsilon(1e-6));
    CHECK(prof.derivative(r, 2) == doctest::Approx(2 * (1 - r * r) / ((1 + r * r) * (1 + r * r))).epsilon(1e-4));
  }
}

TEST_CASE("radial consistency under random rotations") {
  const Dimension d4(4);
  auto f = ScalarField::from_expression(Expression::parse("exp(-r^2) * cutoff(r, 1, 2) + log(1 + r^2)", d4));
  REQUIRE(f.is_radial());
  CHECK(radial_discrepancy(f, 50, 99, 1e-2, 1e2) <= 1e-10);
}

TEST_CASE("compact support is exact") {
  const Dimension d2(2);
  auto f = ScalarField::radial(d2, [](double r) { return r < 1.5 ? std::exp(-r) * smooth_cutoff(r, 1.0, 1.5) : 0.0; },
                               {}, 1.5);
  std::mt19937_64 rng(3);
  int checked = 0;
  while (checked < 50) {
    auto x = random_point(rng, 2, 10.0);
    if (norm(x) <= 1.5) continue;
    CHECK(f(x) == 0.0);
    ++checked;
  }
}

TEST_CASE("sample_grid") {
  const Dimension d2(2);
  auto zero = sample_grid(ScalarField::zero(d2), Box{{-1, -1}, {2, 3}}, 4);
  for (double v : zero.values) CHECK(v == 0.0);

  auto lin = sample_grid(ScalarField::from_expression(Expression::parse("x1", d2)), Box{{0, 0}, {1, 1}}, 3);
  REQUIRE(lin.values.size() == 9);
  for (int i = 0; i < 3; ++i) {
    for (int j = 0; j < 3; ++j) {
      const int idx[] = {i, j};
      CHECK(lin.values[lin.flat_index(idx)] == 0.5 * i);
    }
  }
  CHECK(lin.coordinate(0, 1) == 0.5);

  auto sph = sample_grid(ScalarField::from_expression(Expression::parse("log(2/(1+r^2))", d2)),
                         Box{{-1, -1}, {1, 1}}, 5);
  const int mid[] = {2, 2};
  CHECK(sph.values[sph.flat_index(mid)] == doctest::Approx(std::log(2.0)).epsilon(1e-15));

  CHECK_THROWS_AS(sample_grid(ScalarField::zero(d2), Box{{0, 0}, {1, 1}}, 1), InputError);
  auto bad = ScalarField::from_expression(Expression::parse("log(x1)", d2));
  try {
    sample_grid(bad, Box{{-1, -1}, {1, 1}}, 3);
    FAIL("expected domain error");
  } catch (const DomainError& e) {
    CHECK(std::string(e.what()).find("grid node (0,0)") != std::string::npos);
  }
}

TEST_CASE("radial table profile") {
  std::vector<double> r, v;
  for (int i = 0; i <= 40; ++i) {
    r.push_back(0.25 * i);
    v.push_back(-0.5 * std::log1p(r.back() * r.back()));
  }
  TableProfile t(r, v);
  CHECK(t(0.0) == 0.0);
  CHECK(t(3.1) == doctest::Approx(-0.5 * std::log1p(3.1 * 3.1)).epsilon(1e-4));
  // Log-linear continuation with slope r phi'(r) ~ -1.
  CHECK((t(1000.0) - t(100.0)) == doctest::Approx(-std::log(10.0)).epsilon(0.02));
}

TEST_CASE("metric spec schema") {
  using nlohmann::json;
  auto spec = parse_metric_spec(json::parse(R"j({"n": 2, "kind": "builtin", "name": "cone", "params": {"a": 0.5}})j"));
  CHECK(spec.name == "cone");
  CHECK(spec.params["a"] == 0.5);
  auto check_pointer = [](const char* doc, const std::string& ptr) {
    try {
      parse_metric_spec(json::parse(doc));
      FAIL("expected schema error");
    } catch (const SchemaError& e) {
      CHECK(e.pointer() == ptr);
    }
  };
  check_pointer(R"j({"n": 3, "kind": "builtin", "name": "flat"})j", "/n");
  check_pointer(R"j({"kind": "builtin"})j", "/n");
  check_pointer(R"j({"n": 2, "kind": "builtin", "name": "flat", "oops": 1})j", "/oops");
  check_pointer(R"j({"n": 2, "kind": "expression", "u": "log("})j", "/u");
  check_pointer(R"j({"n": 2, "kind": "radial-table", "nodes": [[0, 1], [0, 2]]})j", "/nodes/1/0");
  check_pointer(R"j({"n": 2, "kind": "builtin", "name": "cone", "params": {"a": "x"}})j", "/params/a");
  check_pointer(R"j({"n": 2, "kind": "nope"})j", "/kind");

  auto expr = parse_metric_spec(json::parse(R"j({"n": 2, "kind": "expression", "u": "log(2/(1+r^2))"})j"));
  auto f = field_from_spec(expr);
  CHECK(f(std::vector<double>{0.0, 0.0}) == doctest::Approx(std::log(2.0)));
  CHECK(parse_metric_spec(expr.to_json()).to_json() == expr.to_json());
}
