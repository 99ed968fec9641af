#pragma once

// Hand-rolled generators for property tests.

#include <cmath>
#include <random>
#include <vector>

#include "qflat/polynomial.hpp"

namespace qflat::testing {

inline std::vector<double> random_point(std::mt19937_64& rng, int n, double scale) {
  std::uniform_real_distribution<double> u(-scale, scale);
  std::vector<double> x(n);
  for (auto& c : x) c = u(rng);
  return x;
}

inline Polynomial random_integer_polynomial(std::mt19937_64& rng, Dimension dim, int max_degree, int terms) {
  std::uniform_int_distribution<int> coef(-5, 5);
  std::uniform_int_distribution<int> deg(0, max_degree);
  Polynomial p(dim);
  for (int t = 0; t < terms; ++t) {
    MultiIndex a(dim.value(), 0);
    int d = deg(rng);
    while (d-- > 0) a[rng() % dim.value()] += 1;
    p.add_term(a, coef(rng));
  }
  return p;
}

using qflat::random_polyharmonic;

}  // namespace qflat::testing
