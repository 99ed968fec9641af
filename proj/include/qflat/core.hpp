#pragma once

#include <cmath>
#include <cstddef>
#include <initializer_list>
#include <numbers>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace qflat {

// Error hierarchy. Every failure the library reports derives from Error so
// the CLI can map it onto an exit code.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Input problems: bad dimension, bad arguments, schema violations.
class InputError : public Error {
 public:
  using Error::Error;
};

class DimensionError : public InputError {
 public:
  using InputError::InputError;
};

class PreconditionError : public InputError {
 public:
  using InputError::InputError;
};

/// Numerical failures: domain errors, overflow, non-convergence.
class NumericError : public Error {
 public:
  using Error::Error;
};

class DomainError : public NumericError {
 public:
  using NumericError::NumericError;
};

class OverflowError : public NumericError {
 public:
  using NumericError::NumericError;
};

class QuadratureError : public NumericError {
 public:
  using NumericError::NumericError;
};

class NonIntegrable : public NumericError {
 public:
  using NumericError::NumericError;
};

class NotRadial : public NumericError {
 public:
  using NumericError::NumericError;
};

/// Ambient dimension n of R^n. Always even and at least 2.
class Dimension {
 public:
  explicit Dimension(int n) : n_(n) {
    if (n < 2 || n % 2 != 0) {
      throw DimensionError("dimension must be an even integer >= 2, got " + std::to_string(n));
    }
  }

  int value() const { return n_; }
  int half() const { return n_ / 2; }

  friend bool operator==(Dimension a, Dimension b) { return a.n_ == b.n_; }

 private:
  int n_;
};

/// A point of R^n with finite coordinates.
class Point {
 public:
  Point(Dimension dim, std::vector<double> coords) : coords_(std::move(coords)) {
    if (static_cast<int>(coords_.size()) != dim.value()) {
      throw DimensionError("point has " + std::to_string(coords_.size()) +
                           " coordinates, expected " + std::to_string(dim.value()));
    }
    for (double c : coords_) {
      if (!std::isfinite(c)) throw InputError("point coordinates must be finite");
    }
  }

  /// Origin of R^n.
  static Point origin(Dimension dim) { return Point(dim, std::vector<double>(dim.value(), 0.0)); }

  /// r * e_1.
  static Point on_axis(Dimension dim, double r) {
    std::vector<double> c(dim.value(), 0.0);
    c[0] = r;
    return Point(dim, std::move(c));
  }

  Dimension dim() const { return Dimension(static_cast<int>(coords_.size())); }
  std::span<const double> coords() const { return coords_; }
  double operator[](std::size_t i) const { return coords_[i]; }

  double norm() const {
    double s = 0.0;
    for (double c : coords_) s += c * c;
    return std::sqrt(s);
  }

 private:
  std::vector<double> coords_;
};

inline double norm(std::span<const double> x) {
  double s = 0.0;
  for (double c : x) s += c * c;
  return std::sqrt(s);
}

inline double distance(std::span<const double> x, std::span<const double> y) {
  double s = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) s += (x[i] - y[i]) * (x[i] - y[i]);
  return std::sqrt(s);
}

/// Constants attached to the round spheres and balls of a given dimension.
struct SphereConstants {
  int n;
  double sphere_volume;       // |S^n|, the n-sphere in R^{n+1}
  double unit_sphere_area;    // |S^{n-1}|, boundary of the unit ball in R^n
  double unit_ball_volume;    // omega_n
  double green_constant;      // 2 / ((n-1)! |S^n|)

  static SphereConstants of(Dimension dim) {
    const int n = dim.value();
    const double pi = std::numbers::pi;
    SphereConstants c{};
    c.n = n;
    c.sphere_volume = 2.0 * std::pow(pi, (n + 1) / 2.0) / std::tgamma((n + 1) / 2.0);
    c.unit_sphere_area = 2.0 * std::pow(pi, n / 2.0) / std::tgamma(n / 2.0);
    c.unit_ball_volume = c.unit_sphere_area / n;
    c.green_constant = 2.0 / (std::tgamma(static_cast<double>(n)) * c.sphere_volume);
    return c;
  }
};

}  // namespace qflat
