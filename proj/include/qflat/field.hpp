#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "qflat/core.hpp"
#include "qflat/expression.hpp"

namespace qflat {

using Evaluator = std::function<double(std::span<const double>)>;
using RadialFn = std::function<double(double)>;
using GradientFn = std::function<void(std::span<const double>, std::span<double>)>;

/// Optional structure a field can advertise. Everything here is a promise
/// the numerical routines rely on; radial promises are spot-checked when the
/// field is constructed.
struct FieldCaps {
  bool is_radial = false;
  /// phi with f(x) = phi(|x|). Filled in from the evaluator when absent.
  RadialFn radial;
  /// chain[k-1] evaluates Delta^k f, k = 1..n/2 (may be shorter).
  std::vector<Evaluator> laplacian_chain;
  GradientFn gradient;
  /// f vanishes for |x| > support_radius.
  std::optional<double> support_radius;
  /// t -> e^{n t} phi(e^t). Lets slowly decaying radial densities be
  /// integrated at radii where phi itself underflows.
  RadialFn weighted_radial;
  /// Radii where phi has a kink or jump; quadrature splits there.
  std::vector<double> breakpoints;
};

/// Immutable scalar function on R^n.
class ScalarField {
 public:
  ScalarField(Dimension dim, Evaluator eval, FieldCaps caps = {});

  static ScalarField constant(Dimension dim, double c);
  static ScalarField zero(Dimension dim) { return constant(dim, 0.0); }
  static ScalarField from_expression(const Expression& expr);
  /// Radial field from its profile. Chain entries (if given) are radial
  /// profiles of Delta^k f.
  static ScalarField radial(Dimension dim, RadialFn phi, std::vector<RadialFn> chain = {},
                            std::optional<double> support_radius = {});

  Dimension dim() const { return Dimension(n_); }
  const FieldCaps& caps() const { return *caps_; }
  bool is_radial() const { return caps_->is_radial; }

  /// Evaluates and rejects non-finite values with DomainError.
  double operator()(std::span<const double> x) const;
  double operator()(const Point& x) const;
  /// Raw evaluation without the dimension and finiteness checks (hot loops).
  double eval_unchecked(std::span<const double> x) const { return (*eval_)(x); }

  /// phi(r) for radial fields; NotRadial otherwise.
  double radial_value(double r) const;

  /// Delta^k f at x from the analytic chain, if available.
  bool has_laplacian_chain(int k) const {
    return k >= 1 && static_cast<int>(caps_->laplacian_chain.size()) >= k;
  }

 private:
  int n_;
  std::shared_ptr<const Evaluator> eval_;
  std::shared_ptr<const FieldCaps> caps_;
};

ScalarField operator+(const ScalarField& a, const ScalarField& b);
ScalarField operator*(double s, const ScalarField& f);

/// Rotation spot check: compares f(x) with f(|x| v) for random unit v at
/// random points. Returns the largest discrepancy seen.
double radial_discrepancy(const ScalarField& f, int samples, std::uint64_t seed,
                          double r_min = 1e-3, double r_max = 1e3);

/// Cubic spline in t = log r on a geometric grid, with the exact profile as
/// fallback outside the grid and whenever validation failed.
struct ProfileGrid {
  double r_min = 1e-6;
  double r_max = 1e6;
  int nodes_per_decade = 64;
};

class RadialProfile {
 public:
  using Grid = ProfileGrid;

  static RadialProfile sample(RadialFn phi, double tolerance = 1e-10, Grid grid = {});

  double operator()(double r) const;
  /// d^k phi / dr^k. Orders 1 and 2 come from the spline inside the grid;
  /// higher orders and out-of-grid radii use differences of the exact profile.
  double derivative(double r, int order) const;

  const Grid& grid() const { return grid_; }
  double validation_error() const { return validation_error_; }
  bool spline_active() const { return spline_active_; }

 private:
  struct Spline;
  Grid grid_;
  RadialFn exact_;
  std::shared_ptr<const Spline> spline_;
  double validation_error_ = 0.0;
  bool spline_active_ = false;
};

/// Radial profile of f; NotRadial if f fails the rotation check at any
/// validation radius (tolerance 1e-10 relative to 1 + |f|).
RadialProfile restrict_radial(const ScalarField& f, double tolerance = 1e-10);

/// Natural cubic spline through (r_i, v_i), r_0 may be 0 (then phi'(0) = 0 is
/// imposed). Beyond the last node the profile continues as
/// v_N + r_N phi'(r_N) log(r / r_N).
class TableProfile {
 public:
  TableProfile(std::vector<double> r, std::vector<double> v);
  double operator()(double r) const;

 private:
  std::vector<double> r_, v_, m_;  // m_ = second derivatives at nodes
  double tail_slope_ = 0.0;        // r phi'(r) at the last node
};

/// Axis-aligned box and the dense node samples of a field on it.
struct Box {
  std::vector<double> lo, hi;
};

struct GridField {
  Box box;
  int nodes_per_axis = 0;
  std::vector<double> values;  // row-major, axis 0 slowest

  /// Coordinate of node index i along an axis: lo + i (hi - lo) / (N - 1).
  double coordinate(int axis, int i) const;
  std::size_t flat_index(std::span<const int> idx) const;
};

/// Samples f at nodes_per_axis^n nodes. Evaluation errors are rethrown with
/// the offending node index.
GridField sample_grid(const ScalarField& f, const Box& box, int nodes_per_axis);

}  // namespace qflat
