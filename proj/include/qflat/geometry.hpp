#pragma once

#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "qflat/core.hpp"
#include "qflat/field.hpp"
#include "qflat/quadrature.hpp"

namespace qflat {

/// Conformal metric g = e^{2u} |dx|^2.
struct MetricContext {
  ScalarField u;
  /// phi with u(x) = phi(|x|), present for radial metrics.
  RadialFn profile;
  /// t -> phi(e^t). Gallery metrics supply an overflow-free version so ray and
  /// volume tails can be followed to very large radii; derived from `profile`
  /// otherwise.
  RadialFn log_profile;
  /// User-asserted completeness; recorded, never decided.
  std::optional<bool> complete;
  /// Closed-form curvature density Q_g e^{nu} = (-Delta)^{n/2} u when known.
  std::optional<ScalarField> q_density;
  /// Free-form label carried into reports.
  std::string label;

  explicit MetricContext(ScalarField field, std::optional<bool> complete_hint = {});

  Dimension dim() const { return u.dim(); }
  bool is_radial() const { return static_cast<bool>(profile); }
  /// phi(e^t) for radial metrics.
  double phi_log(double t) const;
};

enum class Finiteness { finite, infinite, inconclusive };
const char* to_string(Finiteness f);
Finiteness finiteness_from(quad::Convergence c);

/// Largest t = log r followed by ray and volume tails: 1024 with an
/// overflow-free log profile, 256 otherwise.
double tail_cap(const MetricContext& ctx);

/// int_{B_R(center)} e^{n u}. OverflowError if n u > 700 at a sample.
double conformal_volume(const MetricContext& ctx, double R, std::span<const double> center = {});

struct VolumeTotal {
  Finiteness cls = Finiteness::inconclusive;
  double value = 0.0;  // total (finite) or the partial sum reached
};

/// int_{R^n} e^{n u} with the log-dyadic tail test (radial metrics; others
/// use sphere means about the origin).
VolumeTotal total_volume(const MetricContext& ctx);

struct GrowthEstimate {
  double exponent = 0.0;
  /// Envelope of the full-window fit and the fits on the first and last
  /// thirds of the window.
  double sup_exponent = 0.0;
  double inf_exponent = 0.0;
  double window[2] = {0.0, 0.0};
  double residual = 0.0;
  /// Window narrower than two decades.
  bool low_confidence = false;
  std::vector<std::pair<double, double>> samples;  // (R, quantity)
};

/// Least-squares slope of y against x (both already in log form) with the
/// window-split variants. `radii` are the sample radii, used for the window.
GrowthEstimate fit_growth(const std::vector<double>& radii, const std::vector<double>& x,
                          const std::vector<double>& y);

/// Geometric radii from lo to hi with `per_decade` points per decade.
std::vector<double> geometric_radii(double lo, double hi, int per_decade = 3);

/// Slope of log V_g(B_R) against log |B_R|.
GrowthEstimate volume_growth(const MetricContext& ctx, const std::vector<double>& radii);

/// (int_{B_{x,y}} e^{n u})^{1/n}, B_{x,y} the ball with diameter xy.
double measure_distance(const MetricContext& ctx, std::span<const double> x, std::span<const double> y);

struct RayLength {
  double value = 0.0;
  /// For r1 = infinity: outcome of the tail test (value is the partial sum
  /// when not finite). Always finite for bounded r1.
  Finiteness cls = Finiteness::finite;
  bool divergent() const { return cls == Finiteness::infinite; }
};

/// int_{r0}^{r1} e^{u(t d)} dt along the unit direction d; r1 may be infinite.
RayLength ray_length(const MetricContext& ctx, std::span<const double> direction, double r0, double r1);

struct GridSpec {
  Box box;
  int cells_per_axis = 64;
};

enum class DistanceMethod { automatic, radial_ray, grid_dijkstra };

struct DistanceResult {
  double value = 0.0;
  std::string method;  // "radial_ray" | "grid_dijkstra"
  std::optional<GridSpec> resolution;
  bool upper_bound = false;
};

/// Shortest paths on a 16-neighbour grid graph over a planar box. Edge weights
/// are trapezoidal integrals of e^u with four sub-intervals per edge. Query
/// points are joined by straight segments to the corners of their cell,
/// charged at the largest e^u sampled on the cell so the result is a true
/// metric.
class GridGraph {
 public:
  GridGraph(const MetricContext& ctx, GridSpec spec);

  const GridSpec& spec() const { return spec_; }
  double distance(std::span<const double> x, std::span<const double> y) const;

 private:
  /// Corners of the cell containing x with the segment cost to each.
  std::vector<std::pair<int, double>> attach(std::span<const double> x) const;
  std::vector<double> position(int v) const;
  /// Multi-source Dijkstra; `best` is an upper bound already known.
  double shortest_path(const std::vector<std::pair<int, double>>& sources,
                       const std::vector<std::pair<int, double>>& targets, double best) const;

  const MetricContext* ctx_;
  GridSpec spec_;
  int nodes_ = 0;
  std::vector<double> weight_;  // e^u at nodes
};

/// Grid box around two points with a 25% margin (at least 1 in each axis).
GridSpec grid_around(std::span<const double> x, std::span<const double> y, int cells_per_axis = 64);

/// d_g(x, y). automatic: exact ray integral when the metric is radial and one
/// point is the origin, otherwise the grid (n = 2 only; the grid spec defaults
/// to grid_around(x, y)).
DistanceResult geodesic_distance(const MetricContext& ctx, std::span<const double> x, std::span<const double> y,
                                 DistanceMethod method = DistanceMethod::automatic,
                                 std::optional<GridSpec> grid = {});

struct DiameterEstimate {
  Finiteness cls = Finiteness::inconclusive;
  std::optional<double> value;
};

/// Radial metrics: dyadic ratio test on the ray integral to infinity; the
/// value is the ray length L (antipodal rays form a closed loop of length 2L). Others: rays in sampled directions, decisive only if
/// every direction agrees (no value).
DiameterEstimate diameter_estimate(const MetricContext& ctx);

/// Slope of log d_g(x_R, p) against log R, x_R = p + R e_1.
GrowthEstimate distance_growth_exponent(const MetricContext& ctx, std::span<const double> p,
                                        const std::vector<double>& radii);

struct RatioStats {
  double min = 0.0;
  double max = 0.0;
  double mean = 0.0;
  int samples = 0;
};

/// Statistics of d_g(x, y) / delta(x, y) over the pairs.
RatioStats strong_ainfty_ratio(const MetricContext& ctx,
                               const std::vector<std::pair<std::vector<double>, std::vector<double>>>& pairs);

}  // namespace qflat
