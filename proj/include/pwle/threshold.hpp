#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "pwle/stats.hpp"
#include "pwle/types.hpp"

namespace pwle::threshold {

enum class Kernel { gaussian, epanechnikov };

/// Check (pinball) loss of a residual y = r - r_hat at level tau.
inline double check_loss(double y, double tau) {
  return y * (tau - (y < 0.0 ? 1.0 : 0.0));
}

/**
 * @brief Kernel estimate of the conditional radial quantile r_tau(w).
 *
 * Given angle-radius pairs (w_i, r_i), the conditional CDF of R at angle w is
 * a ratio of kernel sums: angular weights k((w - w_i)/h_w) against the full
 * d-dimensional Euclidean difference, times the integrated radial kernel
 * K((r - r_i)/h_r). The gaussian kernel is multivariate with identity
 * correlation; the epanechnikov kernel is a product of univariate kernels.
 * No boundary correction is applied. Immutable once constructed.
 *
 * Angles are ambient d-dimensional coordinates: points of the unit simplex
 * for nonnegative data, or unit-circle coordinates (see geom::laplace_unit)
 * for the two-sided d=2 case.
 */
class ThresholdModel {
 public:
  ThresholdModel(mat_t angles, vec_t radii, double tau, double h_r = 0.05,
                 double h_w = 0.05, Kernel kernel = Kernel::gaussian);

  int size() const { return static_cast<int>(r_.size()); }
  int dim() const { return static_cast<int>(w_.cols()); }
  double tau() const { return tau_; }
  double h_r() const { return h_r_; }
  double h_w() const { return h_w_; }
  Kernel kernel() const { return kernel_; }
  const mat_t& angles() const { return w_; }
  const vec_t& radii() const { return r_; }

  /// F_hat(r | w); in [0,1], non-decreasing in r. Requires r > 0. Throws if
  /// every angular weight vanishes (epanechnikov in a sparse region).
  double conditional_cdf(double r, const vec_t& w) const;

  /// Solves conditional_cdf(r, w) = tau to within 1e-8 by bracketed
  /// bisection on [0, max r_i + 10 h_r], expanding geometrically if needed.
  double quantile(const vec_t& w) const;

 private:
  struct Weights {
    vec_t a;       // angular weights in radius-sorted order
    vec_t prefix;  // running sums of a
    double total;
  };
  Weights angular_weights(const vec_t& w) const;
  double cdf_from_weights(const Weights& wt, double r) const;

  mat_t w_;
  vec_t r_;
  double tau_, h_r_, h_w_;
  Kernel kernel_;
  std::vector<int> order_;  // index of the j-th smallest radius
  vec_t r_sorted_;
};

/// Points whose radius exceeds the conditional quantile at their own angle.
struct ExceedanceSample {
  mat_t angles;       // one row per exceedance
  vec_t radii;
  vec_t thresholds;   // r_tau evaluated at each angle
  std::vector<int> indices;  // rows of the source data that exceeded
  int source_size = 0;       // number of rows the sample was extracted from
};

/// Evaluate r_tau at every angle and keep the points beyond it.
ExceedanceSample extract_exceedances(const ThresholdModel& model,
                                     const mat_t& angles, const vec_t& radii);

// --- cross-validated bandwidth scoring ---

struct CheckScoreConfig {
  int folds = 5;
  std::uint64_t seed = 2024;   // deterministic fold shuffle
  Kernel kernel = Kernel::gaussian;
  double h_r = 0.05;           // held fixed while the grid varies h_w
  double h_w = 0.05;           // held fixed while the grid varies h_r
  bool vary_radial = false;    // grid applies to h_r instead of h_w
};

/// {0.01, 0.025, 0.05, 0.075, 0.1, 0.15, 0.2}
vec_t default_bandwidth_grid();

/// K-fold cross-validated check-loss score S(h) for each bandwidth in grid:
/// the mean over folds of the mean held-out check loss of r - r_tau(w).
vec_t check_score(const mat_t& angles, const vec_t& radii, double tau,
                  const vec_t& grid, const CheckScoreConfig& cfg = {});

/// Bandwidth minimizing check_score over the grid.
double select_bandwidth(const mat_t& angles, const vec_t& radii, double tau,
                        const vec_t& grid, const CheckScoreConfig& cfg = {});

// --- radial-angular splitting of exponential/Laplace-margin data ---

/// Rows of nonnegative data -> (simplex angles, L1 radii). Rows with zero
/// radius are rejected.
std::pair<mat_t, vec_t> split_radial_angular(const mat_t& x);

/// d=2 real-valued rows -> (unit-circle angle coordinates, L1 radii); if arc
/// is non-null it receives the scalar arc-length angles in [-2, 2).
std::pair<mat_t, vec_t> split_radial_angular_laplace(const mat_t& x,
                                                     vec_t* arc = nullptr);

}  // namespace pwle::threshold
