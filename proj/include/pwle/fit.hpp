#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "pwle/gauge.hpp"
#include "pwle/mesh.hpp"
#include "pwle/threshold.hpp"
#include "pwle/types.hpp"

namespace pwle::fit {

/// Which likelihood the node scales are fitted under: the conditional radial
/// factor, the angular-density factor, or their product with one shared theta.
enum class Mode { radial, angular, joint };

std::string mode_name(Mode m);
Mode mode_from_name(const std::string& name);

/**
 * @brief Pipeline tag combining the fit mode, the box-touching adjustment,
 * and how extrapolation draws angles: SS1/SS2 = radial fit with empirical
 * angles (unbounded/bounded), SS3/SS4 = radial fit with a separately fitted
 * angular model, SS5/SS6 = joint fit. Angular-only fits return "angular".
 */
std::string pipeline_label(Mode mode, bool bounded, bool model_angles);

struct FitConfig {
  Mode mode = Mode::radial;
  /// Rescale nodes after fitting so the unit level set touches the unit box
  /// (radial and joint modes only).
  bool bounded = false;
  /// Weight of the gradient-smoothing penalty; defaults follow the mode
  /// (1 for radial/joint, 20 for angular) via default_lambda.
  double lambda = 1.0;
  /// Cap on objective evaluations per optimizer run; 0 means 400 per
  /// free parameter.
  int max_evals = 0;
  /// Relative tolerance of the simplex search.
  double tol = 1e-8;
  /// Pipeline tag (see pipeline_label); filled by fit() when empty.
  std::string ss_label;
};

/// Recommended penalty weight for a mode: 1 (radial/joint) or 20 (angular).
double default_lambda(Mode mode);

/// Throws std::invalid_argument on contradictory settings (negative lambda,
/// bounded angular fit, negative budget, non-positive tolerance).
void validate(const FitConfig& config);

/// Record of the box-touching iteration: how many rounds ran, which nodes
/// ended up frozen, and the frozen-set size after each round (strictly
/// increasing).
struct BoundingTrace {
  int iterations = 0;
  std::vector<int> frozen;
  std::vector<int> freeze_sizes;
};

struct FittedModel {
  /// Gauge fitted under the radial (or joint) likelihood.
  std::optional<gauge::PwlGauge> radial;
  /// Gauge fitted under the angular likelihood; for joint fits this shares
  /// the radial gauge's theta.
  std::optional<gauge::PwlGauge> angular;
  threshold::ExceedanceSample exceedances;
  FitConfig config;
  /// Quantile level of the thresholds the exceedances were extracted at.
  double tau = 0.0;
  /// Final penalized negative log-likelihood.
  double objective = 0.0;
  /// False if any optimizer run stopped on its evaluation budget.
  bool converged = false;
  BoundingTrace bounding;

  /// The gauge driving radial extrapolation: radial if present, else angular.
  const gauge::PwlGauge& primary() const;
};

// --- objective pieces (evaluated with the piecewise-linear gauge g(.; theta)
// --- on the given mesh) -----------------------------------------------------

/// Negative log of the conditional radial likelihood: gamma with shape d and
/// rate g(w_i), left-truncated at the per-point threshold.
double nll_radial(const vec_t& theta, const geom::SimplexMesh& mesh,
                  const threshold::ExceedanceSample& exc);

/// Negative log of the angular-density likelihood
/// sum_i d log g(w_i) + n log vol(G); scale-invariant in theta.
double nll_angular(const vec_t& theta, const geom::SimplexMesh& mesh,
                   const threshold::ExceedanceSample& exc);

/// Mean over nodes of the average squared gradient gap between adjacent
/// regions sharing that node; zero iff the gauge is globally linear.
double gradient_penalty(const vec_t& theta, const geom::SimplexMesh& mesh);

/// Data-driven start: theta_k = r_tau(nearest exceedance angle) / median
/// threshold, clamped to [1e-3, 1/||w*_k||_inf].
vec_t default_init(const geom::SimplexMesh& mesh,
                   const threshold::ExceedanceSample& exc);

/**
 * @brief Penalized maximum-likelihood fit of the node scales.
 *
 * Minimizes nll_<mode> + lambda * gradient_penalty over log theta with a
 * budgeted derivative-free simplex search (two chained runs, the second warm
 * started). Angular fits pin theta_1 = 1. The returned objective never
 * exceeds the objective at the initial point. If config.bounded is set the
 * box-touching adjustment runs afterwards. Non-convergence within the budget
 * is reported through FittedModel::converged, not an exception.
 *
 * @param init optional positive starting scales (empty -> default_init).
 */
FittedModel fit(const FitConfig& config, const geom::SimplexMesh& mesh,
                const threshold::ExceedanceSample& exc, double tau,
                const vec_t& init = vec_t());

/**
 * @brief Box-touching adjustment, in place.
 *
 * Repeatedly freezes the nodes attaining the per-coordinate maximum of the
 * scaled vertex coordinates theta_k |w*_kj| at theta_k = 1/||w*_k||_inf and
 * refits the remaining scales warm-started, until the global maximum is 1
 * (within [1 - 1e-6, 1 + 1e-10]). A model already at the fixed point returns
 * unchanged with zero iterations. Throws std::runtime_error if every node
 * freezes without reaching the fixed point; radial/joint fits only.
 */
void apply_bounding(FittedModel& model);

// --- penalty-strength selection by K-fold cross-validation ------------------

struct LambdaSelection {
  /// Grid value minimizing the CV score among valid cells (ties -> smallest).
  double lambda = 0.0;
  int best_index = -1;
  vec_t grid;
  /// Mean held-out unpenalized NLL per grid value; NaN where invalid.
  vec_t cv;
  /// grid x folds held-out scores; NaN where the fold fit failed.
  mat_t fold_scores;
  /// False where any fold failed (that grid value is excluded).
  std::vector<char> valid;
};

/**
 * @brief Pick the penalty weight by K-fold CV: each candidate is refit on
 * K-1 folds and scored by the unpenalized NLL of its mode on the held-out
 * fold. A fold failure invalidates the candidate. Deterministic fold
 * assignment from the seed. Throws std::runtime_error if no candidate
 * survives.
 */
LambdaSelection select_lambda(const FitConfig& config,
                              const geom::SimplexMesh& mesh,
                              const threshold::ExceedanceSample& exc,
                              double tau, const vec_t& grid, int folds = 5,
                              std::uint64_t seed = 2024);

// --- serialization ----------------------------------------------------------

/// JSON snapshot of a fitted model: mesh, node scales per gauge, config, tau,
/// objective, convergence flag, bounding trace. Exceedances are not stored
/// (they belong to the data files).
void save_model(const FittedModel& model, const std::string& path);

/// Rebuild a model from save_model output; exceedances come back empty.
FittedModel load_model(const std::string& path);

}  // namespace pwle::fit
