#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "pwle/fit.hpp"
#include "pwle/gauge.hpp"
#include "pwle/sample.hpp"
#include "pwle/threshold.hpp"
#include "pwle/types.hpp"

namespace pwle::diag {

/**
 * @brief Probability-integral-transform diagnostics for the fitted radial
 * model.
 *
 * For exceedance i with angle w_i, radius r_i, and threshold t_i, the PIT
 * value is u_i = [F(r_i) - F(t_i)] / [1 - F(t_i)] with F the gamma CDF of
 * shape d and rate g(w_i). Under a correct model the u_i are iid uniform.
 * The paired columns follow plotting convention: for the i-th order
 * statistic, empirical_p = i/(n+1) and model_p = u_(i); on the unit
 * exponential scale empirical_q = -log(1 - u_(i)) and
 * model_q = -log(1 - i/(n+1)).
 */
struct PpQq {
  vec_t u;  ///< PIT values in input order (unsorted)
  vec_t empirical_p, model_p, empirical_q, model_q;
};

PpQq pp_qq_data(const fit::FittedModel& model,
                const threshold::ExceedanceSample& exc);
/// Convenience overload on the model's own exceedances.
PpQq pp_qq_data(const fit::FittedModel& model);

/**
 * @brief The level set exceeded once per T observations on average: at each
 * angle w the radius is the gamma quantile F^{-1}(1 - 1/T) with shape d and
 * rate g(w). Thresholds here are the model-implied gamma quantiles, so at
 * T = 1/(1-tau) the curve is the model's own tau-quantile curve.
 */
struct ReturnCurve {
  double T = 0.0;
  mat_t angles;  ///< one angle per row
  vec_t radii;
};

/// n_angles <= 0 picks 500 (d = 2, simplex or circle) or 2000 (d >= 3).
/// Throws std::invalid_argument if T < 1/(1-tau).
ReturnCurve return_curve(const fit::FittedModel& model, double T,
                         int n_angles = 0);

/// Fraction of rows of x lying beyond the T-observation return level, i.e.
/// with radius exceeding the curve at their own angle. Calibration: under a
/// correct model this is close to 1/T. Rows are read in the gauge's geometry
/// (L1 angles, or signed-circle angles for Laplace-margin models).
double proportion_beyond(const fit::FittedModel& model, const mat_t& x,
                         double T);

/**
 * @brief Joint tail-dependence coefficient chi_C(u): the probability that
 * every margin indexed by C is simultaneously beyond its u-quantile, divided
 * by 1 - u. Margins are standard exponential, matching the model scale.
 */
struct ChiEstimate {
  std::vector<int> C;  ///< 0-based margin indices
  vec_t u;
  vec_t empirical;  ///< NaN where no data was supplied
  vec_t model;
  vec_t se;  ///< Monte Carlo SE of the model values
  double u0 = 0.0;
};

/// Smallest valid level: u0 = F_X(max_w min_{j in C} r_tau(w) w_j) with r_tau
/// the model-implied tau-quantile, maximized over a simplex mesh of ~10^3
/// (d = 2, 3) or ~10^4 (d = 4) angles; F_X standard exponential. Below u0 the
/// region B_u^C dips inside the threshold surface. Simplex geometry only.
double u0_level(const fit::FittedModel& model, const std::vector<int>& C);

/// The extremal region behind chi_C(u): lower bound -log(1-u) on the margins
/// in C, 0 elsewhere, unbounded above.
sample::ExtremalRegion chi_region(int d, const std::vector<int>& C, double u);

/**
 * @brief Model chi_C(u) over a grid of levels from one simulated exceedance
 * cloud of n_star points (shared across levels, so the curve is smooth in u).
 * If `data` is non-null its rank-based empirical counterpart fills
 * `empirical`. Requires u >= u0_level(model, C) for every grid entry.
 */
ChiEstimate chi_model(const fit::FittedModel& model,
                      sample::AngularSampler& sampler,
                      const std::vector<int>& C, const vec_t& u_grid,
                      int n_star = 50000, const mat_t* data = nullptr);

/// Rank-based empirical chi: margins are reduced to ranks/n, so the value is
/// exactly 1 for singleton C at levels u = k/n regardless of the input
/// margins' scale.
vec_t chi_empirical(const mat_t& x, const std::vector<int>& C,
                    const vec_t& u_grid);

/// Pointwise iid-bootstrap band (percentile method) for chi_empirical.
struct ChiBand {
  vec_t lower, upper;
};
ChiBand chi_empirical_band(const mat_t& x, const std::vector<int>& C,
                           const vec_t& u_grid, int n_boot = 200,
                           std::uint64_t seed = 0, double alpha = 0.05);

/**
 * @brief Boundary samples of the unit level set {g <= 1}: per grid angle w
 * the boundary point is (1/g(w)) w at radius 1/g(w). `dropped` >= 0 marks a
 * 3-D projection of a 4-D set (see limit_set_projections).
 */
struct LimitSetExport {
  mat_t angles;
  vec_t radii;
  int dropped = -1;
};

/// d <= 3 only. Grid of `resolution` angles over the simplex (or the signed
/// circle when circle = true, d = 2).
LimitSetExport export_limit_set(const gauge::GaugeFn& g, int d, int resolution,
                                bool circle = false);
LimitSetExport export_limit_set(const gauge::PwlGauge& g, int resolution);

/// d = 4 only: the four 3-D shadows of the limit set, one per dropped
/// coordinate, each obtained by minimizing the gauge over the dropped
/// coordinate on a mesh of `mesh_len` points (0 to the largest kept angle
/// coordinate) at every 3-simplex grid angle.
std::vector<LimitSetExport> limit_set_projections(const gauge::GaugeFn& g,
                                                  int d, int resolution,
                                                  int mesh_len = 50);
std::vector<LimitSetExport> limit_set_projections(const gauge::PwlGauge& g,
                                                  int resolution,
                                                  int mesh_len = 50);

// --- CSV export -------------------------------------------------------------

/// Columns: empirical_p, model_p, empirical_q, model_q.
void write_ppqq_csv(const std::string& path, const PpQq& data);
/// Columns: w1..wd, r.
void write_return_curve_csv(const std::string& path, const ReturnCurve& curve);
/// Columns: u, empirical, model, se.
void write_chi_csv(const std::string& path, const ChiEstimate& chi);
/// Columns: w1..wd, r.
void write_limit_set_csv(const std::string& path, const LimitSetExport& e);

}  // namespace pwle::diag
