#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "pwle/fit.hpp"
#include "pwle/gauge.hpp"
#include "pwle/stats.hpp"
#include "pwle/threshold.hpp"
#include "pwle/types.hpp"

namespace pwle::sample {

// --- truncated-gamma radii --------------------------------------------------

/// One draw from Gamma(shape, rate) conditioned on exceeding `lower`, by
/// inverse-CDF on [F(lower), 1). Throws std::runtime_error when F(lower) is
/// numerically 1 (rate * lower too large to condition on).
double truncated_gamma_draw(int shape, double rate, double lower,
                            stats::Rng& rng);

/// `count` i.i.d. draws; every draw is strictly greater than `lower`.
vec_t sample_truncated_gamma(int shape, double rate, double lower, int count,
                             std::uint64_t seed);

// --- angular samplers -------------------------------------------------------

enum class Proposal { automatic, beta, dirichlet, uniform };

struct McmcOptions {
  Proposal proposal = Proposal::automatic;  // beta for d=2, dirichlet for d>=3
  int burn_in = 1000;
  int thinning = 1;
};

/**
 * @brief Source of exceedance angles for model simulation.
 *
 * Two kinds: `empirical` resamples the observed exceedance angles (keeping
 * each draw's stored threshold), and `mcmc` runs an independence
 * Metropolis-Hastings chain with stationary density proportional to
 * g(w)^{-d}. Proposals are beta (d = 2, including the signed-circle case,
 * where chain draws u in [0,1] map to the circle angle 4u - 2) or Dirichlet
 * (d >= 3), with parameters moment-matched to the exceedance angles and
 * floored at 1.01 per component, or uniform. Holds its own seeded RNG; not
 * shareable across threads while sampling.
 */
class AngularSampler {
 public:
  enum class Kind { empirical, mcmc };

  struct Draw {
    mat_t angles;      // ambient unit-L1 rows (signed for the circle domain)
    vec_t thresholds;  // stored r_tau per draw; empirical kind only
    bool has_thresholds = false;
  };

  static AngularSampler empirical(const threshold::ExceedanceSample& exc,
                                  std::uint64_t seed);
  static AngularSampler mcmc(const gauge::PwlGauge& target,
                             const threshold::ExceedanceSample& exc,
                             std::uint64_t seed, const McmcOptions& opts = {});

  Kind kind() const { return kind_; }
  int dim() const { return d_; }
  /// Resolved proposal family (never `automatic`); empirical kind reports
  /// `uniform` for lack of anything better.
  Proposal proposal() const { return prop_; }
  /// Fitted proposal parameters: (a, b) for beta, alpha for Dirichlet,
  /// all-ones for uniform, empty for empirical.
  const vec_t& proposal_params() const { return alpha_; }
  /// Accepted fraction of post-burn-in proposals; NaN before any MCMC draw
  /// or for the empirical kind.
  double acceptance_rate() const;

  Draw draw(int count);
  stats::Rng& rng() { return rng_; }

 private:
  AngularSampler(Kind kind, std::uint64_t seed);
  void mcmc_init(const threshold::ExceedanceSample& exc,
                 const McmcOptions& opts);
  void fit_proposal(const mat_t& chain_coords);

  // chain mechanics
  vec_t propose_state(double* log_q);
  double log_target(const vec_t& state) const;
  vec_t ambient(const vec_t& state) const;
  void step();

  Kind kind_;
  int d_ = 0;
  bool circle_ = false;  // signed Laplace circle domain
  Proposal prop_ = Proposal::uniform;
  // empirical pool
  mat_t pool_;
  vec_t pool_thresholds_;
  // mcmc state
  std::optional<gauge::PwlGauge> target_;
  vec_t alpha_;
  int burn_in_ = 1000, thin_ = 1;
  bool burned_ = false;
  vec_t state_;        // chain coordinates: [u] for d=2/circle, simplex point
  double state_score_ = 0.0;  // log pi(state) - log q(state)
  long long accepted_ = 0, proposed_ = 0;
  bool warned_ = false;
  stats::Rng rng_;
};

/// Convenience per the study pipelines: empirical angles when
/// `model_angles` is false (SS1/SS2), otherwise MCMC targeting the angular
/// gauge if present, else the fitted radial gauge (SS3-SS6).
AngularSampler sampler_for(const fit::FittedModel& model, bool model_angles,
                           std::uint64_t seed, const McmcOptions& opts = {});

/// Free-function form of AngularSampler::draw returning only the angles.
mat_t sample_angles(AngularSampler& sampler, int count);

// --- model simulation -------------------------------------------------------

struct SimulatedCloud {
  mat_t x;           // n* rows r_i * w_i in the data's margin coordinates
  mat_t angles;      // the sampled angles
  vec_t radii;       // truncated-gamma radii
  vec_t thresholds;  // r_tau used as each truncation point
};

/**
 * @brief Draw n* points from X | {R > r_tau(W)} under the fitted model:
 * angles from the sampler, radii from the truncated gamma with rate given by
 * the fitted radial gauge, truncated at r_tau(angle).
 *
 * Thresholds at sampled angles: the empirical sampler carries each draw's
 * stored value; for MCMC angles they come from `thr` (the KDE threshold
 * model) when given, otherwise from the gamma-implied curve
 * F_Ga^{-1}(tau; d, g(w)). Requires a fitted radial gauge.
 */
SimulatedCloud sample_exceedances(const fit::FittedModel& model,
                                  AngularSampler& sampler, int n_star,
                                  const threshold::ThresholdModel* thr = nullptr);

// --- extremal regions and probability estimation ----------------------------

/// Axis-aligned box, half-open per coordinate: lower_j <= x_j < upper_j.
/// Bounds may be infinite (+inf upper; -inf lower on the signed domain).
struct ExtremalRegion {
  vec_t lower;
  vec_t upper;
};

bool contains(const ExtremalRegion& region, const vec_t& x);

/**
 * @brief Check that the box lies beyond the threshold surface:
 * every probe point x has ||x||_1 > r_tau(x / ||x||_1). Probes are the box
 * corners plus ~10^3 grid points on the per-coordinate faces nearest the
 * origin; infinite bounds are clamped to max(opposite bound + 10,
 * clamp_hint) for probing only. Throws std::invalid_argument on violation
 * or malformed bounds.
 */
void validate_region(const ExtremalRegion& region,
                     const std::function<double(const vec_t&)>& r_tau,
                     double clamp_hint);

struct ProbabilityEstimate {
  double probability = 0.0;   // product of the two factors
  double se = 0.0;            // binomial SE of the conditional factor, scaled
  double conditional = 0.0;   // hits / n*
  double exceed_rate = 0.0;   // exceedance count / source size
  int hits = 0;
  int n_star = 0;
  double tau = 0.0;
};

/// Count cloud rows inside the region.
int count_in_region(const mat_t& x, const ExtremalRegion& region);

/// Assemble the estimate from an existing cloud (no validity check): the
/// conditional factor is the hit fraction, multiplied by the exceedance
/// rate. Zero hits report probability 0 with the one-sided rule-of-three
/// bound 3/n* as the conditional SE.
ProbabilityEstimate probability_from_cloud(const SimulatedCloud& cloud,
                                           const ExtremalRegion& region,
                                           double exceed_rate, double tau);

/**
 * @brief End-to-end estimator: validates the region against the model's
 * threshold surface, simulates n* exceedances, and multiplies the hit
 * fraction by the observed exceedance rate (exceedance count over source
 * rows). `thr` is used for thresholds at fresh angles as in
 * sample_exceedances.
 */
ProbabilityEstimate estimate_probability(const fit::FittedModel& model,
                                         AngularSampler& sampler,
                                         const ExtremalRegion& region,
                                         int n_star = 50000,
                                         const threshold::ThresholdModel* thr = nullptr);

// --- exports ----------------------------------------------------------------

/// Matrix rows as CSV with header x1,...,xd.
void write_points_csv(const std::string& path, const mat_t& x);

/// JSON report {region: {lower, upper}, estimate, se, conditional,
/// exceed_rate, hits, n_star, tau}; infinite bounds serialize as strings
/// "inf" / "-inf".
void write_probability_json(const std::string& path,
                            const ProbabilityEstimate& estimate,
                            const ExtremalRegion& region);

}  // namespace pwle::sample
