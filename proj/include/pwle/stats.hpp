#pragma once

#include <cstdint>
#include <functional>
#include <random>

#include "pwle/types.hpp"

namespace pwle::stats {

/**
 * @brief Deterministic random source.
 *
 * Wraps std::mt19937_64 but performs all distribution transforms itself
 * (inverse-CDF, Box-Muller, Marsaglia-Tsang, Chambers-Mallows-Stuck), so a
 * given seed yields the same stream on every platform and compiler.
 */
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : eng_(seed) {}

  /// Uniform draw on [0, 1).
  double uniform();
  /// Uniform draw on [a, b).
  double uniform(double a, double b);
  /// Standard normal draw.
  double normal();
  /// Standard exponential draw.
  double exponential();
  /// Gamma(shape, rate 1) draw; shape > 0.
  double gamma(double shape);
  /// Beta(a, b) draw.
  double beta(double a, double b);
  /// Dirichlet draw; returns a point on the unit simplex.
  vec_t dirichlet(const vec_t& alpha);
  /// Positive alpha-stable draw with Laplace transform exp(-t^alpha); 0<alpha<1.
  double positive_stable(double alpha);
  /// Uniform integer in [0, n).
  std::uint64_t integer(std::uint64_t n);

 private:
  std::mt19937_64 eng_;
};

// --- gamma distribution with integer shape (the radial model family) ---
// Closed forms: F(r; k, rate) = 1 - exp(-rate r) sum_{j<k} (rate r)^j / j!.

double erlang_log_pdf(double r, int shape, double rate);
double erlang_pdf(double r, int shape, double rate);
/// log of the survival function 1 - F; stable for large rate*r.
double erlang_log_sf(double r, int shape, double rate);
double erlang_sf(double r, int shape, double rate);
double erlang_cdf(double r, int shape, double rate);
/// Quantile: smallest r with F(r) >= p. Requires 0 <= p < 1.
double erlang_quantile(double p, int shape, double rate);

// --- normal distribution helpers ---

double normal_pdf(double x);
double normal_cdf(double x);
/// Inverse of normal_cdf; accurate to ~1e-14. Requires 0 < p < 1.
double normal_quantile(double p);

// --- standard Laplace distribution (unit rate, location 0) ---

double laplace_cdf(double x);
/// Inverse of laplace_cdf. Requires 0 < p < 1.
double laplace_quantile(double p);

/// Kolmogorov-Smirnov statistic sup_x |F_n(x) - x| for values in [0, 1].
/// The input need not be sorted.
double ks_uniform(const vec_t& u);

// --- derivative-free minimization ---

struct NelderMeadOptions {
  /// Convergence: stop once both the objective spread across the simplex and
  /// the largest vertex displacement fall below tol (relative to scale).
  double tol = 1e-10;
  /// Budget as a cap on objective evaluations.
  int max_evals = 20000;
  /// Edge length of the initial axis-aligned simplex around x0.
  double init_step = 0.1;
};

struct NelderMeadResult {
  vec_t x;
  double fval = 0.0;
  int evals = 0;
  bool converged = false;
};

/// Nelder-Mead simplex minimization with standard coefficients
/// (reflect 1, expand 2, contract 0.5, shrink 0.5). Deterministic.
NelderMeadResult nelder_mead(const std::function<double(const vec_t&)>& f,
                             const vec_t& x0,
                             const NelderMeadOptions& opts = {});

}  // namespace pwle::stats
