#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "pwle/stats.hpp"
#include "pwle/types.hpp"

namespace pwle::data {

/// Marginal scale of a dataset's columns.
enum class Margins { raw, exponential, laplace };

std::string margins_name(Margins m);
Margins margins_from_name(const std::string& s);

/**
 * @brief Semiparametric marginal CDF: rank-based below a splice threshold,
 * generalized Pareto above it.
 *
 * The empirical part uses rank/(n+1) over the stored knots; the GPD tail is
 * spliced continuously at the threshold (the empirical splice_q quantile).
 */
struct MarginTransform {
  vec_t knots;          ///< sorted raw sample the transform was fitted on
  double splice_q = 0.95;
  double threshold = 0.0;  ///< raw-scale splice point (empirical splice_q quantile)
  double gpd_scale = 1.0;
  double gpd_shape = 0.0;
};

/// Fit the semiparametric marginal model to one column of raw data.
/// Requires at least 30 exceedances of the splice threshold.
MarginTransform fit_margin(const vec_t& column, double tail_q);

/// Survival function 1 - F of the fitted marginal model (numerically stable
/// deep in the tail).
double margin_sf(const MarginTransform& t, double x);
/// CDF of the fitted marginal model.
double margin_cdf(const MarginTransform& t, double x);

struct Dataset {
  mat_t x;  ///< n observations by d variables
  Margins margins = Margins::raw;
  std::vector<std::string> names;            ///< column names (x1..xd default)
  std::vector<MarginTransform> transforms;   ///< one per margin once transformed

  int size() const { return static_cast<int>(x.rows()); }
  int dim() const { return static_cast<int>(x.cols()); }
};

// --- simulators for the seven reference copulas ---

enum class Family {
  logistic,
  gaussian,
  inverted_logistic,
  asymmetric_logistic,
  mixture
};

std::string family_name(Family f);
Family family_from_name(const std::string& s);

/**
 * @brief Dependence model to simulate from, always with standard exponential
 * margins.
 *
 * Which fields matter depends on family: alpha (logistic, inverted_logistic),
 * sigma (gaussian: full correlation matrix), sets+alphas (asymmetric_logistic:
 * membership sets covering {0..d-1} and one dependence parameter per set),
 * components (mixture: exactly two, drawn with equal probability).
 */
struct CopulaSpec {
  Family family = Family::logistic;
  int d = 2;
  double alpha = 0.5;
  mat_t sigma;
  std::vector<std::vector<int>> sets;
  std::vector<double> alphas;
  std::vector<CopulaSpec> components;
};

/// Exchangeable Gaussian spec with all off-diagonal correlations rho.
CopulaSpec gaussian_spec(int d, double rho);

/// The study catalogue: which = 1..7 selects
/// 1: d=2 logistic alpha 0.4         2: d=2 logistic alpha 0.8
/// 3: d=2 Gaussian rho 0.8           4: d=2 inverted logistic alpha 0.7
/// 5: d=3 pairwise asymmetric logistic, alpha 0.4
/// 6: d=3 nested asymmetric logistic {1},{1,2},{2,3}, alpha 0.4
/// 7: d=3 equal mixture of asymmetric logistic and Gaussian rho 0.6
CopulaSpec study_distribution(int which);

/// Throws std::invalid_argument if the spec is malformed.
void validate(const CopulaSpec& spec);

/// Draw n observations in standard exponential margins. Deterministic in seed.
Dataset simulate(const CopulaSpec& spec, int n, std::uint64_t seed);

// --- marginal transformation ---

/// Transform every margin to standard exponential via the semiparametric CDF.
/// The values of `raw` are used as-is regardless of its margin tag.
Dataset to_exponential_margins(const Dataset& raw, double tail_q = 0.95);

/// Transform both margins of a bivariate dataset to standard Laplace.
Dataset to_laplace_margins(const Dataset& raw, double tail_q = 0.95);

// --- CSV + metadata sidecar ---

/// Path of the JSON metadata sidecar for a CSV path ("out.csv" -> "out.meta.json").
std::string meta_path(const std::string& csv_path);

/// Write header + full-precision rows, plus the metadata sidecar (margin
/// state, column names, fitted marginal transforms).
void write_csv(const Dataset& ds, const std::string& path);

/// Read a CSV written by write_csv or any numeric CSV with a header row.
/// Rows with missing, extra, or non-numeric entries are dropped and counted.
/// A metadata sidecar, if present, restores margin state and transforms.
Dataset read_csv(const std::string& path, int* dropped_rows = nullptr);

}  // namespace pwle::data
