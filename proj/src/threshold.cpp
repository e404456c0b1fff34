#include "pwle/threshold.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "pwle/mesh.hpp"

namespace pwle::threshold {

namespace {

// Integrated univariate epanechnikov kernel: int_{-1}^{u} 0.75 (1 - t^2) dt.
double epan_cdf(double u) {
  if (u <= -1.0) return 0.0;
  if (u >= 1.0) return 1.0;
  return 0.75 * u - 0.25 * u * u * u + 0.5;
}

}  // namespace

ThresholdModel::ThresholdModel(mat_t angles, vec_t radii, double tau,
                               double h_r, double h_w, Kernel kernel)
    : w_(std::move(angles)),
      r_(std::move(radii)),
      tau_(tau),
      h_r_(h_r),
      h_w_(h_w),
      kernel_(kernel) {
  if (r_.size() == 0 || w_.rows() != r_.size())
    throw std::invalid_argument("threshold: one radius per angle row required");
  if (!(tau_ > 0.0 && tau_ < 1.0))
    throw std::invalid_argument("threshold: tau must lie in (0,1)");
  if (!(h_r_ > 0.0) || !(h_w_ > 0.0))
    throw std::invalid_argument("threshold: bandwidths must be positive");
  if (!r_.allFinite() || !w_.allFinite())
    throw std::invalid_argument("threshold: data must be finite");
  order_.resize(r_.size());
  std::iota(order_.begin(), order_.end(), 0);
  std::sort(order_.begin(), order_.end(),
            [&](int a, int b) { return r_[a] < r_[b]; });
  r_sorted_.resize(r_.size());
  for (int j = 0; j < size(); ++j) r_sorted_[j] = r_[order_[j]];
}

ThresholdModel::Weights ThresholdModel::angular_weights(const vec_t& w) const {
  if (w.size() != w_.cols())
    throw std::invalid_argument("threshold: query angle has the wrong dimension");
  const int n = size();
  Weights wt;
  wt.a.resize(n);
  if (kernel_ == Kernel::gaussian) {
    // Work with log-weights relative to their maximum so a query far from the
    // data cannot underflow every term at once.
    double peak = -std::numeric_limits<double>::infinity();
    for (int j = 0; j < n; ++j) {
      const double d2 = (w.transpose() - w_.row(order_[j])).squaredNorm();
      wt.a[j] = -d2 / (2.0 * h_w_ * h_w_);
      peak = std::max(peak, wt.a[j]);
    }
    for (int j = 0; j < n; ++j) wt.a[j] = std::exp(wt.a[j] - peak);
  } else {
    for (int j = 0; j < n; ++j) {
      double prod = 1.0;
      for (Eigen::Index c = 0; c < w_.cols(); ++c) {
        const double u = (w[c] - w_(order_[j], c)) / h_w_;
        const double k = std::abs(u) < 1.0 ? 0.75 * (1.0 - u * u) : 0.0;
        prod *= k;
        if (prod == 0.0) break;
      }
      wt.a[j] = prod;
    }
  }
  wt.prefix.resize(n);
  double run = 0.0;
  for (int j = 0; j < n; ++j) wt.prefix[j] = run += wt.a[j];
  wt.total = run;
  if (!(wt.total > 0.0))
    throw std::runtime_error(
        "threshold: all angular weights vanish at this angle (sparse region "
        "for the chosen bandwidth)");
  return wt;
}

double ThresholdModel::cdf_from_weights(const Weights& wt, double r) const {
  // Outside a band around r the integrated radial kernel is exactly 0/1 for
  // epanechnikov and is 0/1 to ~1e-17 for gaussian, so only the band needs
  // pointwise kernel evaluations; the rest comes from the prefix sums.
  const double cut = kernel_ == Kernel::gaussian ? 8.5 * h_r_ : h_r_;
  const int n = size();
  const double* rs = r_sorted_.data();
  const int lo = static_cast<int>(std::lower_bound(rs, rs + n, r - cut) - rs);
  const int hi = static_cast<int>(std::upper_bound(rs, rs + n, r + cut) - rs);
  double s = lo > 0 ? wt.prefix[lo - 1] : 0.0;
  for (int j = lo; j < hi; ++j) {
    const double u = (r - rs[j]) / h_r_;
    s += wt.a[j] *
         (kernel_ == Kernel::gaussian ? stats::normal_cdf(u) : epan_cdf(u));
  }
  return s / wt.total;
}

double ThresholdModel::conditional_cdf(double r, const vec_t& w) const {
  if (!(r > 0.0))
    throw std::invalid_argument("threshold: conditional cdf needs r > 0");
  return cdf_from_weights(angular_weights(w), r);
}

double ThresholdModel::quantile(const vec_t& w) const {
  const Weights wt = angular_weights(w);
  double lo = 0.0;
  if (cdf_from_weights(wt, lo) >= tau_)
    throw std::runtime_error("threshold: cdf already reaches tau at r = 0");
  double hi = r_sorted_[size() - 1] + 10.0 * h_r_;
  for (int guard = 0; cdf_from_weights(wt, hi) < tau_; ++guard) {
    if (guard >= 60) throw std::runtime_error("threshold: no quantile bracket");
    hi *= 2.0;
  }
  double mid = 0.5 * (lo + hi);
  for (int it = 0; it < 200; ++it) {
    mid = 0.5 * (lo + hi);
    const double f = cdf_from_weights(wt, mid);
    if (std::abs(f - tau_) <= 1e-9) return mid;
    (f < tau_ ? lo : hi) = mid;
    if (hi - lo <= 1e-13 * (1.0 + hi)) break;
  }
  return mid;
}

ExceedanceSample extract_exceedances(const ThresholdModel& model,
                                     const mat_t& angles, const vec_t& radii) {
  if (angles.rows() != radii.size())
    throw std::invalid_argument("exceedances: one radius per angle row");
  std::vector<int> keep;
  std::vector<double> thr(radii.size());
  for (Eigen::Index i = 0; i < radii.size(); ++i) {
    thr[i] = model.quantile(angles.row(i).transpose());
    if (radii[i] > thr[i]) keep.push_back(static_cast<int>(i));
  }
  ExceedanceSample out;
  out.source_size = static_cast<int>(radii.size());
  out.angles.resize(keep.size(), angles.cols());
  out.radii.resize(keep.size());
  out.thresholds.resize(keep.size());
  for (std::size_t k = 0; k < keep.size(); ++k) {
    out.angles.row(k) = angles.row(keep[k]);
    out.radii[k] = radii[keep[k]];
    out.thresholds[k] = thr[keep[k]];
  }
  out.indices = std::move(keep);
  return out;
}

vec_t default_bandwidth_grid() {
  vec_t g(7);
  g << 0.01, 0.025, 0.05, 0.075, 0.1, 0.15, 0.2;
  return g;
}

vec_t check_score(const mat_t& angles, const vec_t& radii, double tau,
                  const vec_t& grid, const CheckScoreConfig& cfg) {
  const int n = static_cast<int>(radii.size());
  if (angles.rows() != n)
    throw std::invalid_argument("check_score: one radius per angle row");
  if (cfg.folds < 2) throw std::invalid_argument("check_score: need K >= 2");
  if (n < cfg.folds)
    throw std::invalid_argument("check_score: need at least one point per fold");
  if (grid.size() == 0)
    throw std::invalid_argument("check_score: empty hyperparameter grid");

  // Deterministic shuffled fold assignment.
  std::vector<int> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  stats::Rng rng(cfg.seed);
  for (int i = n - 1; i > 0; --i)
    std::swap(idx[i], idx[rng.integer(static_cast<std::uint64_t>(i) + 1)]);
  std::vector<int> fold_of(n);
  for (int pos = 0; pos < n; ++pos) fold_of[idx[pos]] = pos % cfg.folds;

  vec_t scores(grid.size());
  for (Eigen::Index g = 0; g < grid.size(); ++g) {
    const double h_r = cfg.vary_radial ? grid[g] : cfg.h_r;
    const double h_w = cfg.vary_radial ? cfg.h_w : grid[g];
    double fold_mean_sum = 0.0;
    for (int k = 0; k < cfg.folds; ++k) {
      int n_train = 0;
      for (int i = 0; i < n; ++i) n_train += fold_of[i] != k;
      mat_t wtr(n_train, angles.cols());
      vec_t rtr(n_train);
      int t = 0;
      for (int i = 0; i < n; ++i)
        if (fold_of[i] != k) {
          wtr.row(t) = angles.row(i);
          rtr[t++] = radii[i];
        }
      const ThresholdModel model(std::move(wtr), std::move(rtr), tau, h_r, h_w,
                                 cfg.kernel);
      double loss = 0.0;
      int n_test = 0;
      for (int i = 0; i < n; ++i)
        if (fold_of[i] == k) {
          loss += check_loss(radii[i] - model.quantile(angles.row(i).transpose()), tau);
          ++n_test;
        }
      fold_mean_sum += loss / n_test;
    }
    scores[g] = fold_mean_sum / cfg.folds;
  }
  return scores;
}

double select_bandwidth(const mat_t& angles, const vec_t& radii, double tau,
                        const vec_t& grid, const CheckScoreConfig& cfg) {
  const vec_t s = check_score(angles, radii, tau, grid, cfg);
  Eigen::Index best = 0;
  s.minCoeff(&best);
  return grid[best];
}

std::pair<mat_t, vec_t> split_radial_angular(const mat_t& x) {
  mat_t w(x.rows(), x.cols());
  vec_t r(x.rows());
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    const auto [ri, wi] = geom::decompose(x.row(i).transpose());
    r[i] = ri;
    w.row(i) = wi.transpose();
  }
  return {std::move(w), std::move(r)};
}

std::pair<mat_t, vec_t> split_radial_angular_laplace(const mat_t& x,
                                                     vec_t* arc) {
  if (x.cols() != 2)
    throw std::invalid_argument("laplace split: requires d = 2 data");
  mat_t w(x.rows(), 2);
  vec_t r(x.rows());
  if (arc) arc->resize(x.rows());
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    const auto [ri, ai] = geom::laplace_decompose(x(i, 0), x(i, 1));
    r[i] = ri;
    w.row(i) = geom::laplace_unit(ai).transpose();
    if (arc) (*arc)[i] = ai;
  }
  return {std::move(w), std::move(r)};
}

}  // namespace pwle::threshold
