#include "pwle/sample.hpp"

#include <cmath>
#include <fstream>
#include <iostream>
#include <limits>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

#include "pwle/mesh.hpp"

namespace pwle::sample {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

double log_beta_pdf(double u, double a, double b) {
  if (u <= 0.0 || u >= 1.0) return -kInf;
  return (a - 1.0) * std::log(u) + (b - 1.0) * std::log1p(-u) -
         (std::lgamma(a) + std::lgamma(b) - std::lgamma(a + b));
}

double log_dirichlet_pdf(const vec_t& w, const vec_t& alpha) {
  double s = std::lgamma(alpha.sum());
  for (int j = 0; j < alpha.size(); ++j) {
    if (w[j] <= 0.0) return -kInf;
    s += (alpha[j] - 1.0) * std::log(w[j]) - std::lgamma(alpha[j]);
  }
  return s;
}

// Method-of-moments beta parameters for values in [0, 1], floored at 1.01.
std::pair<double, double> fit_beta_moments(const vec_t& u) {
  const double m = u.mean();
  const double v = (u.array() - m).square().mean();
  if (!(v > 1e-12))
    throw std::runtime_error(
        "angular proposal fit failed: degenerate exceedance angles");
  const double common = m * (1.0 - m) / v - 1.0;
  if (!std::isfinite(common))
    throw std::runtime_error("angular proposal fit failed");
  return {std::max(1.01, m * common), std::max(1.01, (1.0 - m) * common)};
}

// Dirichlet parameters: per-coordinate concentration estimates averaged.
vec_t fit_dirichlet_moments(const mat_t& w) {
  const int d = static_cast<int>(w.cols());
  vec_t mean = w.colwise().mean();
  double a0 = 0.0;
  int used = 0;
  for (int j = 0; j < d; ++j) {
    const double v = (w.col(j).array() - mean[j]).square().mean();
    if (v > 1e-12) {
      const double s = mean[j] * (1.0 - mean[j]) / v - 1.0;
      if (std::isfinite(s) && s > 0.0) {
        a0 += s;
        ++used;
      }
    }
  }
  if (used == 0)
    throw std::runtime_error(
        "angular proposal fit failed: degenerate exceedance angles");
  a0 /= used;
  vec_t alpha(d);
  for (int j = 0; j < d; ++j) alpha[j] = std::max(1.01, mean[j] * a0);
  return alpha;
}

}  // namespace

// --- truncated gamma --------------------------------------------------------

double truncated_gamma_draw(int shape, double rate, double lower,
                            stats::Rng& rng) {
  if (shape < 1) throw std::invalid_argument("truncated gamma: shape must be >= 1");
  if (!(rate > 0.0)) throw std::invalid_argument("truncated gamma: rate must be > 0");
  if (!(lower >= 0.0)) throw std::invalid_argument("truncated gamma: lower bound must be >= 0");
  const double sf0 = lower > 0.0 ? stats::erlang_sf(lower, shape, rate) : 1.0;
  if (!(sf0 > 1e-14))
    throw std::runtime_error(
        "truncated gamma: survival mass above the lower bound is numerically zero");
  double p = 1.0 - sf0 * (1.0 - rng.uniform());
  p = std::min(p, std::nextafter(1.0, 0.0));
  double r = stats::erlang_quantile(p, shape, rate);
  if (r <= lower) r = std::nextafter(lower, kInf);
  return r;
}

vec_t sample_truncated_gamma(int shape, double rate, double lower, int count,
                             std::uint64_t seed) {
  if (count < 0) throw std::invalid_argument("truncated gamma: count must be >= 0");
  stats::Rng rng(seed);
  vec_t out(count);
  for (int i = 0; i < count; ++i)
    out[i] = truncated_gamma_draw(shape, rate, lower, rng);
  return out;
}

// --- AngularSampler ---------------------------------------------------------

AngularSampler::AngularSampler(Kind kind, std::uint64_t seed)
    : kind_(kind), rng_(seed) {}

AngularSampler AngularSampler::empirical(const threshold::ExceedanceSample& exc,
                                         std::uint64_t seed) {
  if (exc.radii.size() == 0)
    throw std::invalid_argument("empirical angular sampler: no exceedances");
  if (exc.thresholds.size() != exc.radii.size() ||
      exc.angles.rows() != exc.radii.size())
    throw std::invalid_argument("empirical angular sampler: inconsistent sample");
  AngularSampler s(Kind::empirical, seed);
  s.d_ = static_cast<int>(exc.angles.cols());
  s.pool_ = exc.angles;
  s.pool_thresholds_ = exc.thresholds;
  s.prop_ = Proposal::uniform;
  return s;
}

AngularSampler AngularSampler::mcmc(const gauge::PwlGauge& target,
                                    const threshold::ExceedanceSample& exc,
                                    std::uint64_t seed,
                                    const McmcOptions& opts) {
  AngularSampler s(Kind::mcmc, seed);
  s.target_ = target;
  s.d_ = target.dim();
  s.circle_ = target.mesh().kind == geom::MeshKind::LaplaceCircle;
  s.mcmc_init(exc, opts);
  return s;
}

void AngularSampler::mcmc_init(const threshold::ExceedanceSample& exc,
                               const McmcOptions& opts) {
  if (opts.burn_in < 0)
    throw std::invalid_argument("angular sampler: burn-in must be >= 0");
  if (opts.thinning < 1)
    throw std::invalid_argument("angular sampler: thinning must be >= 1");
  burn_in_ = opts.burn_in;
  thin_ = opts.thinning;

  prop_ = opts.proposal;
  if (prop_ == Proposal::automatic)
    prop_ = (circle_ || d_ == 2) ? Proposal::beta : Proposal::dirichlet;
  if (prop_ == Proposal::beta && !(circle_ || d_ == 2))
    throw std::invalid_argument("angular sampler: beta proposal requires d = 2");
  if (prop_ == Proposal::dirichlet && (circle_ || d_ < 3))
    throw std::invalid_argument(
        "angular sampler: Dirichlet proposal requires a simplex domain with d >= 3");

  if (prop_ == Proposal::uniform) {
    alpha_ = vec_t::Ones(circle_ || d_ == 2 ? 2 : d_);
  } else {
    if (exc.angles.rows() < 2)
      throw std::invalid_argument(
          "angular sampler: need at least 2 exceedance angles to fit a proposal");
    if (exc.angles.cols() != d_)
      throw std::invalid_argument(
          "angular sampler: exceedance dimension does not match the target gauge");
    if (prop_ == Proposal::beta) {
      vec_t u(exc.angles.rows());
      for (int i = 0; i < u.size(); ++i) {
        if (circle_) {
          const double arc =
              geom::laplace_decompose(exc.angles(i, 0), exc.angles(i, 1)).second;
          u[i] = (arc + 2.0) / 4.0;
        } else {
          u[i] = exc.angles(i, 0);
        }
      }
      auto [a, b] = fit_beta_moments(u);
      alpha_ = vec_t(2);
      alpha_ << a, b;
    } else {
      alpha_ = fit_dirichlet_moments(exc.angles);
    }
  }

  // start the chain at a proposal draw
  double lq = 0.0;
  state_ = propose_state(&lq);
  state_score_ = log_target(state_) - lq;
}

vec_t AngularSampler::propose_state(double* log_q) {
  if (prop_ == Proposal::dirichlet) {
    vec_t w = rng_.dirichlet(alpha_);
    *log_q = log_dirichlet_pdf(w, alpha_);
    return w;
  }
  // scalar chain coordinate (simplex d=2 first coordinate, or circle [0,1])
  vec_t s(1);
  if (prop_ == Proposal::beta) {
    s[0] = rng_.beta(alpha_[0], alpha_[1]);
    *log_q = log_beta_pdf(s[0], alpha_[0], alpha_[1]);
  } else if (d_ == 2 || circle_) {
    s[0] = rng_.uniform();
    *log_q = 0.0;
  } else {
    vec_t w = rng_.dirichlet(vec_t::Ones(d_));
    *log_q = 0.0;  // constant over the simplex; cancels in the ratio
    return w;
  }
  return s;
}

double AngularSampler::log_target(const vec_t& state) const {
  double g;
  if (circle_) {
    g = target_->at_angle(4.0 * state[0] - 2.0);
  } else if (d_ == 2) {
    vec_t w(2);
    w << state[0], 1.0 - state[0];
    g = target_->at_angle(w);
  } else {
    g = target_->at_angle(state);
  }
  return -d_ * std::log(g);
}

vec_t AngularSampler::ambient(const vec_t& state) const {
  if (circle_) {
    Eigen::Vector2d v = geom::laplace_unit(geom::laplace_wrap(4.0 * state[0] - 2.0));
    vec_t w(2);
    w << v[0], v[1];
    return w;
  }
  if (d_ == 2) {
    vec_t w(2);
    w << state[0], 1.0 - state[0];
    return w;
  }
  return state;
}

void AngularSampler::step() {
  double lq = 0.0;
  vec_t cand = propose_state(&lq);
  const double score = log_target(cand) - lq;
  if (burned_) ++proposed_;
  if (std::log(rng_.uniform()) < score - state_score_) {
    state_ = std::move(cand);
    state_score_ = score;
    if (burned_) ++accepted_;
  }
}

double AngularSampler::acceptance_rate() const {
  if (kind_ != Kind::mcmc || proposed_ == 0)
    return std::numeric_limits<double>::quiet_NaN();
  return static_cast<double>(accepted_) / static_cast<double>(proposed_);
}

AngularSampler::Draw AngularSampler::draw(int count) {
  if (count < 0) throw std::invalid_argument("angular sampler: count must be >= 0");
  Draw out;
  out.angles.resize(count, d_);
  if (kind_ == Kind::empirical) {
    out.thresholds.resize(count);
    out.has_thresholds = true;
    const auto n = static_cast<std::uint64_t>(pool_.rows());
    for (int i = 0; i < count; ++i) {
      const auto idx = static_cast<Eigen::Index>(rng_.integer(n));
      out.angles.row(i) = pool_.row(idx);
      out.thresholds[i] = pool_thresholds_[idx];
    }
    return out;
  }
  if (!burned_) {
    for (int t = 0; t < burn_in_; ++t) step();
    burned_ = true;
  }
  for (int i = 0; i < count; ++i) {
    for (int t = 0; t < thin_; ++t) step();
    out.angles.row(i) = ambient(state_).transpose();
  }
  if (!warned_ && proposed_ >= 1000 && acceptance_rate() < 0.01) {
    std::cerr << "warning: angular MCMC acceptance rate "
              << acceptance_rate() << " is below 1%\n";
    warned_ = true;
  }
  return out;
}

AngularSampler sampler_for(const fit::FittedModel& model, bool model_angles,
                           std::uint64_t seed, const McmcOptions& opts) {
  if (!model_angles) return AngularSampler::empirical(model.exceedances, seed);
  const gauge::PwlGauge& target =
      model.angular ? *model.angular : model.primary();
  return AngularSampler::mcmc(target, model.exceedances, seed, opts);
}

mat_t sample_angles(AngularSampler& sampler, int count) {
  return sampler.draw(count).angles;
}

// --- model simulation -------------------------------------------------------

SimulatedCloud sample_exceedances(const fit::FittedModel& model,
                                  AngularSampler& sampler, int n_star,
                                  const threshold::ThresholdModel* thr) {
  if (!model.radial)
    throw std::invalid_argument(
        "sample_exceedances: the model has no fitted radial gauge");
  if (n_star < 0)
    throw std::invalid_argument("sample_exceedances: n_star must be >= 0");
  const gauge::PwlGauge& rg = *model.radial;
  const int d = rg.dim();
  if (sampler.dim() != d)
    throw std::invalid_argument(
        "sample_exceedances: sampler dimension does not match the model");

  SimulatedCloud cloud;
  AngularSampler::Draw dr = sampler.draw(n_star);
  cloud.angles = std::move(dr.angles);
  cloud.radii.resize(n_star);
  cloud.thresholds.resize(n_star);
  cloud.x.resize(n_star, d);

  const bool implied = !dr.has_thresholds && thr == nullptr;
  if (implied && !(model.tau > 0.0 && model.tau < 1.0))
    throw std::invalid_argument(
        "sample_exceedances: model tau outside (0,1); cannot imply thresholds");

  for (int i = 0; i < n_star; ++i) {
    const vec_t w = cloud.angles.row(i).transpose();
    const double rate = rg.at_angle(w);
    double rt;
    if (dr.has_thresholds)
      rt = dr.thresholds[i];
    else if (thr != nullptr)
      rt = thr->quantile(w);
    else
      rt = stats::erlang_quantile(model.tau, d, rate);
    cloud.thresholds[i] = rt;
    cloud.radii[i] = truncated_gamma_draw(d, rate, rt, sampler.rng());
    cloud.x.row(i) = cloud.radii[i] * cloud.angles.row(i);
  }
  return cloud;
}

// --- regions and probabilities ----------------------------------------------

bool contains(const ExtremalRegion& region, const vec_t& x) {
  if (x.size() != region.lower.size()) return false;
  for (int j = 0; j < x.size(); ++j)
    if (!(region.lower[j] <= x[j] && x[j] < region.upper[j])) return false;
  return true;
}

void validate_region(const ExtremalRegion& region,
                     const std::function<double(const vec_t&)>& r_tau,
                     double clamp_hint) {
  const int d = static_cast<int>(region.lower.size());
  if (d < 1 || region.upper.size() != d)
    throw std::invalid_argument("extremal region: inconsistent bounds");
  if (d > 16) throw std::invalid_argument("extremal region: dimension too large");
  vec_t lo(d), hi(d);
  for (int j = 0; j < d; ++j) {
    const double a = region.lower[j], b = region.upper[j];
    if (std::isnan(a) || std::isnan(b) || !(a < b))
      throw std::invalid_argument("extremal region: requires lower < upper");
    // probing extent for infinite bounds only; membership keeps them infinite
    hi[j] = std::isfinite(b) ? b : std::max(a + 10.0, clamp_hint);
    lo[j] = std::isfinite(a) ? a : std::min(b - 10.0, -clamp_hint);
  }

  auto probe = [&](const vec_t& x) {
    const double r = x.cwiseAbs().sum();
    if (!(r > 0.0))
      throw std::invalid_argument("extremal region: contains the origin");
    const vec_t w = x / r;
    if (!(r > r_tau(w)))
      throw std::invalid_argument(
          "extremal region: dips below the threshold surface");
  };

  // corners of the (clamped) box
  for (int mask = 0; mask < (1 << d); ++mask) {
    vec_t x(d);
    for (int j = 0; j < d; ++j) x[j] = (mask >> j) & 1 ? hi[j] : lo[j];
    probe(x);
  }

  // ~10^3 grid points on the per-coordinate faces nearest the origin
  const int side = d == 2 ? 500 : (d == 3 ? 18 : 6);
  for (int j = 0; j < d; ++j) {
    const double face = std::abs(lo[j]) <= std::abs(hi[j]) ? lo[j] : hi[j];
    const int cells = static_cast<int>(std::round(std::pow(side, d - 1)));
    for (int cell = 0; cell < cells; ++cell) {
      vec_t x(d);
      x[j] = face;
      int rem = cell;
      for (int k = 0; k < d; ++k) {
        if (k == j) continue;
        const int t = rem % side;
        rem /= side;
        x[k] = lo[k] + (hi[k] - lo[k]) * (t + 0.5) / side;
      }
      probe(x);
    }
  }
}

int count_in_region(const mat_t& x, const ExtremalRegion& region) {
  int hits = 0;
  for (int i = 0; i < x.rows(); ++i)
    if (contains(region, vec_t(x.row(i).transpose()))) ++hits;
  return hits;
}

ProbabilityEstimate probability_from_cloud(const SimulatedCloud& cloud,
                                           const ExtremalRegion& region,
                                           double exceed_rate, double tau) {
  const int n_star = static_cast<int>(cloud.x.rows());
  if (n_star == 0)
    throw std::invalid_argument("probability estimate: empty cloud");
  ProbabilityEstimate est;
  est.hits = count_in_region(cloud.x, region);
  est.n_star = n_star;
  est.tau = tau;
  est.exceed_rate = exceed_rate;
  est.conditional = static_cast<double>(est.hits) / n_star;
  est.probability = est.conditional * exceed_rate;
  if (est.hits > 0)
    est.se = exceed_rate *
             std::sqrt(est.conditional * (1.0 - est.conditional) / n_star);
  else  // one-sided 95% bound ("rule of three")
    est.se = exceed_rate * 3.0 / n_star;
  return est;
}

ProbabilityEstimate estimate_probability(const fit::FittedModel& model,
                                         AngularSampler& sampler,
                                         const ExtremalRegion& region,
                                         int n_star,
                                         const threshold::ThresholdModel* thr) {
  if (!model.radial)
    throw std::invalid_argument(
        "estimate_probability: the model has no fitted radial gauge");
  if (n_star < 1)
    throw std::invalid_argument("estimate_probability: n_star must be >= 1");
  if (model.exceedances.source_size <= 0 || model.exceedances.radii.size() == 0)
    throw std::invalid_argument(
        "estimate_probability: the model carries no exceedance record");
  const gauge::PwlGauge& rg = *model.radial;
  const int d = rg.dim();
  auto r_tau = [&](const vec_t& w) {
    return thr != nullptr ? thr->quantile(w)
                          : stats::erlang_quantile(model.tau, d, rg.at_angle(w));
  };
  const double clamp_hint = 2.0 * model.exceedances.radii.maxCoeff();
  validate_region(region, r_tau, clamp_hint);

  const double exceed_rate =
      static_cast<double>(model.exceedances.radii.size()) /
      static_cast<double>(model.exceedances.source_size);
  SimulatedCloud cloud = sample_exceedances(model, sampler, n_star, thr);
  return probability_from_cloud(cloud, region, exceed_rate, model.tau);
}

// --- exports ----------------------------------------------------------------

void write_points_csv(const std::string& path, const mat_t& x) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open for writing: " + path);
  for (int j = 0; j < x.cols(); ++j)
    out << (j ? "," : "") << "x" << j + 1;
  out << "\n";
  out.precision(17);
  for (int i = 0; i < x.rows(); ++i) {
    for (int j = 0; j < x.cols(); ++j) out << (j ? "," : "") << x(i, j);
    out << "\n";
  }
}

void write_probability_json(const std::string& path,
                            const ProbabilityEstimate& estimate,
                            const ExtremalRegion& region) {
  nlohmann::json j;
  auto bound = [](double v) -> nlohmann::json {
    if (v == kInf) return "inf";
    if (v == -kInf) return "-inf";
    return v;
  };
  for (int k = 0; k < region.lower.size(); ++k) {
    j["region"]["lower"].push_back(bound(region.lower[k]));
    j["region"]["upper"].push_back(bound(region.upper[k]));
  }
  j["estimate"] = estimate.probability;
  j["se"] = estimate.se;
  j["conditional"] = estimate.conditional;
  j["exceed_rate"] = estimate.exceed_rate;
  j["hits"] = estimate.hits;
  j["n_star"] = estimate.n_star;
  j["tau"] = estimate.tau;
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open for writing: " + path);
  out << j.dump(2) << "\n";
}

}  // namespace pwle::sample
