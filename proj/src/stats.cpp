#include "pwle/stats.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace pwle::stats {

double Rng::uniform() {
  // 53-bit mantissa from the top bits of the 64-bit state; value in [0, 1).
  return static_cast<double>(eng_() >> 11) * 0x1.0p-53;
}

double Rng::uniform(double a, double b) { return a + (b - a) * uniform(); }

double Rng::normal() {
  double u1 = uniform();
  while (u1 <= 0.0) u1 = uniform();
  const double u2 = uniform();
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
}

double Rng::exponential() {
  double u = uniform();
  while (u <= 0.0) u = uniform();
  return -std::log(u);
}

double Rng::gamma(double shape) {
  if (shape <= 0.0) throw std::invalid_argument("gamma: shape must be positive");
  if (shape < 1.0) {
    // Boost a shape-(a+1) draw down: Ga(a) = Ga(a+1) * U^{1/a}.
    double u = uniform();
    while (u <= 0.0) u = uniform();
    return gamma(shape + 1.0) * std::pow(u, 1.0 / shape);
  }
  // Marsaglia-Tsang squeeze.
  const double d = shape - 1.0 / 3.0;
  const double c = 1.0 / std::sqrt(9.0 * d);
  for (;;) {
    double x = normal();
    double v = 1.0 + c * x;
    if (v <= 0.0) continue;
    v = v * v * v;
    double u = uniform();
    while (u <= 0.0) u = uniform();
    if (std::log(u) < 0.5 * x * x + d - d * v + d * std::log(v)) return d * v;
  }
}

double Rng::beta(double a, double b) {
  const double x = gamma(a);
  const double y = gamma(b);
  return x / (x + y);
}

vec_t Rng::dirichlet(const vec_t& alpha) {
  vec_t g(alpha.size());
  for (Eigen::Index j = 0; j < alpha.size(); ++j) g[j] = gamma(alpha[j]);
  const double s = g.sum();
  if (s <= 0.0) throw std::runtime_error("dirichlet: degenerate draw");
  return g / s;
}

double Rng::positive_stable(double alpha) {
  if (alpha <= 0.0 || alpha >= 1.0)
    throw std::invalid_argument("positive_stable: alpha must lie in (0,1)");
  const double th = uniform(0.0, M_PI);
  const double w = exponential();
  const double a = std::sin(alpha * th) / std::pow(std::sin(th), 1.0 / alpha);
  const double b = std::sin((1.0 - alpha) * th) / w;
  return a * std::pow(b, (1.0 - alpha) / alpha);
}

std::uint64_t Rng::integer(std::uint64_t n) {
  if (n == 0) throw std::invalid_argument("integer: n must be positive");
  // Rejection to avoid modulo bias.
  const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() / n * n;
  std::uint64_t x = eng_();
  while (x >= limit) x = eng_();
  return x % n;
}

namespace {

void check_erlang_args(int shape, double rate) {
  if (shape < 1) throw std::invalid_argument("erlang: shape must be >= 1");
  if (!(rate > 0.0)) throw std::invalid_argument("erlang: rate must be positive");
}

}  // namespace

double erlang_log_pdf(double r, int shape, double rate) {
  check_erlang_args(shape, rate);
  if (r < 0.0) return -std::numeric_limits<double>::infinity();
  if (r == 0.0)
    return shape == 1 ? std::log(rate) : -std::numeric_limits<double>::infinity();
  return shape * std::log(rate) + (shape - 1) * std::log(r) - rate * r -
         std::lgamma(static_cast<double>(shape));
}

double erlang_pdf(double r, int shape, double rate) {
  return std::exp(erlang_log_pdf(r, shape, rate));
}

double erlang_log_sf(double r, int shape, double rate) {
  check_erlang_args(shape, rate);
  if (r <= 0.0) return 0.0;
  const double x = rate * r;
  // log( e^{-x} sum_{j<k} x^j/j! ), with the sum scaled by its largest term.
  double term = 1.0, sum = 1.0, largest = 1.0;
  for (int j = 1; j < shape; ++j) {
    term *= x / j;
    sum += term;
    largest = std::max(largest, term);
  }
  if (std::isfinite(sum)) return -x + std::log(sum);
  // Extremely large x: recompute relative to the biggest term.
  const int jmax = std::min(shape - 1, static_cast<int>(x));
  double lbig = jmax * std::log(x) - std::lgamma(jmax + 1.0);
  double scaled = 0.0;
  for (int j = 0; j < shape; ++j)
    scaled += std::exp(j * std::log(x) - std::lgamma(j + 1.0) - lbig);
  return -x + lbig + std::log(scaled);
}

double erlang_sf(double r, int shape, double rate) {
  return std::exp(erlang_log_sf(r, shape, rate));
}

double erlang_cdf(double r, int shape, double rate) {
  if (r <= 0.0) {
    check_erlang_args(shape, rate);
    return 0.0;
  }
  return -std::expm1(erlang_log_sf(r, shape, rate));
}

double erlang_quantile(double p, int shape, double rate) {
  check_erlang_args(shape, rate);
  if (p < 0.0 || p >= 1.0)
    throw std::invalid_argument("erlang_quantile: p must lie in [0,1)");
  if (p == 0.0) return 0.0;
  // Bracket around the mean, then bisection with Newton polish.
  double lo = 0.0, hi = shape / rate;
  while (erlang_cdf(hi, shape, rate) < p) {
    lo = hi;
    hi *= 2.0;
  }
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (erlang_cdf(mid, shape, rate) < p)
      lo = mid;
    else
      hi = mid;
    if (hi - lo < 1e-12 * (1.0 + hi)) break;
  }
  double r = 0.5 * (lo + hi);
  for (int it = 0; it < 8; ++it) {
    const double f = erlang_cdf(r, shape, rate) - p;
    const double df = erlang_pdf(r, shape, rate);
    if (df <= 0.0) break;
    const double step = f / df;
    const double next = r - step;
    if (next <= lo || next >= hi) break;
    r = next;
    if (std::abs(step) < 1e-14 * (1.0 + r)) break;
  }
  return r;
}

double normal_pdf(double x) {
  return std::exp(-0.5 * x * x) / std::sqrt(2.0 * M_PI);
}

double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

double normal_quantile(double p) {
  if (!(p > 0.0 && p < 1.0))
    throw std::invalid_argument("normal_quantile: p must lie in (0,1)");
  // Acklam's rational approximation, then one Halley refinement.
  static const double a[] = {-3.969683028665376e+01, 2.209460984245205e+02,
                             -2.759285104469687e+02, 1.383577518672690e+02,
                             -3.066479806614716e+01, 2.506628277459239e+00};
  static const double b[] = {-5.447609879822406e+01, 1.615858368580409e+02,
                             -1.556989798598866e+02, 6.680131188771972e+01,
                             -1.328068155288572e+01};
  static const double c[] = {-7.784894002430293e-03, -3.223964580411365e-01,
                             -2.400758277161838e+00, -2.549732539343734e+00,
                             4.374664141464968e+00,  2.938163982698783e+00};
  static const double dd[] = {7.784695709041462e-03, 3.224671290700398e-01,
                              2.445134137142996e+00, 3.754408661907416e+00};
  const double plow = 0.02425;
  double x;
  if (p < plow) {
    const double q = std::sqrt(-2.0 * std::log(p));
    x = (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
        ((((dd[0] * q + dd[1]) * q + dd[2]) * q + dd[3]) * q + 1.0);
  } else if (p <= 1.0 - plow) {
    const double q = p - 0.5, r = q * q;
    x = (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
        (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0);
  } else {
    const double q = std::sqrt(-2.0 * std::log(1.0 - p));
    x = -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
        ((((dd[0] * q + dd[1]) * q + dd[2]) * q + dd[3]) * q + 1.0);
  }
  const double e = normal_cdf(x) - p;
  const double u = e / normal_pdf(x);
  return x - u / (1.0 + 0.5 * x * u);
}

double laplace_cdf(double x) {
  return x < 0.0 ? 0.5 * std::exp(x) : 1.0 - 0.5 * std::exp(-x);
}

double laplace_quantile(double p) {
  if (!(p > 0.0 && p < 1.0))
    throw std::invalid_argument("laplace_quantile: p must lie in (0,1)");
  return p < 0.5 ? std::log(2.0 * p) : -std::log(2.0 * (1.0 - p));
}

double ks_uniform(const vec_t& u) {
  std::vector<double> v(u.data(), u.data() + u.size());
  std::sort(v.begin(), v.end());
  const double n = static_cast<double>(v.size());
  double d = 0.0;
  for (std::size_t i = 0; i < v.size(); ++i) {
    d = std::max(d, (i + 1) / n - v[i]);
    d = std::max(d, v[i] - i / n);
  }
  return d;
}

NelderMeadResult nelder_mead(const std::function<double(const vec_t&)>& f,
                             const vec_t& x0, const NelderMeadOptions& opts) {
  const Eigen::Index n = x0.size();
  if (n < 1) throw std::invalid_argument("nelder_mead: empty starting point");
  if (!(opts.init_step > 0.0))
    throw std::invalid_argument("nelder_mead: init_step must be positive");

  NelderMeadResult out;
  std::vector<vec_t> verts(static_cast<std::size_t>(n) + 1, x0);
  std::vector<double> fv(verts.size());
  auto eval = [&](const vec_t& x) {
    ++out.evals;
    const double v = f(x);
    return std::isnan(v) ? std::numeric_limits<double>::infinity() : v;
  };
  for (Eigen::Index i = 0; i < n; ++i) verts[i + 1][i] += opts.init_step;
  for (std::size_t i = 0; i < verts.size(); ++i) fv[i] = eval(verts[i]);

  std::vector<std::size_t> ord(verts.size());
  const auto sort_order = [&] {
    for (std::size_t i = 0; i < ord.size(); ++i) ord[i] = i;
    std::stable_sort(ord.begin(), ord.end(),
                     [&](std::size_t a, std::size_t b) { return fv[a] < fv[b]; });
  };

  while (out.evals < opts.max_evals) {
    sort_order();
    const std::size_t best = ord.front(), worst = ord.back();
    const std::size_t second_worst = ord[ord.size() - 2];

    double spread_x = 0.0;
    for (std::size_t i = 0; i < verts.size(); ++i)
      spread_x = std::max(
          spread_x, (verts[i] - verts[best]).cwiseAbs().maxCoeff());
    const double spread_f = fv[worst] - fv[best];
    if (spread_f <= opts.tol * (std::abs(fv[best]) + opts.tol) &&
        spread_x <= opts.tol * (1.0 + verts[best].cwiseAbs().maxCoeff())) {
      out.converged = true;
      break;
    }

    vec_t centroid = vec_t::Zero(n);
    for (std::size_t i = 0; i < verts.size(); ++i)
      if (i != worst) centroid += verts[i];
    centroid /= static_cast<double>(n);

    const vec_t refl = centroid + (centroid - verts[worst]);
    const double f_refl = eval(refl);
    if (f_refl < fv[ord[0]]) {
      const vec_t expd = centroid + 2.0 * (centroid - verts[worst]);
      const double f_expd = eval(expd);
      if (f_expd < f_refl) {
        verts[worst] = expd;
        fv[worst] = f_expd;
      } else {
        verts[worst] = refl;
        fv[worst] = f_refl;
      }
      continue;
    }
    if (f_refl < fv[second_worst]) {
      verts[worst] = refl;
      fv[worst] = f_refl;
      continue;
    }
    const bool outside = f_refl < fv[worst];
    const vec_t contr =
        outside ? centroid + 0.5 * (refl - centroid)
                : centroid + 0.5 * (verts[worst] - centroid);
    const double f_contr = eval(contr);
    if (f_contr < (outside ? f_refl : fv[worst])) {
      verts[worst] = contr;
      fv[worst] = f_contr;
      continue;
    }
    // Shrink toward the best vertex.
    for (std::size_t i = 0; i < verts.size(); ++i) {
      if (i == best) continue;
      verts[i] = verts[best] + 0.5 * (verts[i] - verts[best]);
      fv[i] = eval(verts[i]);
    }
  }

  sort_order();
  out.x = verts[ord.front()];
  out.fval = fv[ord.front()];
  return out;
}

}  // namespace pwle::stats
