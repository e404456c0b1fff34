#include <doctest.h>

#include <cmath>

#include "pwle/stats.hpp"

using namespace pwle;
using namespace pwle::stats;

TEST_SUITE("stats") {

TEST_CASE("erlang cdf matches independent reference values") {
  // Reference values computed with an independent implementation of the
  // regularized incomplete gamma function (frozen to full double precision).
  CHECK(erlang_cdf(3.0, 2, 0.5) == doctest::Approx(0.4421745996289252).epsilon(1e-13));
  CHECK(erlang_cdf(1.0, 2, 1.0) == doctest::Approx(0.2642411176571153).epsilon(1e-13));
  CHECK(erlang_cdf(1.7, 3, 2.0) == doctest::Approx(0.6602601118038803).epsilon(1e-13));
  CHECK(erlang_cdf(2.2, 4, 1.3) == doctest::Approx(0.32143719677545224).epsilon(1e-13));
  CHECK(erlang_cdf(9.0, 5, 0.7) == doctest::Approx(0.7530962669945505).epsilon(1e-13));
  CHECK(erlang_cdf(20.0, 2, 1.0) == doctest::Approx(0.9999999567157739).epsilon(1e-13));
  CHECK(erlang_cdf(40.0, 3, 0.25) == doctest::Approx(0.9972306042844884).epsilon(1e-13));
}

TEST_CASE("erlang quantile matches independent reference values") {
  CHECK(erlang_quantile(0.95, 2, 0.5) == doctest::Approx(9.487729036781154).epsilon(1e-10));
  CHECK(erlang_quantile(0.5, 2, 1.0) == doctest::Approx(1.6783469900166612).epsilon(1e-10));
  CHECK(erlang_quantile(0.99, 3, 2.0) == doctest::Approx(4.202973457442732).epsilon(1e-10));
  CHECK(erlang_quantile(0.999, 4, 1.3) == doctest::Approx(10.04787752245236).epsilon(1e-10));
  CHECK(erlang_quantile(0.999999, 2, 1.0) == doctest::Approx(16.68842079082944).epsilon(1e-10));
  CHECK(erlang_quantile(0.01, 3, 0.7) == doctest::Approx(0.6229216643975617).epsilon(1e-10));
}

TEST_CASE("erlang identities") {
  for (int shape : {1, 2, 3, 5}) {
    for (double rate : {0.3, 1.0, 2.5}) {
      for (double r : {0.1, 1.0, 4.0, 12.0}) {
        CHECK(erlang_cdf(r, shape, rate) + erlang_sf(r, shape, rate) ==
              doctest::Approx(1.0).epsilon(1e-14));
      }
      for (double p : {0.001, 0.2, 0.5, 0.9, 0.9999}) {
        const double q = erlang_quantile(p, shape, rate);
        CHECK(erlang_cdf(q, shape, rate) == doctest::Approx(p).epsilon(1e-9));
      }
    }
  }
  // The survival function stays finite in log space deep in the tail.
  const double lsf = erlang_log_sf(2000.0, 2, 1.0);
  CHECK(std::isfinite(lsf));
  CHECK(lsf == doctest::Approx(-2000.0 + std::log(2001.0)).epsilon(1e-12));
}

TEST_CASE("erlang pdf integrates to the cdf increment") {
  // Simpson's rule over [1, 4], shape 3 rate 1.2.
  const int n = 2000;
  const double a = 1.0, b = 4.0, h = (b - a) / n;
  double s = erlang_pdf(a, 3, 1.2) + erlang_pdf(b, 3, 1.2);
  for (int i = 1; i < n; ++i)
    s += erlang_pdf(a + i * h, 3, 1.2) * (i % 2 ? 4.0 : 2.0);
  s *= h / 3.0;
  CHECK(s == doctest::Approx(erlang_cdf(4.0, 3, 1.2) - erlang_cdf(1.0, 3, 1.2))
                 .epsilon(1e-10));
}

TEST_CASE("normal cdf reference values") {
  CHECK(normal_cdf(0.0) == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(normal_cdf(1.96) == doctest::Approx(0.9750021048517795).epsilon(1e-13));
  CHECK(normal_cdf(-1.0) + normal_cdf(1.0) == doctest::Approx(1.0).epsilon(1e-14));
}

TEST_CASE("sampler moments") {
  Rng rng(20240817);
  const int n = 200000;
  double se3 = 3.0 / std::sqrt(static_cast<double>(n));

  double m = 0.0;
  for (int i = 0; i < n; ++i) m += rng.exponential();
  CHECK(m / n == doctest::Approx(1.0).epsilon(2 * se3));

  double g1 = 0.0, g2 = 0.0;
  for (int i = 0; i < n; ++i) {
    const double x = rng.gamma(2.7);
    g1 += x;
    g2 += x * x;
  }
  g1 /= n;
  g2 = g2 / n - g1 * g1;
  CHECK(std::abs(g1 - 2.7) < 6 * std::sqrt(2.7 / n) * 3);
  CHECK(std::abs(g2 - 2.7) < 0.1);

  double bm = 0.0;
  for (int i = 0; i < n; ++i) bm += rng.beta(2.0, 3.0);
  CHECK(std::abs(bm / n - 0.4) < 0.005);

  vec_t alpha(3);
  alpha << 1.0, 2.0, 3.0;
  vec_t dm = vec_t::Zero(3);
  for (int i = 0; i < 20000; ++i) dm += rng.dirichlet(alpha);
  dm /= 20000.0;
  CHECK(std::abs(dm[0] - 1.0 / 6.0) < 0.01);
  CHECK(std::abs(dm[2] - 0.5) < 0.01);
}

TEST_CASE("positive stable draws satisfy the Laplace transform identity") {
  // E[exp(-t S)] = exp(-t^alpha); a distribution-level check on the sampler.
  Rng rng(55);
  const int n = 200000;
  for (double alpha : {0.4, 0.8}) {
    std::vector<double> s(n);
    for (int i = 0; i < n; ++i) s[i] = rng.positive_stable(alpha);
    for (double t : {0.5, 1.0, 2.0}) {
      double m1 = 0.0, m2 = 0.0;
      for (int i = 0; i < n; ++i) {
        const double e = std::exp(-t * s[i]);
        m1 += e;
        m2 += e * e;
      }
      m1 /= n;
      const double sd = std::sqrt((m2 / n - m1 * m1) / n);
      CHECK(std::abs(m1 - std::exp(-std::pow(t, alpha))) < 4 * sd + 1e-4);
    }
  }
}

TEST_CASE("uniform stream and ks statistic") {
  Rng rng(7);
  const int n = 50000;
  vec_t u(n);
  for (int i = 0; i < n; ++i) u[i] = rng.uniform();
  CHECK(ks_uniform(u) < 1.358 / std::sqrt(static_cast<double>(n)));
}

TEST_CASE("same seed gives an identical stream") {
  Rng a(123), b(123), c(124);
  bool all_equal = true, any_diff = false;
  for (int i = 0; i < 1000; ++i) {
    const double x = a.uniform(), y = b.uniform(), z = c.uniform();
    all_equal = all_equal && (x == y);
    any_diff = any_diff || (x != z);
  }
  CHECK(all_equal);
  CHECK(any_diff);
}

TEST_CASE("invalid arguments are rejected") {
  Rng rng(1);
  CHECK_THROWS_AS(rng.gamma(0.0), std::invalid_argument);
  CHECK_THROWS_AS(rng.positive_stable(1.0), std::invalid_argument);
  CHECK_THROWS_AS(erlang_cdf(1.0, 0, 1.0), std::invalid_argument);
  CHECK_THROWS_AS(erlang_quantile(1.0, 2, 1.0), std::invalid_argument);
  CHECK_THROWS_AS(erlang_quantile(-0.1, 2, 1.0), std::invalid_argument);
}

TEST_CASE("nelder_mead minimizes smooth objectives") {
  // Shifted quadratic with anisotropic curvature.
  auto quad = [](const vec_t& x) {
    return 2.0 * (x[0] - 1.5) * (x[0] - 1.5) + 7.0 * (x[1] + 0.25) * (x[1] + 0.25) +
           0.5 * (x[0] - 1.5) * (x[1] + 0.25) + 3.0;
  };
  vec_t x0 = vec_t::Zero(2);
  auto res = nelder_mead(quad, x0);
  CHECK(res.converged);
  CHECK(std::abs(res.x[0] - 1.5) < 1e-6);
  CHECK(std::abs(res.x[1] + 0.25) < 1e-6);
  CHECK(std::abs(res.fval - 3.0) < 1e-10);

  // Rosenbrock in 2D from a poor start.
  auto rosen = [](const vec_t& x) {
    const double a = 1.0 - x[0], b = x[1] - x[0] * x[0];
    return a * a + 100.0 * b * b;
  };
  vec_t r0(2);
  r0 << -1.2, 1.0;
  NelderMeadOptions opts;
  opts.max_evals = 5000;
  auto rres = nelder_mead(rosen, r0, opts);
  CHECK(rres.converged);
  CHECK(std::abs(rres.x[0] - 1.0) < 1e-5);
  CHECK(std::abs(rres.x[1] - 1.0) < 1e-5);

  // One-dimensional case.
  auto cube = [](const vec_t& x) { return std::pow(x[0] - 0.3, 4); };
  vec_t c0(1);
  c0 << 5.0;
  auto cres = nelder_mead(cube, c0);
  CHECK(std::abs(cres.x[0] - 0.3) < 1e-2);
}

TEST_CASE("nelder_mead is deterministic and respects its budget") {
  auto f = [](const vec_t& x) {
    double s = 0.0;
    for (Eigen::Index i = 0; i < x.size(); ++i)
      s += std::cos(3.0 * x[i]) + 0.1 * x[i] * x[i];
    return s;
  };
  vec_t x0(3);
  x0 << 0.4, -0.2, 0.9;
  auto a = nelder_mead(f, x0);
  auto b = nelder_mead(f, x0);
  CHECK(a.x == b.x);
  CHECK(a.fval == b.fval);
  CHECK(a.evals == b.evals);

  NelderMeadOptions tight;
  tight.max_evals = 25;
  auto c = nelder_mead(f, x0, tight);
  CHECK(c.evals <= 25 + 3);  // a shrink step may finish its sweep
  CHECK_FALSE(c.converged);

  // Non-finite objective values are treated as +inf, not propagated.
  auto guarded = [](const vec_t& x) {
    return x[0] < 0.0 ? std::nan("") : (x[0] - 2.0) * (x[0] - 2.0);
  };
  vec_t g0(1);
  g0 << 0.5;
  auto gres = nelder_mead(guarded, g0);
  CHECK(std::abs(gres.x[0] - 2.0) < 1e-6);
}

}  // TEST_SUITE
