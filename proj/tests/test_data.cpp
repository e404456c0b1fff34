#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <numeric>

#include "pwle/data.hpp"

using namespace pwle;
using namespace pwle::data;

namespace {

// Columns of uniform scores from exponential-margin data.
vec_t uniform_scores(const Dataset& ds, int j) {
  vec_t u(ds.size());
  for (int i = 0; i < ds.size(); ++i) u[i] = -std::expm1(-ds.x(i, j));
  return u;
}

std::filesystem::path temp_file(const std::string& name) {
  return std::filesystem::temp_directory_path() / name;
}

}  // namespace

TEST_SUITE("data") {

TEST_CASE("every catalogue distribution has standard exponential margins") {
  // KS test against Uniform(0,1) after the exponential CDF map, 1% level.
  const double crit = 1.628 / std::sqrt(10000.0);
  for (int which = 1; which <= 7; ++which) {
    CAPTURE(which);
    const Dataset ds = simulate(study_distribution(which), 10000, 100 + which);
    CHECK(ds.margins == Margins::exponential);
    CHECK(ds.dim() == (which <= 4 ? 2 : 3));
    CHECK(ds.x.minCoeff() >= 0.0);
    for (int j = 0; j < ds.dim(); ++j)
      CHECK(stats::ks_uniform(uniform_scores(ds, j)) < crit);
  }
}

TEST_CASE("gaussian sampler reproduces the latent correlation") {
  const Dataset ds = simulate(study_distribution(3), 20000, 7);
  vec_t z1(ds.size()), z2(ds.size());
  for (int i = 0; i < ds.size(); ++i) {
    z1[i] = stats::normal_quantile(-std::expm1(-ds.x(i, 0)));
    z2[i] = stats::normal_quantile(-std::expm1(-ds.x(i, 1)));
  }
  z1.array() -= z1.mean();
  z2.array() -= z2.mean();
  const double r = z1.dot(z2) / std::sqrt(z1.squaredNorm() * z2.squaredNorm());
  CHECK(std::abs(r - 0.8) < 0.03);
}

TEST_CASE("stronger logistic dependence gives a larger joint tail") {
  // Empirical chi(0.99) for alpha=0.4 versus alpha=0.8; theoretical values
  // 2 - 2^0.4 = 0.68 and 2 - 2^0.8 = 0.26.
  auto chi99 = [](const Dataset& ds) {
    const double thr = -std::log(0.01);
    int joint = 0, margin = 0;
    for (int i = 0; i < ds.size(); ++i) {
      const bool e2 = ds.x(i, 1) > thr;
      margin += e2;
      joint += e2 && ds.x(i, 0) > thr;
    }
    return static_cast<double>(joint) / static_cast<double>(margin);
  };
  const double chi_a = chi99(simulate(study_distribution(1), 1000000, 11));
  const double chi_b = chi99(simulate(study_distribution(2), 1000000, 12));
  CHECK(chi_a > chi_b + 0.2);
  CHECK(std::abs(chi_a - (2.0 - std::pow(2.0, 0.4))) < 0.03);
  CHECK(std::abs(chi_b - (2.0 - std::pow(2.0, 0.8))) < 0.03);
}

TEST_CASE("membership sets control joint-max clusters") {
  // The pairwise model has a {1,3} set, so simultaneous extremes in margins
  // 1 and 3 with a moderate margin 2 occur with positive frequency; the
  // nested model has no such set and produces essentially none.
  auto cluster_count = [](const Dataset& ds) {
    int c = 0;
    for (int i = 0; i < ds.size(); ++i) {
      const double u1 = -std::expm1(-ds.x(i, 0));
      const double u2 = -std::expm1(-ds.x(i, 1));
      const double u3 = -std::expm1(-ds.x(i, 2));
      c += u1 > 0.99 && u3 > 0.99 && u2 < 0.9;
    }
    return c;
  };
  const int pairwise = cluster_count(simulate(study_distribution(5), 100000, 21));
  const int nested = cluster_count(simulate(study_distribution(6), 100000, 22));
  CHECK(pairwise >= 150);
  CHECK(nested <= 15);
  CHECK(pairwise > 10 * (nested + 1));
}

TEST_CASE("simulation is deterministic in the seed") {
  const auto spec = study_distribution(7);
  const Dataset a = simulate(spec, 500, 42);
  const Dataset b = simulate(spec, 500, 42);
  const Dataset c = simulate(spec, 500, 43);
  CHECK(a.x == b.x);
  CHECK(a.x != c.x);
}

TEST_CASE("exponential input maps near-identically to exponential margins") {
  stats::Rng rng(3);
  Dataset raw;
  raw.x.resize(100000, 2);
  for (Eigen::Index i = 0; i < raw.x.rows(); ++i)
    for (int j = 0; j < 2; ++j) raw.x(i, j) = rng.exponential();
  const Dataset out = to_exponential_margins(raw, 0.95);
  REQUIRE(out.transforms.size() == 2);
  for (int j = 0; j < 2; ++j) {
    std::vector<double> dev;
    for (Eigen::Index i = 0; i < raw.x.rows(); ++i)
      if (raw.x(i, j) <= out.transforms[j].threshold)
        dev.push_back(std::abs(out.x(i, j) - raw.x(i, j)));
    std::nth_element(dev.begin(), dev.begin() + dev.size() / 2, dev.end());
    CHECK(dev[dev.size() / 2] <= 0.05);
  }
}

TEST_CASE("transforms preserve ranks and pass marginal uniformity") {
  stats::Rng rng(8);
  Dataset raw;
  raw.x.resize(10000, 2);
  for (Eigen::Index i = 0; i < raw.x.rows(); ++i) {
    raw.x(i, 0) = std::exp(rng.normal());          // lognormal margin
    raw.x(i, 1) = std::pow(rng.exponential(), 2);  // heavy right tail
  }
  const Dataset out = to_exponential_margins(raw, 0.95);
  CHECK(out.x.minCoeff() >= 0.0);
  for (int j = 0; j < 2; ++j) {
    // Rank preservation: sorting by input equals sorting by output.
    std::vector<int> idx(raw.x.rows());
    std::iota(idx.begin(), idx.end(), 0);
    std::sort(idx.begin(), idx.end(),
              [&](int a, int b) { return raw.x(a, j) < raw.x(b, j); });
    bool monotone = true;
    for (std::size_t k = 1; k < idx.size(); ++k)
      monotone = monotone && out.x(idx[k - 1], j) <= out.x(idx[k], j);
    CHECK(monotone);
    // Fitted-data uniformity at the 1% level.
    CHECK(stats::ks_uniform(uniform_scores(out, j)) <
          1.628 / std::sqrt(static_cast<double>(out.size())));
  }
}

TEST_CASE("the gpd splice is continuous at the threshold") {
  stats::Rng rng(12);
  vec_t col(5000);
  for (Eigen::Index i = 0; i < col.size(); ++i) col[i] = std::exp(rng.normal());
  const MarginTransform t = fit_margin(col, 0.95);
  const double below = margin_cdf(t, t.threshold);
  const double above = margin_cdf(t, t.threshold + 1e-9);
  CHECK(std::abs(below - above) < 1e-8);
  // The split point is the empirical 0.95 quantile.
  CHECK(below == doctest::Approx(margin_cdf(t, t.threshold)).epsilon(1e-15));
  double frac_above = 0.0;
  for (Eigen::Index i = 0; i < col.size(); ++i) frac_above += col[i] > t.threshold;
  frac_above /= static_cast<double>(col.size());
  CHECK(std::abs(frac_above - 0.05) < 0.01);
}

TEST_CASE("laplace margins: symmetry, quadrants, and cdf round-trip") {
  // Negatively correlated normal latents.
  stats::Rng rng(9);
  Dataset raw;
  raw.x.resize(5000, 2);
  for (Eigen::Index i = 0; i < raw.x.rows(); ++i) {
    const double n1 = rng.normal(), n2 = rng.normal();
    raw.x(i, 0) = n1;
    raw.x(i, 1) = -0.5 * n1 + std::sqrt(0.75) * n2;
  }
  const Dataset lap = to_laplace_margins(raw);
  CHECK(lap.margins == Margins::laplace);

  for (int j = 0; j < 2; ++j) {
    vec_t col = lap.x.col(j);
    std::sort(col.data(), col.data() + col.size());
    CHECK(std::abs(col[col.size() / 2]) < 0.06);
  }

  int quad[4] = {0, 0, 0, 0};
  for (Eigen::Index i = 0; i < lap.x.rows(); ++i)
    ++quad[(lap.x(i, 0) > 0 ? 1 : 0) + (lap.x(i, 1) > 0 ? 2 : 0)];
  for (int q = 0; q < 4; ++q) CHECK(quad[q] > 100);

  // Laplace -> uniform -> exponential equals the direct exponential map.
  const Dataset expo = to_exponential_margins(raw);
  double worst = 0.0;
  for (Eigen::Index i = 0; i < lap.x.rows(); ++i)
    for (int j = 0; j < 2; ++j) {
      const double y = lap.x(i, j);
      const double sf = y >= 0.0 ? 0.5 * std::exp(-y) : 1.0 - 0.5 * std::exp(y);
      worst = std::max(worst, std::abs(-std::log(sf) - expo.x(i, j)));
    }
  CHECK(worst < 1e-10);
}

TEST_CASE("csv round-trip restores data, names, and margin state") {
  const auto csv = temp_file("pwle_test_roundtrip.csv");
  const Dataset ds = to_exponential_margins(
      [] {
        stats::Rng rng(14);
        Dataset raw;
        raw.x.resize(1500, 2);
        for (Eigen::Index i = 0; i < raw.x.rows(); ++i)
          for (int j = 0; j < 2; ++j) raw.x(i, j) = std::exp(rng.normal());
        raw.names = {"alpha_col", "beta_col"};
        return raw;
      }(),
      0.95);
  write_csv(ds, csv.string());
  int dropped = -1;
  const Dataset back = read_csv(csv.string(), &dropped);
  CHECK(dropped == 0);
  CHECK(back.margins == Margins::exponential);
  REQUIRE(back.names.size() == 2);
  CHECK(back.names[0] == "alpha_col");
  CHECK(back.x == ds.x);  // %.17g round-trips doubles exactly
  REQUIRE(back.transforms.size() == 2);
  CHECK(back.transforms[1].gpd_scale == ds.transforms[1].gpd_scale);
  CHECK(back.transforms[1].gpd_shape == ds.transforms[1].gpd_shape);
  CHECK(back.transforms[0].knots == ds.transforms[0].knots);
  std::filesystem::remove(csv);
  std::filesystem::remove(meta_path(csv.string()));
}

TEST_CASE("csv ingestion drops incomplete rows and reports the count") {
  const auto csv = temp_file("pwle_test_dirty.csv");
  {
    std::ofstream out(csv);
    out << "a,b,c\n"
        << "1.5,2.5,3.5\n"
        << "1.0,,3.0\n"        // missing field
        << "2.0,4.0\n"         // short row
        << "2.0,4.0,x\n"       // non-numeric
        << "5.0,6.0,7.0,8.0\n" // extra field
        << "nan,1.0,2.0\n"     // non-finite
        << "9.0,8.0,7.0\n";
  }
  int dropped = 0;
  const Dataset ds = read_csv(csv.string(), &dropped);
  CHECK(ds.size() == 2);
  CHECK(ds.dim() == 3);
  CHECK(dropped == 5);
  CHECK(ds.margins == Margins::raw);
  CHECK(ds.x(1, 2) == 7.0);
  std::filesystem::remove(csv);
}

TEST_CASE("identical seeds give byte-identical csv artifacts") {
  const auto p1 = temp_file("pwle_test_det1.csv");
  const auto p2 = temp_file("pwle_test_det2.csv");
  write_csv(simulate(study_distribution(1), 300, 77), p1.string());
  write_csv(simulate(study_distribution(1), 300, 77), p2.string());
  auto slurp = [](const std::filesystem::path& p) {
    std::ifstream in(p);
    return std::string(std::istreambuf_iterator<char>(in), {});
  };
  CHECK(slurp(p1) == slurp(p2));
  CHECK(slurp(meta_path(p1.string())) == slurp(meta_path(p2.string())));
  for (const auto& p : {p1, p2}) {
    std::filesystem::remove(p);
    std::filesystem::remove(meta_path(p.string()));
  }
}

TEST_CASE("malformed specs and inputs are rejected") {
  CopulaSpec bad = study_distribution(1);
  bad.alpha = 1.0;
  CHECK_THROWS_AS(validate(bad), std::invalid_argument);

  CopulaSpec alog = study_distribution(6);
  alog.sets = {{0}, {0, 1}};  // margin 2 uncovered
  alog.alphas = {0.4, 0.4};
  CHECK_THROWS_AS(validate(alog), std::invalid_argument);
  alog = study_distribution(6);
  alog.alphas.pop_back();
  CHECK_THROWS_AS(validate(alog), std::invalid_argument);

  CopulaSpec mix = study_distribution(7);
  mix.components[0].d = 2;
  CHECK_THROWS_AS(validate(mix), std::invalid_argument);

  CopulaSpec gauss = gaussian_spec(2, 0.5);
  gauss.sigma(0, 1) = 0.7;  // asymmetric
  CHECK_THROWS_AS(validate(gauss), std::invalid_argument);

  CHECK_THROWS_AS(study_distribution(0), std::invalid_argument);
  CHECK_THROWS_AS(simulate(study_distribution(1), 1, 5), std::invalid_argument);

  Dataset tiny;
  tiny.x = mat_t::Random(50, 3).cwiseAbs();
  CHECK_THROWS_AS(to_exponential_margins(tiny, 0.95), std::invalid_argument);
  CHECK_THROWS_AS(to_laplace_margins(tiny), std::invalid_argument);
}

}  // TEST_SUITE
