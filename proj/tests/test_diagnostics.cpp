#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <string>

#include "pwle/data.hpp"
#include "pwle/diagnostics.hpp"
#include "pwle/fit.hpp"
#include "pwle/gauge.hpp"
#include "pwle/mesh.hpp"
#include "pwle/sample.hpp"
#include "pwle/stats.hpp"
#include "pwle/threshold.hpp"

namespace {

using namespace pwle;

struct Pipeline {
  fit::FittedModel model;
  threshold::ThresholdModel tm;
  mat_t x;  // full dataset in exponential margins
};

Pipeline run_pipeline(int which, int n, std::uint64_t seed, double tau) {
  data::Dataset raw = data::simulate(data::study_distribution(which), n, seed);
  data::Dataset expo = data::to_exponential_margins(raw, 0.95);
  auto [w, r] = threshold::split_radial_angular(expo.x);
  threshold::ThresholdModel tm(w, r, tau);
  threshold::ExceedanceSample exc = threshold::extract_exceedances(tm, w, r);
  geom::SimplexMesh mesh = geom::make_regular_mesh(2, 10);
  fit::FitConfig fc;
  fc.mode = fit::Mode::radial;
  fc.lambda = 1.0;
  fc.bounded = true;
  return {fit::fit(fc, mesh, exc, tau), std::move(tm), std::move(expo.x)};
}

// flat model: g == rate on the d-simplex
fit::FittedModel flat_model(int d, double rate, double tau) {
  geom::SimplexMesh mesh = geom::make_regular_mesh(d, 1);
  fit::FittedModel m;
  m.radial = gauge::PwlGauge(mesh, vec_t::Constant(d, 1.0 / rate));
  m.tau = tau;
  return m;
}

threshold::ExceedanceSample one_point(double r, double t) {
  threshold::ExceedanceSample exc;
  exc.angles = mat_t::Constant(1, 2, 0.5);
  exc.radii = vec_t::Constant(1, r);
  exc.thresholds = vec_t::Constant(1, t);
  exc.source_size = 10;
  return exc;
}

int count_lines(const std::string& path, std::string* header = nullptr) {
  std::ifstream in(path);
  std::string line;
  int n = 0;
  if (std::getline(in, line) && header) *header = line;
  while (std::getline(in, line))
    if (!line.empty()) ++n;
  return n;
}

}  // namespace

TEST_SUITE("diagnostics") {

using namespace pwle;

TEST_CASE("PIT values match the truncated-gamma transform") {
  fit::FittedModel m = flat_model(2, 1.3, 0.8);
  diag::PpQq one = diag::pp_qq_data(m, one_point(3.0, 2.0));
  CHECK(std::abs(one.u[0] - 0.6290539483703717) < 1e-12);

  // radius at the truncation edge maps to zero
  fit::FittedModel m1 = flat_model(2, 1.0, 0.8);
  const double c = stats::erlang_quantile(0.8, 2, 1.0);
  CHECK(diag::pp_qq_data(m1, one_point(c + 1e-9, c)).u[0] < 1e-7);

  // column conventions on a small sample
  threshold::ExceedanceSample exc;
  exc.angles = mat_t::Constant(4, 2, 0.5);
  exc.radii.resize(4);
  exc.radii << 5.0, 2.5, 9.0, 3.0;
  exc.thresholds = vec_t::Constant(4, 2.0);
  diag::PpQq pq = diag::pp_qq_data(m, exc);
  for (int i = 0; i < 4; ++i) {
    CHECK(pq.empirical_p[i] == (i + 1.0) / 5.0);
    CHECK(pq.model_q[i] == -std::log1p(-pq.empirical_p[i]));
    CHECK(pq.empirical_q[i] == -std::log1p(-pq.model_p[i]));
    if (i > 0) CHECK(pq.model_p[i] >= pq.model_p[i - 1]);
    CHECK(pq.u[i] >= 0.0);
    CHECK(pq.u[i] < 1.0);
  }
  // u keeps input order: radii[1] is the smallest, radii[2] the largest
  CHECK(pq.u[1] == pq.model_p[0]);
  CHECK(pq.u[2] == pq.model_p[3]);

  fit::FittedModel none;
  CHECK_THROWS_AS(diag::pp_qq_data(none, exc), std::invalid_argument);
  threshold::ExceedanceSample empty;
  empty.angles.resize(0, 2);
  CHECK_THROWS_AS(diag::pp_qq_data(m, empty), std::invalid_argument);
  threshold::ExceedanceSample bad = exc;
  bad.thresholds.resize(3);
  CHECK_THROWS_AS(diag::pp_qq_data(m, bad), std::invalid_argument);
}

TEST_CASE("self-simulated exceedances give uniform PIT") {
  Pipeline p = run_pipeline(1, 5000, 3, 0.95);
  auto s = sample::AngularSampler::empirical(p.model.exceedances, 9);
  sample::SimulatedCloud cloud =
      sample::sample_exceedances(p.model, s, 2000, &p.tm);
  threshold::ExceedanceSample exc;
  exc.angles = cloud.angles;
  exc.radii = cloud.radii;
  exc.thresholds = cloud.thresholds;
  exc.source_size = 2000;
  diag::PpQq pq = diag::pp_qq_data(p.model, exc);
  CHECK(stats::ks_uniform(pq.u) <= 1.36 / std::sqrt(2000.0));
}

TEST_CASE("fitted pipeline hugs the PP diagonal") {
  Pipeline p = run_pipeline(1, 10000, 5, 0.95);
  diag::PpQq pq = diag::pp_qq_data(p.model);
  double sup = 0.0;
  for (int i = 0; i < pq.model_p.size(); ++i)
    sup = std::max(sup, std::abs(pq.model_p[i] - pq.empirical_p[i]));
  CHECK(sup <= 0.03);
}

TEST_CASE("return curves reproduce gamma quantiles and calibrate") {
  SUBCASE("constant gauge closed forms") {
    fit::FittedModel m = flat_model(2, 1.2, 0.95);
    diag::ReturnCurve c100 = diag::return_curve(m, 100.0);
    CHECK(c100.angles.rows() == 500);
    for (int i = 0; i < c100.radii.size(); ++i)
      CHECK(std::abs(c100.radii[i] - 5.5319600566615090) < 1e-9);
    diag::ReturnCurve c50 = diag::return_curve(m, 50.0, 37);
    CHECK(c50.angles.rows() == 37);
    for (int i = 0; i < c50.radii.size(); ++i)
      CHECK(std::abs(c50.radii[i] - 4.8616014182644909) < 1e-9);

    // at the validity floor the curve is the model's own tau-quantile
    fit::FittedModel m8 = flat_model(2, 1.0, 0.8);
    diag::ReturnCurve floor = diag::return_curve(m8, 5.0, 11);
    const double c = stats::erlang_quantile(0.8, 2, 1.0);
    for (int i = 0; i < floor.radii.size(); ++i)
      CHECK(std::abs(floor.radii[i] - c) < 1e-12);
    CHECK_THROWS_AS(diag::return_curve(m8, 4.999), std::invalid_argument);

    // pointwise monotone in T
    diag::ReturnCurve lo = diag::return_curve(m8, 10.0, 11);
    diag::ReturnCurve hi = diag::return_curve(m8, 20.0, 11);
    for (int i = 0; i < lo.radii.size(); ++i)
      CHECK(hi.radii[i] > lo.radii[i]);

    // d = 3 default grid
    fit::FittedModel m3 = flat_model(3, 1.0, 0.8);
    diag::ReturnCurve c3 = diag::return_curve(m3, 10.0);
    CHECK(c3.angles.rows() > 1500);
    CHECK(c3.angles.rows() < 2500);
    const double r3 = stats::erlang_quantile(0.9, 3, 1.0);
    for (int i = 0; i < c3.radii.size(); ++i)
      CHECK(std::abs(c3.radii[i] - r3) < 1e-9);
  }

  SUBCASE("exceedance proportions beyond the curve track 1/T") {
    Pipeline p = run_pipeline(1, 5000, 4, 0.95);
    for (double T : {50.0, 100.0, 1000.0}) {
      const double prop = diag::proportion_beyond(p.model, p.x, T);
      const double se = std::sqrt((1.0 / T) * (1.0 - 1.0 / T) / 5000.0);
      CHECK(std::abs(prop - 1.0 / T) <= 3.0 * se);
    }
    CHECK_THROWS_AS(diag::proportion_beyond(p.model, p.x, 10.0),
                    std::invalid_argument);
  }
}

TEST_CASE("chi levels and regions respect the validity floor") {
  fit::FittedModel m = flat_model(2, 1.0, 0.8);
  const double c = stats::erlang_quantile(0.8, 2, 1.0);

  // joint floor: both coordinates at c/2 (mesh granularity ~5e-4)
  const double u0 = diag::u0_level(m, {0, 1});
  CHECK(std::abs(u0 - 0.7762339457361064) < 1e-3);
  // singleton floor: the corner angle is on the mesh, so this is exact
  const double u0s = diag::u0_level(m, {0});
  CHECK(std::abs(u0s + std::expm1(-c)) < 1e-12);

  auto r_tau = [&](const vec_t&) { return c; };
  CHECK_NOTHROW(
      sample::validate_region(diag::chi_region(2, {0, 1}, u0 + 0.01), r_tau,
                              30.0));
  CHECK_THROWS_AS(
      sample::validate_region(diag::chi_region(2, {0, 1}, 0.70), r_tau, 30.0),
      std::invalid_argument);
  CHECK_NOTHROW(
      sample::validate_region(diag::chi_region(2, {0}, u0s + 0.01), r_tau,
                              30.0));

  sample::ExtremalRegion B = diag::chi_region(3, {0, 2}, 0.9);
  CHECK(B.lower[0] == -std::log1p(-0.9));
  CHECK(B.lower[1] == 0.0);
  CHECK(B.lower[2] == B.lower[0]);
  CHECK(std::isinf(B.upper.minCoeff()));

  CHECK_THROWS_AS(diag::chi_region(2, {}, 0.9), std::invalid_argument);
  CHECK_THROWS_AS(diag::chi_region(2, {0, 0}, 0.9), std::invalid_argument);
  CHECK_THROWS_AS(diag::chi_region(2, {0, 2}, 0.9), std::invalid_argument);
  CHECK_THROWS_AS(diag::chi_region(2, {0, 1}, 1.0), std::invalid_argument);
}

TEST_CASE("model chi matches the closed form and the empirical band") {
  Pipeline p = run_pipeline(1, 5000, 1, 0.90);
  const double u0 = diag::u0_level(p.model, {0, 1});
  CHECK(u0 <= 0.985);

  vec_t grid(3);
  grid << 0.985, 0.99, 0.995;
  auto s = sample::AngularSampler::empirical(p.model.exceedances, 77);
  diag::ChiEstimate chi =
      diag::chi_model(p.model, s, {0, 1}, grid, 50000, &p.x);
  CHECK(chi.u0 == u0);
  for (int k = 0; k < 3; ++k) {
    CHECK(chi.model[k] > 0.0);
    CHECK(chi.se[k] > 0.0);
  }
  // closed-form tail coefficient of the training copula at u = 0.99
  CHECK(std::abs(chi.model[1] - 0.6826048570169435) <= 0.06);
  // bootstrap percentile band of the empirical value covers the model value
  diag::ChiBand band = diag::chi_empirical_band(p.x, {0, 1}, grid, 200, 7);
  CHECK(band.lower[1] <= chi.model[1]);
  CHECK(chi.model[1] <= band.upper[1]);
  CHECK(band.lower[1] < band.upper[1]);
  // the estimate's empirical column is the rank-based estimator
  vec_t emp = diag::chi_empirical(p.x, {0, 1}, grid);
  CHECK((emp - chi.empirical).cwiseAbs().maxCoeff() == 0.0);

  vec_t low(1);
  low << 0.5;
  CHECK_THROWS_AS(diag::chi_model(p.model, s, {0, 1}, low, 1000),
                  std::invalid_argument);
  CHECK_THROWS_AS(diag::chi_model(p.model, s, {0, 1}, vec_t(), 1000),
                  std::invalid_argument);
  fit::FittedModel unrated = p.model;
  unrated.exceedances.source_size = 0;
  CHECK_THROWS_AS(diag::chi_model(unrated, s, {0, 1}, grid, 1000),
                  std::invalid_argument);
}

TEST_CASE("empirical chi is exactly one for singletons") {
  stats::Rng rng(3);
  mat_t x(512, 2);
  for (int i = 0; i < 512; ++i)
    for (int j = 0; j < 2; ++j) x(i, j) = rng.normal();
  vec_t grid(3);
  grid << 0.5, 0.75, 0.875;
  vec_t chi0 = diag::chi_empirical(x, {0}, grid);
  vec_t chi1 = diag::chi_empirical(x, {1}, grid);
  for (int k = 0; k < 3; ++k) {
    CHECK(chi0[k] == 1.0);
    CHECK(chi1[k] == 1.0);
  }
  // rank-based, so invariant under monotone margin changes
  mat_t y = (x.array() * 3.7 + 1.0).matrix();
  vec_t joint_x = diag::chi_empirical(x, {0, 1}, grid);
  vec_t joint_y = diag::chi_empirical(y, {0, 1}, grid);
  CHECK((joint_x - joint_y).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("independent margins have vanishing chi") {
  stats::Rng rng(5);
  mat_t ind(20000, 2);
  for (int i = 0; i < 20000; ++i)
    for (int j = 0; j < 2; ++j) ind(i, j) = rng.exponential();
  vec_t u9(1);
  u9 << 0.9;
  CHECK(std::abs(diag::chi_empirical(ind, {0, 1}, u9)[0] - 0.1) <= 0.03);

  // fitted model on an independence copula: chi at u = 0.99 nearly zero
  data::Dataset raw = data::simulate(data::gaussian_spec(2, 0.0), 4000, 13);
  data::Dataset expo = data::to_exponential_margins(raw, 0.95);
  auto [w, r] = threshold::split_radial_angular(expo.x);
  threshold::ThresholdModel tm(w, r, 0.90);
  threshold::ExceedanceSample exc = threshold::extract_exceedances(tm, w, r);
  geom::SimplexMesh mesh = geom::make_regular_mesh(2, 10);
  fit::FitConfig fc;
  fc.mode = fit::Mode::radial;
  fc.lambda = 1.0;
  fc.bounded = true;
  fit::FittedModel m = fit::fit(fc, mesh, exc, 0.90);
  CHECK(diag::u0_level(m, {0, 1}) <= 0.95);
  auto s = sample::AngularSampler::empirical(m.exceedances, 3);
  vec_t u99(1);
  u99 << 0.99;
  diag::ChiEstimate chi = diag::chi_model(m, s, {0, 1}, u99, 50000);
  CHECK(chi.model[0] <= 0.15);
}

TEST_CASE("limit-set exports cover both geometries") {
  // closed-form logistic boundary
  gauge::GaugeFn g2 = gauge::logistic_gauge(2, 0.4);
  diag::LimitSetExport e2 = diag::export_limit_set(g2, 2, 501);
  CHECK(e2.angles.rows() == 501);
  CHECK(e2.dropped == -1);
  bool found_mid = false;
  for (int i = 0; i < e2.angles.rows(); ++i) {
    CHECK(e2.radii[i] > 0.0);
    if (e2.angles(i, 0) == 0.5) {
      found_mid = true;
      CHECK(std::abs(e2.radii[i] - 2.0) < 1e-12);  // g(.5,.5) = .5
    }
  }
  CHECK(found_mid);

  // bounded fitted gauge touches the unit box in every coordinate
  Pipeline p = run_pipeline(1, 5000, 8, 0.95);
  diag::LimitSetExport eb = diag::export_limit_set(*p.model.radial, 2001);
  for (int j = 0; j < 2; ++j) {
    double ext = 0.0;
    for (int i = 0; i < eb.angles.rows(); ++i)
      ext = std::max(ext, eb.radii[i] * eb.angles(i, j));
    CHECK(std::abs(ext - 1.0) <= 1e-3);
  }

  // signed-circle geometry: ambient angles on the unit diamond
  gauge::GaugeFn gl = gauge::signed_gaussian_gauge(
      (mat_t(2, 2) << 1.0, -0.5, -0.5, 1.0).finished());
  diag::LimitSetExport ec = diag::export_limit_set(gl, 2, 400, true);
  CHECK(ec.angles.rows() == 400);
  for (int i = 0; i < 400; ++i) {
    CHECK(std::abs(std::abs(ec.angles(i, 0)) + std::abs(ec.angles(i, 1)) -
                   1.0) < 1e-12);
    CHECK(ec.radii[i] > 0.0);
  }
  // flat gauge on the circle mesh: the diamond itself
  gauge::PwlGauge flat_circle(geom::make_laplace_mesh(8), vec_t::Ones(8));
  diag::LimitSetExport ef = diag::export_limit_set(flat_circle, 200);
  for (int i = 0; i < ef.radii.size(); ++i)
    CHECK(std::abs(ef.radii[i] - 1.0) < 1e-12);

  CHECK_THROWS_AS(diag::export_limit_set(g2, 4, 100), std::invalid_argument);
  CHECK_THROWS_AS(diag::export_limit_set(g2, 3, 100, true),
                  std::invalid_argument);
  CHECK_THROWS_AS(diag::export_limit_set(g2, 2, 1), std::invalid_argument);
}

TEST_CASE("four-dimensional sets project onto stable shadows") {
  gauge::GaugeFn g4 = gauge::logistic_gauge(4, 0.4);
  gauge::GaugeFn g3 = gauge::logistic_gauge(3, 0.4);
  auto projs = diag::limit_set_projections(g4, 4, 120, 50);
  REQUIRE(projs.size() == 4);
  // the symmetric gauge's shadows all equal the 3-D logistic set
  for (int k = 0; k < 4; ++k) {
    CHECK(projs[k].dropped == k);
    for (int i = 0; i < projs[k].angles.rows(); ++i) {
      vec_t v = projs[k].angles.row(i).transpose();
      CHECK(std::abs(projs[k].radii[i] - 1.0 / g3(v)) < 1e-5);
    }
  }
  // refinement stability of the dropped-coordinate mesh
  auto fine = diag::limit_set_projections(g4, 4, 120, 100);
  for (int k = 0; k < 4; ++k)
    CHECK((projs[k].radii - fine[k].radii).cwiseAbs().maxCoeff() <= 1e-3);

  // piecewise-linear overload
  geom::SimplexMesh mesh4 = geom::make_sparse_mesh(4, 1);
  gauge::PwlGauge pw(mesh4, vec_t::Ones(mesh4.num_nodes()));
  auto pp = diag::limit_set_projections(pw, 40, 50);
  REQUIRE(pp.size() == 4);
  for (const auto& e : pp)
    for (int i = 0; i < e.radii.size(); ++i) {
      CHECK(e.radii[i] > 0.0);
      CHECK(std::isfinite(e.radii[i]));
    }

  CHECK_THROWS_AS(diag::limit_set_projections(g3, 3, 100), std::invalid_argument);
  geom::SimplexMesh mesh2 = geom::make_regular_mesh(2, 1);
  gauge::PwlGauge pw2(mesh2, vec_t::Ones(2));
  CHECK_THROWS_AS(diag::limit_set_projections(pw2, 100),
                  std::invalid_argument);
}

TEST_CASE("diagnostic tables export as CSV") {
  fit::FittedModel m = flat_model(2, 1.0, 0.8);
  threshold::ExceedanceSample exc;
  exc.angles = mat_t::Constant(5, 2, 0.5);
  exc.radii.resize(5);
  exc.radii << 4.0, 5.0, 6.0, 7.0, 8.0;
  exc.thresholds = vec_t::Constant(5, 3.0);
  exc.source_size = 25;
  m.exceedances = exc;

  std::string header;
  const std::string f1 = "diag_ppqq_tmp.csv";
  diag::write_ppqq_csv(f1, diag::pp_qq_data(m, exc));
  CHECK(count_lines(f1, &header) == 5);
  CHECK(header == "empirical_p,model_p,empirical_q,model_q");

  const std::string f2 = "diag_curve_tmp.csv";
  diag::write_return_curve_csv(f2, diag::return_curve(m, 50.0, 21));
  CHECK(count_lines(f2, &header) == 21);
  CHECK(header == "w1,w2,r");

  const std::string f3 = "diag_chi_tmp.csv";
  auto s = sample::AngularSampler::empirical(exc, 1);
  vec_t grid(2);
  grid << 0.9, 0.95;
  diag::ChiEstimate chi = diag::chi_model(m, s, {0, 1}, grid, 2000);
  CHECK(std::isnan(chi.empirical[0]));  // no data supplied
  diag::write_chi_csv(f3, chi);
  CHECK(count_lines(f3, &header) == 2);
  CHECK(header == "u,empirical,model,se");
  {
    std::ifstream in(f3);
    std::string line;
    std::getline(in, line);
    std::getline(in, line);
    CHECK(line.find("nan") != std::string::npos);
  }

  const std::string f4 = "diag_set_tmp.csv";
  diag::write_limit_set_csv(
      f4, diag::export_limit_set(gauge::logistic_gauge(3, 0.5), 3, 200));
  int n4 = count_lines(f4, &header);
  CHECK(n4 > 100);
  CHECK(header == "w1,w2,w3,r");

  std::remove(f1.c_str());
  std::remove(f2.c_str());
  std::remove(f3.c_str());
  std::remove(f4.c_str());
}

}  // TEST_SUITE("diagnostics")
