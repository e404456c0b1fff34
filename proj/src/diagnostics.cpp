#include "pwle/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <stdexcept>

#include "pwle/mesh.hpp"
#include "pwle/stats.hpp"

namespace pwle::diag {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
constexpr double kInf = std::numeric_limits<double>::infinity();

const gauge::PwlGauge& radial_or_throw(const fit::FittedModel& model) {
  if (!model.radial)
    throw std::invalid_argument(
        "diagnostics need a model with a fitted radial gauge");
  return *model.radial;
}

bool is_circle(const gauge::PwlGauge& g) {
  return g.mesh().kind == geom::MeshKind::LaplaceCircle;
}

void check_tau(double tau) {
  if (!(tau > 0.0 && tau < 1.0))
    throw std::invalid_argument("model tau must lie in (0, 1)");
}

void check_subset(const std::vector<int>& C, int d) {
  if (C.empty()) throw std::invalid_argument("coordinate subset is empty");
  std::vector<int> s = C;
  std::sort(s.begin(), s.end());
  if (std::unique(s.begin(), s.end()) != s.end())
    throw std::invalid_argument("coordinate subset has duplicates");
  if (s.front() < 0 || s.back() >= d)
    throw std::invalid_argument("coordinate subset out of range");
}

/// Angle rows for a gauge's domain: simplex grid, or ambient unit vectors of
/// the signed circle.
mat_t domain_grid(const gauge::PwlGauge& g, int n) {
  if (is_circle(g)) {
    vec_t ws = geom::laplace_angle_grid(n);
    mat_t out(ws.size(), 2);
    for (int i = 0; i < ws.size(); ++i)
      out.row(i) = geom::laplace_unit(ws[i]).transpose();
    return out;
  }
  return geom::angle_grid(g.dim(), n);
}

double quantile_type7(std::vector<double>& v, double q) {
  std::sort(v.begin(), v.end());
  const double pos = q * (static_cast<double>(v.size()) - 1.0);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = std::min(lo + 1, v.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  return v[lo] * (1.0 - frac) + v[hi] * frac;
}

}  // namespace

PpQq pp_qq_data(const fit::FittedModel& model,
                const threshold::ExceedanceSample& exc) {
  const gauge::PwlGauge& g = radial_or_throw(model);
  const int n = static_cast<int>(exc.radii.size());
  const int d = g.dim();
  if (n == 0) throw std::invalid_argument("no exceedances to diagnose");
  if (exc.angles.rows() != n || exc.thresholds.size() != n ||
      exc.angles.cols() != d)
    throw std::invalid_argument("exceedance fields have mismatched shapes");

  PpQq out;
  out.u.resize(n);
  for (int i = 0; i < n; ++i) {
    const double rate = g.at_angle(vec_t(exc.angles.row(i).transpose()));
    const double delta = stats::erlang_log_sf(exc.radii[i], d, rate) -
                         stats::erlang_log_sf(exc.thresholds[i], d, rate);
    out.u[i] = -std::expm1(delta);  // 1 - sf(r)/sf(r_tau)
  }
  vec_t sorted = out.u;
  std::sort(sorted.begin(), sorted.end());
  out.empirical_p.resize(n);
  out.model_p = sorted;
  out.empirical_q.resize(n);
  out.model_q.resize(n);
  for (int i = 0; i < n; ++i) {
    const double p = (i + 1.0) / (n + 1.0);
    out.empirical_p[i] = p;
    out.empirical_q[i] = -std::log1p(-sorted[i]);
    out.model_q[i] = -std::log1p(-p);
  }
  return out;
}

PpQq pp_qq_data(const fit::FittedModel& model) {
  return pp_qq_data(model, model.exceedances);
}

ReturnCurve return_curve(const fit::FittedModel& model, double T,
                         int n_angles) {
  const gauge::PwlGauge& g = radial_or_throw(model);
  check_tau(model.tau);
  const double t_min = 1.0 / (1.0 - model.tau);
  if (!(T >= t_min * (1.0 - 1e-9)))
    throw std::invalid_argument(
        "return period below the model's validity floor 1/(1-tau)");
  const int d = g.dim();
  if (n_angles <= 0) n_angles = (d == 2) ? 500 : 2000;

  ReturnCurve curve;
  curve.T = T;
  curve.angles = domain_grid(g, n_angles);
  const int m = static_cast<int>(curve.angles.rows());
  curve.radii.resize(m);
  for (int i = 0; i < m; ++i) {
    const double rate = g.at_angle(vec_t(curve.angles.row(i).transpose()));
    curve.radii[i] = stats::erlang_quantile(1.0 - 1.0 / T, d, rate);
  }
  return curve;
}

double proportion_beyond(const fit::FittedModel& model, const mat_t& x,
                         double T) {
  const gauge::PwlGauge& g = radial_or_throw(model);
  check_tau(model.tau);
  if (!(T >= (1.0 / (1.0 - model.tau)) * (1.0 - 1e-9)))
    throw std::invalid_argument(
        "return period below the model's validity floor 1/(1-tau)");
  if (x.cols() != g.dim())
    throw std::invalid_argument("data dimension does not match the model");
  const int d = g.dim();
  const double p = 1.0 - 1.0 / T;
  int beyond = 0;
  for (int i = 0; i < x.rows(); ++i) {
    const double r = x.row(i).cwiseAbs().sum();
    if (r <= 0.0) continue;
    const vec_t w = x.row(i).transpose() / r;
    const double rate = g.at_angle(w);
    if (r > stats::erlang_quantile(p, d, rate)) ++beyond;
  }
  return static_cast<double>(beyond) / static_cast<double>(x.rows());
}

double u0_level(const fit::FittedModel& model, const std::vector<int>& C) {
  const gauge::PwlGauge& g = radial_or_throw(model);
  if (is_circle(g))
    throw std::invalid_argument(
        "chi diagnostics apply to exponential-margin (simplex) models only");
  check_tau(model.tau);
  const int d = g.dim();
  check_subset(C, d);
  const mat_t mesh = geom::angle_grid(d, d == 4 ? 10000 : 1000);
  double best = 0.0;
  for (int i = 0; i < mesh.rows(); ++i) {
    const vec_t w = mesh.row(i).transpose();
    const double rt = stats::erlang_quantile(model.tau, d, g.at_angle(w));
    double lo = kInf;
    for (int j : C) lo = std::min(lo, rt * w[j]);
    best = std::max(best, lo);
  }
  return -std::expm1(-best);  // standard exponential CDF
}

sample::ExtremalRegion chi_region(int d, const std::vector<int>& C, double u) {
  check_subset(C, d);
  if (!(u > 0.0 && u < 1.0))
    throw std::invalid_argument("chi level must lie in (0, 1)");
  sample::ExtremalRegion B;
  B.lower = vec_t::Zero(d);
  B.upper = vec_t::Constant(d, kInf);
  for (int j : C) B.lower[j] = -std::log1p(-u);
  return B;
}

ChiEstimate chi_model(const fit::FittedModel& model,
                      sample::AngularSampler& sampler,
                      const std::vector<int>& C, const vec_t& u_grid,
                      int n_star, const mat_t* data) {
  const gauge::PwlGauge& g = radial_or_throw(model);
  const int d = g.dim();
  check_subset(C, d);
  if (u_grid.size() == 0) throw std::invalid_argument("empty chi level grid");
  if (model.exceedances.source_size <= 0 ||
      model.exceedances.radii.size() == 0)
    throw std::invalid_argument(
        "chi needs the model's exceedance rate (source_size unset)");

  ChiEstimate out;
  out.C = C;
  out.u = u_grid;
  out.u0 = u0_level(model, C);
  for (int k = 0; k < u_grid.size(); ++k)
    if (u_grid[k] < out.u0 - 1e-12 || !(u_grid[k] < 1.0))
      throw std::invalid_argument(
          "chi level below the minimum valid level u0 (or >= 1)");

  // one shared cloud: model-implied thresholds, per the gamma-model scale
  sample::SimulatedCloud cloud = sample::sample_exceedances(model, sampler,
                                                            n_star);
  const double rate = static_cast<double>(model.exceedances.radii.size()) /
                      model.exceedances.source_size;
  out.model.resize(u_grid.size());
  out.se.resize(u_grid.size());
  out.empirical = vec_t::Constant(u_grid.size(), kNaN);
  for (int k = 0; k < u_grid.size(); ++k) {
    const auto est = sample::probability_from_cloud(
        cloud, chi_region(d, C, u_grid[k]), rate, model.tau);
    out.model[k] = est.probability / (1.0 - u_grid[k]);
    out.se[k] = est.se / (1.0 - u_grid[k]);
  }
  if (data != nullptr) out.empirical = chi_empirical(*data, C, u_grid);
  return out;
}

vec_t chi_empirical(const mat_t& x, const std::vector<int>& C,
                    const vec_t& u_grid) {
  const int n = static_cast<int>(x.rows());
  if (n == 0) throw std::invalid_argument("empty data matrix");
  check_subset(C, static_cast<int>(x.cols()));

  // rank/n scores per needed margin
  mat_t scores(n, static_cast<int>(C.size()));
  std::vector<int> order(n);
  for (std::size_t c = 0; c < C.size(); ++c) {
    const int j = C[c];
    for (int i = 0; i < n; ++i) order[i] = i;
    std::sort(order.begin(), order.end(),
              [&](int a, int b) { return x(a, j) < x(b, j); });
    for (int r = 0; r < n; ++r)
      scores(order[r], static_cast<int>(c)) = (r + 1.0) / n;
  }

  vec_t out(u_grid.size());
  for (int k = 0; k < u_grid.size(); ++k) {
    const double u = u_grid[k];
    if (!(u > 0.0 && u < 1.0))
      throw std::invalid_argument("chi level must lie in (0, 1)");
    int hits = 0;
    for (int i = 0; i < n; ++i) {
      bool all = true;
      for (int c = 0; c < scores.cols() && all; ++c)
        all = scores(i, c) > u;
      if (all) ++hits;
    }
    out[k] = hits / (n * (1.0 - u));
  }
  return out;
}

ChiBand chi_empirical_band(const mat_t& x, const std::vector<int>& C,
                           const vec_t& u_grid, int n_boot,
                           std::uint64_t seed, double alpha) {
  if (n_boot < 2) throw std::invalid_argument("need at least two resamples");
  if (!(alpha > 0.0 && alpha < 1.0))
    throw std::invalid_argument("band level must lie in (0, 1)");
  const int n = static_cast<int>(x.rows());
  if (n == 0) throw std::invalid_argument("empty data matrix");
  check_subset(C, static_cast<int>(x.cols()));

  stats::Rng rng(seed);
  mat_t values(n_boot, u_grid.size());
  mat_t resampled(n, x.cols());
  for (int b = 0; b < n_boot; ++b) {
    for (int i = 0; i < n; ++i) resampled.row(i) = x.row(rng.integer(n));
    values.row(b) = chi_empirical(resampled, C, u_grid).transpose();
  }
  ChiBand band;
  band.lower.resize(u_grid.size());
  band.upper.resize(u_grid.size());
  std::vector<double> col(n_boot);
  for (int k = 0; k < u_grid.size(); ++k) {
    for (int b = 0; b < n_boot; ++b) col[b] = values(b, k);
    band.lower[k] = quantile_type7(col, alpha / 2.0);
    band.upper[k] = quantile_type7(col, 1.0 - alpha / 2.0);
  }
  return band;
}

LimitSetExport export_limit_set(const gauge::GaugeFn& g, int d, int resolution,
                                bool circle) {
  if (d < 2 || d > 3)
    throw std::invalid_argument("direct limit-set export needs d in {2, 3}");
  if (circle && d != 2)
    throw std::invalid_argument("circle geometry is two-dimensional");
  if (resolution < 2) throw std::invalid_argument("resolution too small");

  LimitSetExport out;
  if (circle) {
    vec_t ws = geom::laplace_angle_grid(resolution);
    out.angles.resize(ws.size(), 2);
    for (int i = 0; i < ws.size(); ++i)
      out.angles.row(i) = geom::laplace_unit(ws[i]).transpose();
  } else {
    out.angles = geom::angle_grid(d, resolution);
  }
  const int m = static_cast<int>(out.angles.rows());
  out.radii.resize(m);
  for (int i = 0; i < m; ++i) {
    const double v = g(vec_t(out.angles.row(i).transpose()));
    if (!(v > 0.0) || !std::isfinite(v))
      throw std::runtime_error("gauge not positive and finite on the grid");
    out.radii[i] = 1.0 / v;
  }
  return out;
}

LimitSetExport export_limit_set(const gauge::PwlGauge& g, int resolution) {
  return export_limit_set([&g](const vec_t& x) { return g(x); }, g.dim(),
                          resolution, is_circle(g));
}

std::vector<LimitSetExport> limit_set_projections(const gauge::GaugeFn& g,
                                                  int d, int resolution,
                                                  int mesh_len) {
  if (d != 4)
    throw std::invalid_argument("projections are for four-dimensional sets");
  if (resolution < 2 || mesh_len < 2)
    throw std::invalid_argument("resolution too small");
  std::vector<LimitSetExport> out;
  const mat_t grid = geom::angle_grid(3, resolution);
  for (int drop = 0; drop < 4; ++drop) {
    std::vector<int> keep;
    for (int j = 0; j < 4; ++j)
      if (j != drop) keep.push_back(j);
    LimitSetExport e;
    e.dropped = drop;
    e.angles = grid;
    e.radii.resize(grid.rows());
    for (int i = 0; i < grid.rows(); ++i) {
      const double v = gauge::project_gauge(
          g, 4, keep, vec_t(grid.row(i).transpose()), mesh_len);
      if (!(v > 0.0) || !std::isfinite(v))
        throw std::runtime_error("gauge not positive and finite on the grid");
      e.radii[i] = 1.0 / v;
    }
    out.push_back(std::move(e));
  }
  return out;
}

std::vector<LimitSetExport> limit_set_projections(const gauge::PwlGauge& g,
                                                  int resolution,
                                                  int mesh_len) {
  if (g.dim() != 4)
    throw std::invalid_argument("projections are for four-dimensional sets");
  return limit_set_projections([&g](const vec_t& x) { return g(x); }, 4,
                               resolution, mesh_len);
}

// --- CSV export -------------------------------------------------------------

namespace {

std::ofstream open_csv(const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open " + path + " for writing");
  out.precision(17);
  return out;
}

void write_angle_radius(const std::string& path, const mat_t& angles,
                        const vec_t& radii) {
  std::ofstream out = open_csv(path);
  for (int j = 0; j < angles.cols(); ++j) out << "w" << (j + 1) << ",";
  out << "r\n";
  for (int i = 0; i < angles.rows(); ++i) {
    for (int j = 0; j < angles.cols(); ++j) out << angles(i, j) << ",";
    out << radii[i] << "\n";
  }
}

}  // namespace

void write_ppqq_csv(const std::string& path, const PpQq& data) {
  std::ofstream out = open_csv(path);
  out << "empirical_p,model_p,empirical_q,model_q\n";
  for (int i = 0; i < data.empirical_p.size(); ++i)
    out << data.empirical_p[i] << "," << data.model_p[i] << ","
        << data.empirical_q[i] << "," << data.model_q[i] << "\n";
}

void write_return_curve_csv(const std::string& path, const ReturnCurve& curve) {
  write_angle_radius(path, curve.angles, curve.radii);
}

void write_chi_csv(const std::string& path, const ChiEstimate& chi) {
  std::ofstream out = open_csv(path);
  out << "u,empirical,model,se\n";
  for (int i = 0; i < chi.u.size(); ++i)
    out << chi.u[i] << "," << chi.empirical[i] << "," << chi.model[i] << ","
        << chi.se[i] << "\n";
}

void write_limit_set_csv(const std::string& path, const LimitSetExport& e) {
  write_angle_radius(path, e.angles, e.radii);
}

}  // namespace pwle::diag
