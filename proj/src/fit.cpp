#include "pwle/fit.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <memory>
#include <stdexcept>
#include <utility>

#include <json.hpp>

#include "pwle/stats.hpp"

namespace pwle::fit {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// Per-exceedance quantities that do not depend on theta: the mesh region each
// angle falls in and the theta-free part of the radial likelihood.
struct Prepared {
  std::shared_ptr<const geom::SimplexMesh> mesh;
  int d = 0;
  int n = 0;
  mat_t w;
  vec_t r;
  vec_t rtau;
  std::vector<int> region;
  double radial_const = 0.0;

  Prepared(std::shared_ptr<const geom::SimplexMesh> m,
           const threshold::ExceedanceSample& exc)
      : mesh(std::move(m)),
        d(mesh->d),
        n(static_cast<int>(exc.radii.size())),
        w(exc.angles),
        r(exc.radii),
        rtau(exc.thresholds) {
    if (w.cols() != d)
      throw std::invalid_argument("fit: exceedance angles do not match the mesh dimension");
    if (w.rows() != n || rtau.size() != n)
      throw std::invalid_argument("fit: exceedance fields have mismatched sizes");
    region.resize(n);
    for (int i = 0; i < n; ++i) {
      if (!(r[i] > 0.0) || rtau[i] < 0.0 || !(r[i] > rtau[i]))
        throw std::invalid_argument("fit: exceedances must satisfy r > r_tau >= 0");
      if (mesh->kind == geom::MeshKind::LaplaceCircle) {
        const auto [rad, ang] = geom::laplace_decompose(w(i, 0), w(i, 1));
        region[i] = geom::locate_region(*mesh, ang);
      } else {
        region[i] = geom::locate_region(*mesh, vec_t(w.row(i).transpose()));
      }
      radial_const -= (d - 1) * std::log(r[i]);
    }
    radial_const += n * std::lgamma(d);
  }

  // -sum log[ f_Ga(r_i; d, g(w_i)) / (1 - F_Ga(rtau_i; d, g(w_i))) ]
  double radial_nll(const gauge::PwlGauge& g) const {
    const mat_t& grad = g.gradients();
    double acc = 0.0;
    for (int i = 0; i < n; ++i) {
      const double rate = grad.row(region[i]).dot(w.row(i));
      if (!(rate > 0.0) || !std::isfinite(rate)) return kInf;
      const double x = rate * rtau[i];
      double poly = 1.0, term = 1.0;
      for (int j = 1; j < d; ++j) {
        term *= x / j;
        poly += term;
      }
      acc += -d * std::log(rate) + rate * (r[i] - rtau[i]) + std::log(poly);
    }
    acc += radial_const;
    return std::isfinite(acc) ? acc : kInf;
  }

  // sum_i d log g(w_i) + n log vol(G); the constant n log d is dropped.
  double angular_nll(const gauge::PwlGauge& g) const {
    const double vol = g.volume();
    if (!(vol > 0.0) || !std::isfinite(vol)) return kInf;
    const mat_t& grad = g.gradients();
    double acc = 0.0;
    for (int i = 0; i < n; ++i) {
      const double gi = grad.row(region[i]).dot(w.row(i));
      if (!(gi > 0.0) || !std::isfinite(gi)) return kInf;
      acc += std::log(gi);
    }
    const double out = d * acc + n * std::log(vol);
    return std::isfinite(out) ? out : kInf;
  }
};

double penalty_of(const gauge::PwlGauge& g) {
  const geom::SimplexMesh& mesh = g.mesh();
  const mat_t& grad = g.gradients();
  double acc = 0.0;
  for (int node = 0; node < mesh.num_nodes(); ++node) {
    const auto& pairs = mesh.node_pairs[node];
    if (pairs.empty()) continue;
    double s = 0.0;
    for (const auto& [a, b] : pairs)
      s += (grad.row(a) - grad.row(b)).squaredNorm();
    acc += s / static_cast<double>(pairs.size());
  }
  return acc / static_cast<double>(mesh.num_nodes());
}

void check_theta(const vec_t& theta, const geom::SimplexMesh& mesh) {
  if (theta.size() != mesh.num_nodes())
    throw std::invalid_argument("fit: one scale per mesh node required");
  if (!(theta.minCoeff() > 0.0))
    throw std::invalid_argument("fit: scales must be positive");
}

double mode_nll(Mode mode, const Prepared& prep, const gauge::PwlGauge& g) {
  switch (mode) {
    case Mode::radial: return prep.radial_nll(g);
    case Mode::angular: return prep.angular_nll(g);
    case Mode::joint: {
      const double a = prep.radial_nll(g);
      if (!std::isfinite(a)) return kInf;
      const double b = prep.angular_nll(g);
      return std::isfinite(b) ? a + b : kInf;
    }
  }
  return kInf;
}

// Two chained simplex runs, the second warm-started with a tighter initial
// simplex; deterministic.
stats::NelderMeadResult minimize2(const std::function<double(const vec_t&)>& f,
                                  const vec_t& z0, int budget, double tol) {
  stats::NelderMeadOptions coarse;
  coarse.tol = tol;
  coarse.max_evals = budget;
  coarse.init_step = 0.2;
  stats::NelderMeadResult r1 = stats::nelder_mead(f, z0, coarse);
  stats::NelderMeadOptions fine = coarse;
  fine.init_step = 0.02;
  stats::NelderMeadResult r2 = stats::nelder_mead(f, r1.x, fine);
  r2.evals += r1.evals;
  return r2;
}

// Maximum scaled vertex coordinate theta_k |w*_kj| and the per-coordinate
// attainment sets drive the box-touching loop.
mat_t scaled_vertices(const geom::SimplexMesh& mesh, const vec_t& theta) {
  return theta.asDiagonal() * mesh.angles.cwiseAbs();
}

struct Engine {
  const geom::SimplexMesh* mesh_in;
  std::shared_ptr<const geom::SimplexMesh> meshp;
  Prepared prep;
  FitConfig cfg;

  Engine(const FitConfig& config, const geom::SimplexMesh& mesh,
         const threshold::ExceedanceSample& exc)
      : mesh_in(&mesh),
        meshp(std::make_shared<geom::SimplexMesh>(mesh)),
        prep(meshp, exc),
        cfg(config) {}

  int budget(int nfree) const {
    return cfg.max_evals > 0 ? cfg.max_evals : 400 * nfree;
  }

  double objective(const vec_t& theta) const {
    gauge::PwlGauge g(meshp, theta);
    const double nll = mode_nll(cfg.mode, prep, g);
    if (!std::isfinite(nll)) return kInf;
    if (cfg.lambda == 0.0) return nll;
    const double val = nll + cfg.lambda * penalty_of(g);
    return std::isfinite(val) ? val : kInf;
  }

  // Minimize over log theta with some entries held fixed. `free_idx` lists the
  // optimized entries; `theta` holds the start and receives the result.
  stats::NelderMeadResult optimize(vec_t& theta, const std::vector<int>& free_idx) {
    const int nfree = static_cast<int>(free_idx.size());
    vec_t z0(nfree);
    for (int k = 0; k < nfree; ++k) z0[k] = std::log(theta[free_idx[k]]);
    vec_t work = theta;
    auto f = [&](const vec_t& z) -> double {
      for (int k = 0; k < nfree; ++k) {
        const double t = std::exp(z[k]);
        if (!(t > 0.0) || !std::isfinite(t)) return kInf;
        work[free_idx[k]] = t;
      }
      try {
        return objective(work);
      } catch (const std::exception&) {
        return kInf;
      }
    };
    stats::NelderMeadResult res = minimize2(f, z0, budget(nfree), cfg.tol);
    for (int k = 0; k < nfree; ++k) theta[free_idx[k]] = std::exp(res.x[k]);
    return res;
  }
};

std::vector<int> all_indices(int n) {
  std::vector<int> idx(n);
  for (int i = 0; i < n; ++i) idx[i] = i;
  return idx;
}

threshold::ExceedanceSample subset(const threshold::ExceedanceSample& exc,
                                   const std::vector<int>& rows) {
  threshold::ExceedanceSample out;
  out.source_size = exc.source_size;
  out.angles.resize(rows.size(), exc.angles.cols());
  out.radii.resize(rows.size());
  out.thresholds.resize(rows.size());
  out.indices.reserve(rows.size());
  for (std::size_t k = 0; k < rows.size(); ++k) {
    out.angles.row(k) = exc.angles.row(rows[k]);
    out.radii[k] = exc.radii[rows[k]];
    out.thresholds[k] = exc.thresholds[rows[k]];
    out.indices.push_back(
        rows[k] < static_cast<int>(exc.indices.size()) ? exc.indices[rows[k]]
                                                       : rows[k]);
  }
  return out;
}

}  // namespace

std::string mode_name(Mode m) {
  switch (m) {
    case Mode::radial: return "radial";
    case Mode::angular: return "angular";
    case Mode::joint: return "joint";
  }
  throw std::invalid_argument("mode_name: unknown mode");
}

Mode mode_from_name(const std::string& name) {
  if (name == "radial") return Mode::radial;
  if (name == "angular") return Mode::angular;
  if (name == "joint") return Mode::joint;
  throw std::invalid_argument("unknown fit mode: " + name);
}

std::string pipeline_label(Mode mode, bool bounded, bool model_angles) {
  switch (mode) {
    case Mode::radial:
      if (model_angles) return bounded ? "SS4" : "SS3";
      return bounded ? "SS2" : "SS1";
    case Mode::joint:
      return bounded ? "SS6" : "SS5";
    case Mode::angular:
      return "angular";
  }
  throw std::invalid_argument("pipeline_label: unknown mode");
}

double default_lambda(Mode mode) { return mode == Mode::angular ? 20.0 : 1.0; }

void validate(const FitConfig& config) {
  if (config.lambda < 0.0)
    throw std::invalid_argument("fit: lambda must be >= 0");
  if (config.mode == Mode::angular && config.bounded)
    throw std::invalid_argument("fit: angular fits cannot be bounded");
  if (config.max_evals < 0)
    throw std::invalid_argument("fit: max_evals must be >= 0");
  if (!(config.tol > 0.0))
    throw std::invalid_argument("fit: tol must be positive");
}

const gauge::PwlGauge& FittedModel::primary() const {
  if (radial) return *radial;
  if (angular) return *angular;
  throw std::logic_error("FittedModel: no gauge present");
}

double nll_radial(const vec_t& theta, const geom::SimplexMesh& mesh,
                  const threshold::ExceedanceSample& exc) {
  check_theta(theta, mesh);
  auto meshp = std::make_shared<geom::SimplexMesh>(mesh);
  Prepared prep(meshp, exc);
  return prep.radial_nll(gauge::PwlGauge(meshp, theta));
}

double nll_angular(const vec_t& theta, const geom::SimplexMesh& mesh,
                   const threshold::ExceedanceSample& exc) {
  check_theta(theta, mesh);
  auto meshp = std::make_shared<geom::SimplexMesh>(mesh);
  Prepared prep(meshp, exc);
  return prep.angular_nll(gauge::PwlGauge(meshp, theta));
}

double gradient_penalty(const vec_t& theta, const geom::SimplexMesh& mesh) {
  check_theta(theta, mesh);
  return penalty_of(gauge::PwlGauge(mesh, theta));
}

vec_t default_init(const geom::SimplexMesh& mesh,
                   const threshold::ExceedanceSample& exc) {
  const int N = mesh.num_nodes();
  const int n = static_cast<int>(exc.radii.size());
  if (n == 0) throw std::invalid_argument("fit: no exceedances");
  std::vector<double> sorted(exc.thresholds.data(), exc.thresholds.data() + n);
  std::sort(sorted.begin(), sorted.end());
  const double med = n % 2 ? sorted[n / 2]
                           : 0.5 * (sorted[n / 2 - 1] + sorted[n / 2]);
  vec_t theta(N);
  for (int k = 0; k < N; ++k) {
    int nearest = 0;
    double best = kInf;
    for (int i = 0; i < n; ++i) {
      const double dist = (exc.angles.row(i) - mesh.angles.row(k)).squaredNorm();
      if (dist < best) {
        best = dist;
        nearest = i;
      }
    }
    const double rt = exc.thresholds[nearest];
    double raw = (med > 0.0 && rt > 0.0) ? rt / med : 1.0;
    const double cap = 1.0 / mesh.angles.row(k).cwiseAbs().maxCoeff();
    theta[k] = std::min(std::max(raw, 1e-3), cap);
  }
  return theta;
}

FittedModel fit(const FitConfig& config, const geom::SimplexMesh& mesh,
                const threshold::ExceedanceSample& exc, double tau,
                const vec_t& init) {
  validate(config);
  if (exc.radii.size() == 0) throw std::invalid_argument("fit: no exceedances");
  Engine eng(config, mesh, exc);
  if (eng.cfg.ss_label.empty())
    eng.cfg.ss_label = pipeline_label(eng.cfg.mode, eng.cfg.bounded, false);

  vec_t theta = init.size() > 0 ? init : default_init(mesh, exc);
  check_theta(theta, mesh);
  std::vector<int> free_idx = all_indices(mesh.num_nodes());
  if (eng.cfg.mode == Mode::angular) {
    theta /= theta[0];  // the angular density is scale-free; pin the first node
    free_idx.erase(free_idx.begin());
  }
  stats::NelderMeadResult res = eng.optimize(theta, free_idx);

  FittedModel model;
  model.exceedances = exc;
  model.config = eng.cfg;
  model.tau = tau;
  model.objective = res.fval;
  model.converged = res.converged;
  gauge::PwlGauge g(eng.meshp, theta);
  if (eng.cfg.mode == Mode::radial) {
    model.radial = g;
  } else if (eng.cfg.mode == Mode::angular) {
    model.angular = g;
  } else {
    model.radial = g;
    model.angular = g;
  }
  if (eng.cfg.mode != Mode::angular && eng.cfg.bounded) apply_bounding(model);
  return model;
}

void apply_bounding(FittedModel& model) {
  if (model.config.mode == Mode::angular || !model.radial)
    throw std::invalid_argument("bounding requires a radial or joint fit");
  const gauge::PwlGauge& g0 = *model.radial;
  Engine eng(model.config, g0.mesh(), model.exceedances);
  const int N = g0.mesh().num_nodes();
  vec_t theta = g0.theta();
  mat_t scaled = scaled_vertices(g0.mesh(), theta);
  double gmax = scaled.maxCoeff();

  model.bounding = BoundingTrace{};
  if (std::abs(gmax - 1.0) <= 1e-9) return;  // already at the fixed point

  std::vector<char> frozen(N, 0);
  bool all_runs_converged = true;
  for (int round = 0; round < N + 2; ++round) {
    // Per coordinate, the nodes attaining the largest scaled coordinate
    // (ties within 1e-12 relative all freeze together).
    std::vector<int> fresh;
    for (int j = 0; j < g0.mesh().d; ++j) {
      const double colmax = scaled.col(j).maxCoeff();
      for (int i = 0; i < N; ++i) {
        if (frozen[i]) continue;
        if (scaled(i, j) >= colmax * (1.0 - 1e-12)) {
          frozen[i] = 1;
          fresh.push_back(i);
        }
      }
    }
    if (fresh.empty()) break;
    for (int i : fresh)
      theta[i] = 1.0 / g0.mesh().angles.row(i).cwiseAbs().maxCoeff();
    model.bounding.freeze_sizes.push_back(
        static_cast<int>(std::count(frozen.begin(), frozen.end(), 1)));
    ++model.bounding.iterations;

    std::vector<int> free_idx;
    for (int i = 0; i < N; ++i)
      if (!frozen[i]) free_idx.push_back(i);
    if (!free_idx.empty()) {
      stats::NelderMeadResult res = eng.optimize(theta, free_idx);
      all_runs_converged = all_runs_converged && res.converged;
    }
    scaled = scaled_vertices(g0.mesh(), theta);
    gmax = scaled.maxCoeff();
    if (gmax <= 1.0 + 1e-10 && gmax >= 1.0 - 1e-6) break;
    if (free_idx.empty())
      throw std::runtime_error("bounding froze every node without reaching the unit box");
  }
  if (!(gmax <= 1.0 + 1e-10 && gmax >= 1.0 - 1e-6))
    throw std::runtime_error("bounding did not reach the unit box");

  for (int i = 0; i < N; ++i)
    if (frozen[i]) model.bounding.frozen.push_back(i);
  gauge::PwlGauge g(eng.meshp, theta);
  model.radial = g;
  if (model.config.mode == Mode::joint) model.angular = g;
  model.objective = eng.objective(theta);
  model.converged = model.converged && all_runs_converged;
}

LambdaSelection select_lambda(const FitConfig& config,
                              const geom::SimplexMesh& mesh,
                              const threshold::ExceedanceSample& exc,
                              double tau, const vec_t& grid, int folds,
                              std::uint64_t seed) {
  validate(config);
  if (grid.size() == 0) throw std::invalid_argument("select_lambda: empty grid");
  if (grid.minCoeff() < 0.0)
    throw std::invalid_argument("select_lambda: lambda must be >= 0");
  if (folds < 2) throw std::invalid_argument("select_lambda: need >= 2 folds");
  const int n = static_cast<int>(exc.radii.size());
  if (n < folds)
    throw std::invalid_argument("select_lambda: fewer exceedances than folds");

  // Deterministic fold assignment: shuffled order, fold = position mod K.
  std::vector<int> order = all_indices(n);
  stats::Rng rng(seed);
  for (int i = n - 1; i > 0; --i)
    std::swap(order[i], order[static_cast<int>(rng.integer(i + 1))]);
  std::vector<int> fold(n);
  for (int pos = 0; pos < n; ++pos) fold[order[pos]] = pos % folds;

  const int G = static_cast<int>(grid.size());
  LambdaSelection sel;
  sel.grid = grid;
  sel.cv = vec_t::Constant(G, std::numeric_limits<double>::quiet_NaN());
  sel.fold_scores =
      mat_t::Constant(G, folds, std::numeric_limits<double>::quiet_NaN());
  sel.valid.assign(G, 1);

  for (int gi = 0; gi < G; ++gi) {
    FitConfig cfg = config;
    cfg.lambda = grid[gi];
    double acc = 0.0;
    for (int k = 0; k < folds && sel.valid[gi]; ++k) {
      std::vector<int> train, test;
      for (int i = 0; i < n; ++i) (fold[i] == k ? test : train).push_back(i);
      try {
        const threshold::ExceedanceSample tr = subset(exc, train);
        const threshold::ExceedanceSample te = subset(exc, test);
        const FittedModel m = fit(cfg, mesh, tr, tau);
        const vec_t& th = m.primary().theta();
        double score = 0.0;
        if (cfg.mode == Mode::radial) score = nll_radial(th, mesh, te);
        else if (cfg.mode == Mode::angular) score = nll_angular(th, mesh, te);
        else score = nll_radial(th, mesh, te) + nll_angular(th, mesh, te);
        if (!std::isfinite(score)) throw std::runtime_error("non-finite score");
        sel.fold_scores(gi, k) = score;
        acc += score;
      } catch (const std::exception&) {
        sel.valid[gi] = 0;
      }
    }
    if (sel.valid[gi]) sel.cv[gi] = acc / folds;
  }

  for (int gi = 0; gi < G; ++gi) {
    if (!sel.valid[gi]) continue;
    if (sel.best_index < 0 || sel.cv[gi] < sel.cv[sel.best_index])
      sel.best_index = gi;
  }
  if (sel.best_index < 0)
    throw std::runtime_error("select_lambda: every candidate had a failed fold");
  sel.lambda = grid[sel.best_index];
  return sel;
}

namespace {

nlohmann::json mesh_to_json(const geom::SimplexMesh& mesh) {
  nlohmann::json j;
  j["d"] = mesh.d;
  j["kind"] = mesh.kind == geom::MeshKind::LaplaceCircle ? "laplace_circle"
                                                         : "simplex";
  std::vector<std::vector<double>> angles(mesh.num_nodes());
  for (int k = 0; k < mesh.num_nodes(); ++k)
    angles[k].assign(mesh.angles.row(k).begin(), mesh.angles.row(k).end());
  j["angles"] = angles;
  j["circle"] = std::vector<double>(
      mesh.circle_coords.data(),
      mesh.circle_coords.data() + mesh.circle_coords.size());
  j["regions"] = mesh.regions;
  return j;
}

geom::SimplexMesh mesh_from_json(const nlohmann::json& j) {
  geom::SimplexMesh mesh;
  mesh.d = j.at("d").get<int>();
  const std::string kind = j.at("kind").get<std::string>();
  if (kind == "laplace_circle") mesh.kind = geom::MeshKind::LaplaceCircle;
  else if (kind == "simplex") mesh.kind = geom::MeshKind::Simplex;
  else throw std::runtime_error("model file: unknown mesh kind " + kind);
  const auto angles = j.at("angles").get<std::vector<std::vector<double>>>();
  mesh.angles.resize(angles.size(), mesh.d);
  for (std::size_t k = 0; k < angles.size(); ++k) {
    if (static_cast<int>(angles[k].size()) != mesh.d)
      throw std::runtime_error("model file: malformed node angle");
    for (int c = 0; c < mesh.d; ++c) mesh.angles(k, c) = angles[k][c];
  }
  const auto circle = j.at("circle").get<std::vector<double>>();
  mesh.circle_coords =
      Eigen::Map<const vec_t>(circle.data(), static_cast<Eigen::Index>(circle.size()));
  mesh.regions = j.at("regions").get<std::vector<region_t>>();
  geom::rebuild_adjacency(mesh);
  return mesh;
}

std::vector<double> theta_vector(const gauge::PwlGauge& g) {
  return std::vector<double>(g.theta().data(), g.theta().data() + g.theta().size());
}

}  // namespace

void save_model(const FittedModel& model, const std::string& path) {
  nlohmann::json j;
  j["format"] = "pwle-fitted-model";
  j["version"] = 1;
  j["config"] = {{"mode", mode_name(model.config.mode)},
                 {"bounded", model.config.bounded},
                 {"lambda", model.config.lambda},
                 {"max_evals", model.config.max_evals},
                 {"tol", model.config.tol},
                 {"ss_label", model.config.ss_label}};
  j["tau"] = model.tau;
  j["objective"] = model.objective;
  j["converged"] = model.converged;
  j["bounding"] = {{"iterations", model.bounding.iterations},
                   {"frozen", model.bounding.frozen},
                   {"freeze_sizes", model.bounding.freeze_sizes}};
  j["mesh"] = mesh_to_json(model.primary().mesh());
  if (model.radial) j["theta_radial"] = theta_vector(*model.radial);
  if (model.angular) j["theta_angular"] = theta_vector(*model.angular);

  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << j.dump(1) << "\n";
  if (!out.good()) throw std::runtime_error("failed writing " + path);
}

FittedModel load_model(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw std::runtime_error(path + ": not a model file (" + e.what() + ")");
  }
  if (j.value("format", "") != "pwle-fitted-model")
    throw std::runtime_error(path + ": not a model file");

  FittedModel model;
  const auto& jc = j.at("config");
  model.config.mode = mode_from_name(jc.at("mode").get<std::string>());
  model.config.bounded = jc.at("bounded").get<bool>();
  model.config.lambda = jc.at("lambda").get<double>();
  model.config.max_evals = jc.at("max_evals").get<int>();
  model.config.tol = jc.at("tol").get<double>();
  model.config.ss_label = jc.at("ss_label").get<std::string>();
  model.tau = j.at("tau").get<double>();
  model.objective = j.at("objective").get<double>();
  model.converged = j.at("converged").get<bool>();
  const auto& jb = j.at("bounding");
  model.bounding.iterations = jb.at("iterations").get<int>();
  model.bounding.frozen = jb.at("frozen").get<std::vector<int>>();
  model.bounding.freeze_sizes = jb.at("freeze_sizes").get<std::vector<int>>();

  auto meshp = std::make_shared<const geom::SimplexMesh>(mesh_from_json(j.at("mesh")));
  auto load_theta = [&](const char* key) -> vec_t {
    const auto v = j.at(key).get<std::vector<double>>();
    return Eigen::Map<const vec_t>(v.data(), static_cast<Eigen::Index>(v.size()));
  };
  if (j.contains("theta_radial"))
    model.radial = gauge::PwlGauge(meshp, load_theta("theta_radial"));
  if (j.contains("theta_angular"))
    model.angular = gauge::PwlGauge(meshp, load_theta("theta_angular"));
  if (!model.radial && !model.angular)
    throw std::runtime_error(path + ": model file has no gauge");
  return model;
}

}  // namespace pwle::fit
