// Command-line pipeline driver: simulate -> transform -> threshold -> fit ->
// extrapolate / diagnose, plus a threaded replication-study runner. Every
// subcommand accepts --config <file.json> whose keys mirror the long flag
// names; explicitly passed flags override config values. Each run writes a
// manifest JSON recording the resolved configuration, its hash, and library
// versions, so outputs are reproducible from the manifest alone.

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <limits>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "pwle/data.hpp"
#include "pwle/diagnostics.hpp"
#include "pwle/fit.hpp"
#include "pwle/gauge.hpp"
#include "pwle/mesh.hpp"
#include "pwle/sample.hpp"
#include "pwle/stats.hpp"
#include "pwle/threshold.hpp"
#include "pwle/types.hpp"

namespace {

using nlohmann::json;
using namespace pwle;

constexpr const char* kToolVersion = "1.0.0";

// --- config file handling ---------------------------------------------------

/// Parse a JSON file; parse errors are reported with the 1-based line and
/// column computed from the parser's byte offset.
json load_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config file " + path);
  std::stringstream buf;
  buf << in.rdbuf();
  const std::string text = buf.str();
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    std::size_t line = 1, col = 1;
    for (std::size_t i = 0; i + 1 < e.byte && i < text.size(); ++i) {
      if (text[i] == '\n') {
        ++line;
        col = 1;
      } else {
        ++col;
      }
    }
    throw std::runtime_error(path + ":" + std::to_string(line) + ":" +
                             std::to_string(col) + ": " + e.what());
  }
}

/// Binds config keys to option targets; a key only fills its target when the
/// matching flag was not given on the command line (flags override config).
class ConfigBinder {
 public:
  template <class T>
  void bind(CLI::Option* opt, std::string key, T& target) {
    entries_.push_back(
        {std::move(key), [opt, &target](const json& v) {
           if (opt->count() == 0) target = v.get<T>();
         }});
  }

  void merge(const std::string& path) const {
    if (path.empty()) return;
    const json cfg = load_json_file(path);
    if (!cfg.is_object())
      throw std::runtime_error(path + ": config must be a JSON object");
    for (const auto& [key, value] : cfg.items()) {
      auto it = std::find_if(entries_.begin(), entries_.end(),
                             [&](const Entry& e) { return e.key == key; });
      if (it == entries_.end())
        throw std::runtime_error(path + ": unknown config key \"" + key +
                                 "\" for this subcommand");
      it->apply(value);
    }
  }

 private:
  struct Entry {
    std::string key;
    std::function<void(const json&)> apply;
  };
  std::vector<Entry> entries_;
};

// --- manifest ---------------------------------------------------------------

std::string fnv1a_hex(const std::string& s) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", (unsigned long long)h);
  return buf;
}

void write_manifest(const std::string& path, const std::string& command,
                    const json& resolved) {
  json m;
  m["command"] = command;
  m["config"] = resolved;
  m["config_hash"] = fnv1a_hex(resolved.dump());
  m["versions"] = {
      {"pwle", kToolVersion},
      {"eigen", std::to_string(EIGEN_WORLD_VERSION) + "." +
                    std::to_string(EIGEN_MAJOR_VERSION) + "." +
                    std::to_string(EIGEN_MINOR_VERSION)},
      {"cli11", CLI11_VERSION},
      {"nlohmann_json", std::to_string(NLOHMANN_JSON_VERSION_MAJOR) + "." +
                            std::to_string(NLOHMANN_JSON_VERSION_MINOR) + "." +
                            std::to_string(NLOHMANN_JSON_VERSION_PATCH)},
  };
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write manifest " + path);
  out << m.dump(2) << "\n";
}

std::string manifest_path(const std::string& artifact) {
  return artifact + ".manifest.json";
}

// --- exceedance CSV + sidecar ----------------------------------------------

/// Plain numeric CSV with a one-line header. Exceedance files carry their own
/// sidecar schema, so they bypass data::read_csv (whose sidecar describes a
/// full dataset).
mat_t read_numeric_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::string line;
  if (!std::getline(in, line))
    throw std::runtime_error(path + ": empty file");
  std::vector<std::vector<double>> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<double> row;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) row.push_back(std::stod(cell));
    if (!rows.empty() && row.size() != rows.front().size())
      throw std::runtime_error(path + ": ragged row");
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw std::runtime_error(path + ": no data rows");
  mat_t x(static_cast<int>(rows.size()), static_cast<int>(rows[0].size()));
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (std::size_t j = 0; j < rows[i].size(); ++j)
      x(static_cast<int>(i), static_cast<int>(j)) = rows[i][j];
  return x;
}

void write_exceedances(const std::string& path,
                       const threshold::ExceedanceSample& exc, double tau,
                       data::Margins margins, double h_r, double h_w,
                       const std::string& kernel) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  out.precision(17);
  const int d = static_cast<int>(exc.angles.cols());
  for (int j = 0; j < d; ++j) out << "w" << (j + 1) << ",";
  out << "r,r_tau\n";
  for (int i = 0; i < exc.radii.size(); ++i) {
    for (int j = 0; j < d; ++j) out << exc.angles(i, j) << ",";
    out << exc.radii[i] << "," << exc.thresholds[i] << "\n";
  }
  json meta = {{"tau", tau},
               {"source_size", exc.source_size},
               {"margins", data::margins_name(margins)},
               {"h_r", h_r},
               {"h_w", h_w},
               {"kernel", kernel},
               {"d", d}};
  std::ofstream ms(data::meta_path(path));
  ms << meta.dump(2) << "\n";
}

struct LoadedExceedances {
  threshold::ExceedanceSample exc;
  double tau = 0.0;
  data::Margins margins = data::Margins::exponential;
};

LoadedExceedances read_exceedances(const std::string& path, double tau_flag,
                                   int source_flag) {
  const mat_t table = read_numeric_csv(path);
  const int cols = static_cast<int>(table.cols());
  if (cols < 4)
    throw std::runtime_error(path +
                             ": expected columns w1..wd, r, r_tau (d >= 2)");
  const int d = cols - 2;
  LoadedExceedances out;
  out.exc.angles = table.leftCols(d);
  out.exc.radii = table.col(d);
  out.exc.thresholds = table.col(d + 1);

  json meta;
  std::ifstream ms(data::meta_path(path));
  if (ms) meta = json::parse(ms, nullptr, true);
  out.tau = tau_flag > 0 ? tau_flag : meta.value("tau", 0.0);
  out.exc.source_size =
      source_flag > 0 ? source_flag : meta.value("source_size", 0);
  out.margins = data::margins_from_name(
      meta.value("margins", std::string("exponential")));
  if (!(out.tau > 0.0 && out.tau < 1.0))
    throw std::runtime_error(
        "tau unknown: pass --tau or keep the .meta.json sidecar beside " +
        path);
  return out;
}

// --- regions ----------------------------------------------------------------

/// "lo:hi;lo:hi[;lo:hi...]" with inf/-inf accepted.
sample::ExtremalRegion parse_region(const std::string& text) {
  std::vector<std::pair<double, double>> dims;
  std::stringstream ss(text);
  std::string part;
  while (std::getline(ss, part, ';')) {
    const auto colon = part.find(':');
    if (colon == std::string::npos)
      throw std::runtime_error("region \"" + text +
                               "\": each coordinate needs lo:hi");
    dims.emplace_back(std::stod(part.substr(0, colon)),
                      std::stod(part.substr(colon + 1)));
  }
  if (dims.size() < 2)
    throw std::runtime_error("region \"" + text + "\": need d >= 2 intervals");
  sample::ExtremalRegion B;
  B.lower.resize(static_cast<int>(dims.size()));
  B.upper.resize(static_cast<int>(dims.size()));
  for (std::size_t j = 0; j < dims.size(); ++j) {
    B.lower[static_cast<int>(j)] = dims[j].first;
    B.upper[static_cast<int>(j)] = dims[j].second;
  }
  return B;
}

std::vector<std::string> default_region_strings(int d) {
  if (d == 2) return {"10:12;10:12", "10:12;6:8", "10:12;2:4"};
  if (d == 3)
    return {"8:10;8:10;0.01:3", "8:10;5:7;0.01:3", "8:10;2:4;0.01:3"};
  throw std::runtime_error("no default regions for d = " + std::to_string(d) +
                           "; pass --region");
}

json region_json(const sample::ExtremalRegion& B) {
  json lo = json::array(), hi = json::array();
  for (int j = 0; j < B.lower.size(); ++j) {
    if (std::isinf(B.lower[j]))
      lo.push_back(B.lower[j] > 0 ? "inf" : "-inf");
    else
      lo.push_back(B.lower[j]);
    if (std::isinf(B.upper[j]))
      hi.push_back(B.upper[j] > 0 ? "inf" : "-inf");
    else
      hi.push_back(B.upper[j]);
  }
  return {{"lower", lo}, {"upper", hi}};
}

// --- shared parsing helpers -------------------------------------------------

std::vector<double> parse_list(const std::string& text) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string part;
  while (std::getline(ss, part, ','))
    if (!part.empty()) out.push_back(std::stod(part));
  return out;
}

std::vector<int> parse_int_list(const std::string& text) {
  std::vector<int> out;
  for (double v : parse_list(text)) out.push_back(static_cast<int>(v));
  return out;
}

geom::SimplexMesh build_mesh(const std::string& kind, int d, int resolution) {
  if (kind == "regular") return geom::make_regular_mesh(d, resolution);
  if (kind == "sparse") return geom::make_sparse_mesh(d, resolution);
  if (kind == "laplace") {
    if (d != 2)
      throw std::runtime_error("laplace meshes are two-dimensional");
    return geom::make_laplace_mesh(resolution);
  }
  throw std::runtime_error("unknown mesh kind \"" + kind +
                           "\" (regular|sparse|laplace)");
}

threshold::Kernel kernel_from_name(const std::string& s) {
  if (s == "gaussian") return threshold::Kernel::gaussian;
  if (s == "epanechnikov") return threshold::Kernel::epanechnikov;
  throw std::runtime_error("unknown kernel \"" + s + "\"");
}

std::pair<mat_t, vec_t> split_by_margins(const mat_t& x,
                                         data::Margins margins) {
  if (margins == data::Margins::laplace)
    return threshold::split_radial_angular_laplace(x);
  return threshold::split_radial_angular(x);
}

/// Angle source for extrapolation: empirical resampling, or a chain targeting
/// the fitted angular (or joint) gauge. "auto" picks by the model's label.
sample::AngularSampler make_sampler(const fit::FittedModel& model,
                                    const std::string& angles,
                                    std::uint64_t seed, int burn_in) {
  bool model_angles;
  if (angles == "empirical")
    model_angles = false;
  else if (angles == "model")
    model_angles = true;
  else if (angles == "auto")
    model_angles = model.angular.has_value();
  else
    throw std::runtime_error("unknown angle source \"" + angles +
                             "\" (auto|empirical|model)");
  sample::McmcOptions opts;
  opts.burn_in = burn_in;
  return sample::sampler_for(model, model_angles, seed, opts);
}

// ============================================================================
// simulate
// ============================================================================

struct SimulateArgs {
  std::string config, out = "data.csv", family = "logistic";
  int distribution = 0, d = 2, n = 5000;
  double alpha = 0.5, rho = 0.5;
  std::uint64_t seed = 1;
};

int run_simulate(const SimulateArgs& a) {
  data::CopulaSpec spec;
  if (a.distribution > 0) {
    spec = data::study_distribution(a.distribution);
  } else {
    data::Family fam = data::family_from_name(a.family);
    if (fam == data::Family::gaussian) {
      spec = data::gaussian_spec(a.d, a.rho);
    } else if (fam == data::Family::logistic ||
               fam == data::Family::inverted_logistic) {
      spec.family = fam;
      spec.d = a.d;
      spec.alpha = a.alpha;
    } else {
      throw std::runtime_error(
          "composite families need --distribution (catalogue 5-7) or the "
          "library API");
    }
  }
  data::validate(spec);
  data::Dataset ds = data::simulate(spec, a.n, a.seed);
  data::write_csv(ds, a.out);
  json resolved = {{"out", a.out},
                   {"distribution", a.distribution},
                   {"family", a.family},
                   {"d", a.d},
                   {"n", a.n},
                   {"alpha", a.alpha},
                   {"rho", a.rho},
                   {"seed", a.seed}};
  write_manifest(manifest_path(a.out), "simulate", resolved);
  std::cout << "wrote " << a.out << " (" << ds.size() << " rows, d=" << ds.dim()
            << ", exponential margins)\n";
  return 0;
}

// ============================================================================
// transform
// ============================================================================

struct TransformArgs {
  std::string config, in, out = "transformed.csv", margins = "exponential";
  double q = 0.95;
};

int run_transform(const TransformArgs& a) {
  data::Dataset raw = data::read_csv(a.in);
  data::Dataset out;
  if (a.margins == "exponential")
    out = data::to_exponential_margins(raw, a.q);
  else if (a.margins == "laplace")
    out = data::to_laplace_margins(raw, a.q);
  else
    throw std::runtime_error("margins must be exponential or laplace");
  data::write_csv(out, a.out);
  json resolved = {
      {"in", a.in}, {"out", a.out}, {"margins", a.margins}, {"q", a.q}};
  write_manifest(manifest_path(a.out), "transform", resolved);
  std::cout << "wrote " << a.out << " (" << out.size() << " rows, "
            << a.margins << " margins)\n";
  return 0;
}

// ============================================================================
// threshold
// ============================================================================

struct ThresholdArgs {
  std::string config, in, out = "exceedances.csv", kernel = "gaussian";
  std::string margins;  // default: from the input's metadata sidecar
  double tau = 0.95, h_r = 0.05, h_w = 0.05;
  bool select_h_w = false;
  int folds = 5;
  std::uint64_t cv_seed = 2024;
};

int run_threshold(const ThresholdArgs& a) {
  data::Dataset ds = data::read_csv(a.in);
  data::Margins margins =
      a.margins.empty() ? ds.margins : data::margins_from_name(a.margins);
  if (margins == data::Margins::raw)
    throw std::runtime_error(
        "input margins unknown or raw: run `transform` first or pass "
        "--margins");
  auto [w, r] = split_by_margins(ds.x, margins);

  double h_w = a.h_w;
  if (a.select_h_w) {
    threshold::CheckScoreConfig cfg;
    cfg.folds = a.folds;
    cfg.seed = a.cv_seed;
    cfg.kernel = kernel_from_name(a.kernel);
    cfg.h_r = a.h_r;
    h_w = threshold::select_bandwidth(w, r, a.tau,
                                      threshold::default_bandwidth_grid(), cfg);
    std::cout << "selected h_w = " << h_w << "\n";
  }

  threshold::ThresholdModel model(w, r, a.tau, a.h_r, h_w,
                                  kernel_from_name(a.kernel));
  threshold::ExceedanceSample exc = threshold::extract_exceedances(model, w, r);
  write_exceedances(a.out, exc, a.tau, margins, a.h_r, h_w, a.kernel);

  json resolved = {{"in", a.in},           {"out", a.out},
                   {"tau", a.tau},         {"h_r", a.h_r},
                   {"h_w", h_w},           {"kernel", a.kernel},
                   {"margins", data::margins_name(margins)},
                   {"select_h_w", a.select_h_w}, {"folds", a.folds},
                   {"cv_seed", a.cv_seed}};
  write_manifest(manifest_path(a.out), "threshold", resolved);
  std::cout << "wrote " << a.out << " (" << exc.radii.size() << " of "
            << exc.source_size << " rows exceed, rate "
            << static_cast<double>(exc.radii.size()) / exc.source_size
            << ")\n";
  return 0;
}

// ============================================================================
// fit
// ============================================================================

struct FitArgs {
  std::string config, exceedances, out = "model.json";
  std::string mesh = "regular", mode = "radial", lambda_grid;
  int resolution = 10, max_evals = 0, folds = 5, source_size = 0;
  double tau = 0.0, lambda = -1.0;
  bool bounded = false;
  std::uint64_t cv_seed = 2024;
};

int run_fit(const FitArgs& a) {
  fit::FitConfig fc;
  fc.mode = fit::mode_from_name(a.mode);
  fc.bounded = a.bounded;
  fc.lambda = a.lambda >= 0 ? a.lambda : fit::default_lambda(fc.mode);
  fc.max_evals = a.max_evals;
  fit::validate(fc);

  LoadedExceedances led =
      read_exceedances(a.exceedances, a.tau, a.source_size);
  const int d = static_cast<int>(led.exc.angles.cols());
  std::string mesh_kind = a.mesh;
  if (led.margins == data::Margins::laplace && a.mesh == "regular")
    mesh_kind = "laplace";
  geom::SimplexMesh mesh = build_mesh(mesh_kind, d, a.resolution);

  json cv_record;
  if (!a.lambda_grid.empty()) {
    std::vector<double> grid_v = parse_list(a.lambda_grid);
    vec_t grid = Eigen::Map<vec_t>(grid_v.data(),
                                   static_cast<int>(grid_v.size()));
    fit::LambdaSelection sel = fit::select_lambda(fc, mesh, led.exc, led.tau,
                                                  grid, a.folds, a.cv_seed);
    fc.lambda = sel.lambda;
    cv_record = {{"grid", grid_v},
                 {"cv", std::vector<double>(sel.cv.begin(), sel.cv.end())},
                 {"chosen", sel.lambda}};
    std::cout << "cross-validated lambda = " << sel.lambda << "\n";
  }

  fit::FittedModel model = fit::fit(fc, mesh, led.exc, led.tau);
  fit::save_model(model, a.out);

  json resolved = {{"exceedances", a.exceedances},
                   {"out", a.out},
                   {"mesh", mesh_kind},
                   {"resolution", a.resolution},
                   {"mode", a.mode},
                   {"bounded", a.bounded},
                   {"lambda", fc.lambda},
                   {"max_evals", a.max_evals},
                   {"tau", led.tau},
                   {"source_size", led.exc.source_size},
                   {"folds", a.folds},
                   {"cv_seed", a.cv_seed}};
  if (!cv_record.is_null()) resolved["lambda_cv"] = cv_record;
  write_manifest(manifest_path(a.out), "fit", resolved);
  std::cout << "wrote " << a.out << " (" << model.config.ss_label
            << ", objective " << model.objective << ", converged "
            << (model.converged ? "yes" : "no");
  if (a.bounded)
    std::cout << ", bounding iterations " << model.bounding.iterations;
  std::cout << ")\n";
  return 0;
}

// ============================================================================
// extrapolate
// ============================================================================

struct ExtrapolateArgs {
  std::string config, model, exceedances, out = "probabilities.json";
  std::string save_cloud, angles = "auto";
  std::vector<std::string> regions;
  int n_star = 50000, burn_in = 1000, source_size = 0;
  double tau = 0.0;
  std::uint64_t seed = 1;
};

int run_extrapolate(const ExtrapolateArgs& a) {
  fit::FittedModel model = fit::load_model(a.model);
  LoadedExceedances led =
      read_exceedances(a.exceedances, a.tau, a.source_size);
  model.exceedances = led.exc;
  if (model.tau <= 0.0) model.tau = led.tau;

  std::vector<std::string> region_strs = a.regions;
  if (region_strs.empty())
    region_strs = default_region_strings(model.primary().dim());

  sample::AngularSampler sampler =
      make_sampler(model, a.angles, a.seed, a.burn_in);
  json estimates = json::array();
  for (const std::string& rs : region_strs) {
    sample::ExtremalRegion B = parse_region(rs);
    sample::ProbabilityEstimate est =
        sample::estimate_probability(model, sampler, B, a.n_star);
    json e = {{"region", region_json(B)},
              {"region_text", rs},
              {"estimate", est.probability},
              {"se", est.se},
              {"conditional", est.conditional},
              {"exceedance_rate", est.exceed_rate},
              {"hits", est.hits}};
    estimates.push_back(e);
  }

  if (!a.save_cloud.empty()) {
    sample::SimulatedCloud cloud =
        sample::sample_exceedances(model, sampler, a.n_star);
    sample::write_points_csv(a.save_cloud, cloud.x);
  }

  json report = {{"estimates", estimates},
                 {"n_star", a.n_star},
                 {"tau", model.tau},
                 {"angles", a.angles},
                 {"label", model.config.ss_label}};
  if (std::isfinite(sampler.acceptance_rate()))
    report["acceptance_rate"] = sampler.acceptance_rate();
  {
    std::ofstream out(a.out);
    if (!out) throw std::runtime_error("cannot write " + a.out);
    out << report.dump(2) << "\n";
  }

  json resolved = {{"model", a.model},
                   {"exceedances", a.exceedances},
                   {"out", a.out},
                   {"regions", region_strs},
                   {"n_star", a.n_star},
                   {"angles", a.angles},
                   {"burn_in", a.burn_in},
                   {"seed", a.seed},
                   {"save_cloud", a.save_cloud}};
  write_manifest(manifest_path(a.out), "extrapolate", resolved);
  std::cout << "wrote " << a.out << " (" << estimates.size() << " regions)\n";
  return 0;
}

// ============================================================================
// diagnose
// ============================================================================

struct DiagnoseArgs {
  std::string config, model, exceedances, data, out_dir = "diagnostics";
  std::string return_periods = "50,100", chi, chi_levels, angles = "auto";
  int n_star = 50000, limit_resolution = 500, source_size = 0;
  double tau = 0.0;
  std::uint64_t seed = 1;
};

int run_diagnose(const DiagnoseArgs& a) {
  namespace fs = std::filesystem;
  fit::FittedModel model = fit::load_model(a.model);
  LoadedExceedances led =
      read_exceedances(a.exceedances, a.tau, a.source_size);
  model.exceedances = led.exc;
  if (model.tau <= 0.0) model.tau = led.tau;
  fs::create_directories(a.out_dir);
  const auto path = [&](const std::string& name) {
    return (fs::path(a.out_dir) / name).string();
  };
  json summary;

  // PP/QQ of the fitted radial model
  diag::PpQq pq = diag::pp_qq_data(model);
  diag::write_ppqq_csv(path("ppqq.csv"), pq);
  summary["pit_ks"] = stats::ks_uniform(pq.u);

  // return curves, plus data calibration when the dataset is supplied
  std::optional<data::Dataset> ds;
  if (!a.data.empty()) ds = data::read_csv(a.data);
  json calib = json::array();
  for (double T : parse_list(a.return_periods)) {
    diag::ReturnCurve curve = diag::return_curve(model, T);
    std::ostringstream name;
    name << "return_curve_" << T << ".csv";
    diag::write_return_curve_csv(path(name.str()), curve);
    if (ds) {
      json c = {{"T", T},
                {"proportion_beyond", diag::proportion_beyond(model, ds->x, T)},
                {"expected", 1.0 / T}};
      calib.push_back(c);
    }
  }
  if (!calib.empty()) summary["return_calibration"] = calib;

  // chi on simplex-geometry models
  const bool circle =
      model.primary().mesh().kind == geom::MeshKind::LaplaceCircle;
  if (!a.chi.empty() && circle)
    throw std::runtime_error(
        "chi diagnostics need exponential-margin (simplex) models");
  if (!circle) {
    std::vector<int> C = a.chi.empty()
                             ? std::vector<int>{0, 1}
                             : parse_int_list(a.chi);
    const double u0 = diag::u0_level(model, C);
    vec_t levels;
    if (!a.chi_levels.empty()) {
      std::vector<double> lv = parse_list(a.chi_levels);
      levels = Eigen::Map<vec_t>(lv.data(), static_cast<int>(lv.size()));
    } else if (u0 < 0.994) {
      levels.resize(5);
      const double lo = u0 + 1e-3;
      for (int k = 0; k < 5; ++k) levels[k] = lo + (0.995 - lo) * (k + 1) / 5.0;
    }
    if (levels.size() > 0) {
      sample::AngularSampler sampler =
          make_sampler(model, a.angles, a.seed, 1000);
      const mat_t* dptr = ds ? &ds->x : nullptr;
      diag::ChiEstimate chi =
          diag::chi_model(model, sampler, C, levels, a.n_star, dptr);
      diag::write_chi_csv(path("chi.csv"), chi);
      summary["chi_u0"] = chi.u0;
    } else {
      summary["chi_skipped"] =
          "minimum valid level u0 too close to 1; pass --chi-levels";
    }
  }

  // limit-set boundary (3-D shadows when d = 4)
  const gauge::PwlGauge& g = model.primary();
  if (g.dim() <= 3) {
    diag::write_limit_set_csv(path("limit_set.csv"),
                              diag::export_limit_set(g, a.limit_resolution));
  } else {
    for (const auto& proj :
         diag::limit_set_projections(g, a.limit_resolution)) {
      std::ostringstream name;
      name << "limit_set_drop" << (proj.dropped + 1) << ".csv";
      diag::write_limit_set_csv(path(name.str()), proj);
    }
  }

  {
    std::ofstream out(path("summary.json"));
    out << summary.dump(2) << "\n";
  }
  json resolved = {{"model", a.model},
                   {"exceedances", a.exceedances},
                   {"data", a.data},
                   {"out_dir", a.out_dir},
                   {"return_periods", a.return_periods},
                   {"chi", a.chi},
                   {"chi_levels", a.chi_levels},
                   {"angles", a.angles},
                   {"n_star", a.n_star},
                   {"limit_resolution", a.limit_resolution},
                   {"seed", a.seed}};
  write_manifest(path("manifest.json"), "diagnose", resolved);
  std::cout << "wrote diagnostics to " << a.out_dir << "/\n";
  return 0;
}

// ============================================================================
// study
// ============================================================================

struct StudyArgs {
  std::string config, pipeline = "SS2", out_dir = "study", mesh = "regular";
  std::string truth, regions_flag;  // comma-joined truths; |-joined regions
  int distribution = 1, replications = 20, n = 5000, n_star = 50000;
  int resolution = 0, threads = 0;
  double tau = 0.95, q = 0.95, lambda = -1.0, angular_lambda = -1.0;
  std::uint64_t seed = 1;
};

struct RepResult {
  int rep = 0;
  bool failed = false;
  std::string error;
  std::string label;
  int n_exc = 0;
  std::vector<sample::ProbabilityEstimate> estimates;
};

int run_study(const StudyArgs& a) {
  namespace fs = std::filesystem;
  if (a.replications < 1) throw std::runtime_error("replications must be >= 1");
  data::CopulaSpec spec = data::study_distribution(a.distribution);
  const int d = spec.d;

  // pipeline tag -> fit configuration
  fit::Mode mode;
  bool bounded = false, model_angles = false;
  if (a.pipeline == "SS1" || a.pipeline == "SS2" || a.pipeline == "SS3" ||
      a.pipeline == "SS4") {
    mode = fit::Mode::radial;
    bounded = (a.pipeline == "SS2" || a.pipeline == "SS4");
    model_angles = (a.pipeline == "SS3" || a.pipeline == "SS4");
  } else if (a.pipeline == "SS5" || a.pipeline == "SS6") {
    mode = fit::Mode::joint;
    bounded = (a.pipeline == "SS6");
    model_angles = true;
  } else {
    throw std::runtime_error("pipeline must be SS1..SS6");
  }

  const int resolution =
      a.resolution > 0 ? a.resolution
                       : (a.mesh == "sparse" ? 1 : (d == 2 ? 10 : 4));
  std::vector<std::string> region_strs;
  if (!a.regions_flag.empty()) {
    std::stringstream ss(a.regions_flag);
    std::string part;
    while (std::getline(ss, part, '|'))
      if (!part.empty()) region_strs.push_back(part);
  } else {
    region_strs = default_region_strings(d);
  }
  std::vector<sample::ExtremalRegion> regions;
  for (const auto& rs : region_strs) regions.push_back(parse_region(rs));

  std::vector<double> truths = a.truth.empty() ? std::vector<double>{}
                                               : parse_list(a.truth);
  if (!truths.empty() && truths.size() != regions.size())
    throw std::runtime_error("--truth needs one value per region");

  const int n_threads =
      a.threads > 0 ? a.threads
                    : std::max(1u, std::thread::hardware_concurrency());

  std::vector<RepResult> results(a.replications);
  std::atomic<int> next{0};
  auto worker = [&]() {
    for (;;) {
      const int rep = next.fetch_add(1);
      if (rep >= a.replications) return;
      RepResult& out = results[rep];
      out.rep = rep;
      try {
        data::Dataset raw = data::simulate(spec, a.n, a.seed + rep);
        data::Dataset expo = data::to_exponential_margins(raw, a.q);
        auto [w, r] = threshold::split_radial_angular(expo.x);
        threshold::ThresholdModel tm(w, r, a.tau);
        threshold::ExceedanceSample exc =
            threshold::extract_exceedances(tm, w, r);
        geom::SimplexMesh mesh = build_mesh(a.mesh, d, resolution);

        fit::FitConfig fc;
        fc.mode = mode;
        fc.bounded = bounded;
        fc.lambda = a.lambda >= 0 ? a.lambda : fit::default_lambda(mode);
        fc.ss_label = fit::pipeline_label(mode, bounded, model_angles);
        fit::FittedModel model = fit::fit(fc, mesh, exc, a.tau);
        if (model_angles && mode == fit::Mode::radial) {
          fit::FitConfig ac;
          ac.mode = fit::Mode::angular;
          ac.lambda = a.angular_lambda >= 0
                          ? a.angular_lambda
                          : fit::default_lambda(fit::Mode::angular);
          fit::FittedModel amodel = fit::fit(ac, mesh, exc, a.tau);
          model.angular = amodel.angular;
        }
        out.label = model.config.ss_label;
        out.n_exc = static_cast<int>(exc.radii.size());

        sample::AngularSampler sampler = sample::sampler_for(
            model, model_angles, a.seed * 1000003ULL + 7919ULL * rep + 17ULL);
        for (const auto& B : regions)
          out.estimates.push_back(sample::estimate_probability(
              model, sampler, B, a.n_star, &tm));
      } catch (const std::exception& e) {
        out.failed = true;
        out.error = e.what();
      }
    }
  };
  std::vector<std::thread> pool;
  for (int t = 0; t < n_threads; ++t) pool.emplace_back(worker);
  for (auto& t : pool) t.join();

  fs::create_directories(a.out_dir);
  const auto path = [&](const std::string& name) {
    return (fs::path(a.out_dir) / name).string();
  };

  // per-replication estimates (boxplot rows: one per replication x region)
  {
    std::ofstream out(path("estimates.csv"));
    out.precision(17);
    out << "replication,region,label,n_exc,probability,se,hits\n";
    for (const auto& res : results) {
      if (res.failed) {
        out << res.rep << ",,failed,0,nan,nan,0\n";
        continue;
      }
      for (std::size_t k = 0; k < res.estimates.size(); ++k) {
        const auto& e = res.estimates[k];
        out << res.rep << "," << (k + 1) << "," << res.label << ","
            << res.n_exc << "," << e.probability << "," << e.se << ","
            << e.hits << "\n";
      }
    }
  }

  // summary: per region the median log-probability, and against the supplied
  // truths the median signed log error and the RMSE of log estimates
  json per_region = json::array();
  int n_failed = 0;
  for (const auto& res : results)
    if (res.failed) ++n_failed;
  for (std::size_t k = 0; k < regions.size(); ++k) {
    std::vector<double> logs;
    int zero_hits = 0;
    for (const auto& res : results) {
      if (res.failed) continue;
      const double p = res.estimates[k].probability;
      if (p > 0.0)
        logs.push_back(std::log(p));
      else
        ++zero_hits;
    }
    json r = {{"region", region_json(regions[k])},
              {"region_text", region_strs[k]},
              {"replications_used", logs.size()},
              {"zero_hit_replications", zero_hits}};
    if (!logs.empty()) {
      std::sort(logs.begin(), logs.end());
      const std::size_t m = logs.size();
      const double median = m % 2 ? logs[m / 2]
                                  : 0.5 * (logs[m / 2 - 1] + logs[m / 2]);
      r["median_log_probability"] = median;
      if (!truths.empty()) {
        const double lt = std::log(truths[k]);
        double sq = 0.0;
        for (double l : logs) sq += (l - lt) * (l - lt);
        r["truth"] = truths[k];
        r["median_log_error"] = median - lt;
        r["rmse_log"] = std::sqrt(sq / static_cast<double>(m));
      }
    }
    per_region.push_back(r);
  }
  json summary = {{"distribution", a.distribution},
                  {"pipeline", a.pipeline},
                  {"replications", a.replications},
                  {"failed_replications", n_failed},
                  {"n", a.n},
                  {"n_star", a.n_star},
                  {"tau", a.tau},
                  {"regions", per_region}};
  {
    std::ofstream out(path("summary.json"));
    out << summary.dump(2) << "\n";
  }

  json resolved = {{"distribution", a.distribution},
                   {"pipeline", a.pipeline},
                   {"replications", a.replications},
                   {"n", a.n},
                   {"n_star", a.n_star},
                   {"tau", a.tau},
                   {"q", a.q},
                   {"mesh", a.mesh},
                   {"resolution", resolution},
                   {"lambda", a.lambda},
                   {"angular_lambda", a.angular_lambda},
                   {"seed", a.seed},
                   {"regions", region_strs},
                   {"truth", a.truth},
                   {"out_dir", a.out_dir}};
  write_manifest(path("manifest.json"), "study", resolved);

  for (const auto& res : results)
    if (res.failed)
      std::cerr << "replication " << res.rep << " failed: " << res.error
                << "\n";
  std::cout << "wrote " << a.out_dir << "/estimates.csv ("
            << (a.replications - n_failed) << "/" << a.replications
            << " replications, " << regions.size() << " regions)\n";
  return n_failed == 0 ? 0 : 1;
}

}  // namespace

// ============================================================================

int main(int argc, char** argv) {
  CLI::App app{
      "Geometric multivariate extremes: piecewise-linear gauge fitting, "
      "tail-probability extrapolation, and diagnostics"};
  app.require_subcommand(1);

  SimulateArgs sim;
  TransformArgs tra;
  ThresholdArgs thr;
  FitArgs fita;
  ExtrapolateArgs ext;
  DiagnoseArgs dia;
  StudyArgs stu;
  ConfigBinder sim_b, tra_b, thr_b, fit_b, ext_b, dia_b, stu_b;

  // ---- simulate
  auto* c_sim = app.add_subcommand(
      "simulate", "Draw from a reference copula (exponential margins)");
  c_sim->add_option("--config", sim.config, "JSON config file");
  sim_b.bind(c_sim->add_option("--out", sim.out, "output CSV"), "out",
             sim.out);
  sim_b.bind(c_sim->add_option("--distribution", sim.distribution,
                               "catalogue entry 1-7 (overrides --family)"),
             "distribution", sim.distribution);
  sim_b.bind(c_sim->add_option("--family", sim.family,
                               "logistic|gaussian|inverted_logistic"),
             "family", sim.family);
  sim_b.bind(c_sim->add_option("--d", sim.d, "dimension"), "d", sim.d);
  sim_b.bind(c_sim->add_option("--n", sim.n, "sample size"), "n", sim.n);
  sim_b.bind(c_sim->add_option("--alpha", sim.alpha, "dependence parameter"),
             "alpha", sim.alpha);
  sim_b.bind(c_sim->add_option("--rho", sim.rho, "Gaussian correlation"),
             "rho", sim.rho);
  sim_b.bind(c_sim->add_option("--seed", sim.seed, "RNG seed"), "seed",
             sim.seed);

  // ---- transform
  auto* c_tra = app.add_subcommand(
      "transform", "Standardize margins (semiparametric CDF + GPD tail)");
  c_tra->add_option("--config", tra.config, "JSON config file");
  tra_b.bind(c_tra->add_option("--in", tra.in, "input CSV")->required(), "in",
             tra.in);
  tra_b.bind(c_tra->add_option("--out", tra.out, "output CSV"), "out",
             tra.out);
  tra_b.bind(c_tra->add_option("--margins", tra.margins,
                               "exponential|laplace"),
             "margins", tra.margins);
  tra_b.bind(c_tra->add_option("--q", tra.q, "splice quantile for the GPD"),
             "q", tra.q);

  // ---- threshold
  auto* c_thr = app.add_subcommand(
      "threshold", "Estimate r_tau(w) by kernel smoothing; keep exceedances");
  c_thr->add_option("--config", thr.config, "JSON config file");
  thr_b.bind(c_thr->add_option("--in", thr.in, "transformed CSV")->required(),
             "in", thr.in);
  thr_b.bind(c_thr->add_option("--out", thr.out, "exceedance CSV"), "out",
             thr.out);
  thr_b.bind(c_thr->add_option("--tau", thr.tau, "quantile level"), "tau",
             thr.tau);
  thr_b.bind(c_thr->add_option("--h-r", thr.h_r, "radial bandwidth"), "h_r",
             thr.h_r);
  thr_b.bind(c_thr->add_option("--h-w", thr.h_w, "angular bandwidth"), "h_w",
             thr.h_w);
  thr_b.bind(c_thr->add_option("--kernel", thr.kernel,
                               "gaussian|epanechnikov"),
             "kernel", thr.kernel);
  thr_b.bind(c_thr->add_option("--margins", thr.margins,
                               "override the input's margin state"),
             "margins", thr.margins);
  thr_b.bind(c_thr->add_flag("--select-h-w", thr.select_h_w,
                             "pick h_w by cross-validated check loss"),
             "select_h_w", thr.select_h_w);
  thr_b.bind(c_thr->add_option("--folds", thr.folds, "CV folds"), "folds",
             thr.folds);
  thr_b.bind(c_thr->add_option("--cv-seed", thr.cv_seed, "CV shuffle seed"),
             "cv_seed", thr.cv_seed);

  // ---- fit
  auto* c_fit = app.add_subcommand(
      "fit", "Penalized ML fit of the piecewise-linear gauge");
  c_fit->add_option("--config", fita.config, "JSON config file");
  fit_b.bind(
      c_fit->add_option("--exceedances", fita.exceedances, "exceedance CSV")
          ->required(),
      "exceedances", fita.exceedances);
  fit_b.bind(c_fit->add_option("--out", fita.out, "model JSON"), "out",
             fita.out);
  fit_b.bind(c_fit->add_option("--mesh", fita.mesh,
                               "regular|sparse|laplace"),
             "mesh", fita.mesh);
  fit_b.bind(c_fit->add_option("--resolution", fita.resolution,
                               "mesh resolution / node count"),
             "resolution", fita.resolution);
  fit_b.bind(c_fit->add_option("--mode", fita.mode, "radial|angular|joint"),
             "mode", fita.mode);
  fit_b.bind(c_fit->add_flag("--bounded", fita.bounded,
                             "box-touching adjustment after the fit"),
             "bounded", fita.bounded);
  fit_b.bind(c_fit->add_option("--lambda", fita.lambda,
                               "penalty weight (default per mode)"),
             "lambda", fita.lambda);
  fit_b.bind(c_fit->add_option("--lambda-grid", fita.lambda_grid,
                               "comma list: pick lambda by K-fold CV"),
             "lambda_grid", fita.lambda_grid);
  fit_b.bind(c_fit->add_option("--folds", fita.folds, "CV folds"), "folds",
             fita.folds);
  fit_b.bind(c_fit->add_option("--cv-seed", fita.cv_seed, "CV shuffle seed"),
             "cv_seed", fita.cv_seed);
  fit_b.bind(c_fit->add_option("--max-evals", fita.max_evals,
                               "optimizer budget (0 = default)"),
             "max_evals", fita.max_evals);
  fit_b.bind(c_fit->add_option("--tau", fita.tau,
                               "override the sidecar's quantile level"),
             "tau", fita.tau);
  fit_b.bind(c_fit->add_option("--source-size", fita.source_size,
                               "override the sidecar's source row count"),
             "source_size", fita.source_size);

  // ---- extrapolate
  auto* c_ext = app.add_subcommand(
      "extrapolate", "Estimate tail-region probabilities by simulation");
  c_ext->add_option("--config", ext.config, "JSON config file");
  ext_b.bind(c_ext->add_option("--model", ext.model, "fitted model JSON")
                 ->required(),
             "model", ext.model);
  ext_b.bind(c_ext->add_option("--exceedances", ext.exceedances,
                               "exceedance CSV (angles + rate)")
                 ->required(),
             "exceedances", ext.exceedances);
  ext_b.bind(c_ext->add_option("--out", ext.out, "report JSON"), "out",
             ext.out);
  ext_b.bind(c_ext->add_option("--region", ext.regions,
                               "lo:hi;lo:hi[;...] (repeatable; inf ok)"),
             "regions", ext.regions);
  ext_b.bind(c_ext->add_option("--n-star", ext.n_star, "simulated cloud size"),
             "n_star", ext.n_star);
  ext_b.bind(c_ext->add_option("--angles", ext.angles,
                               "auto|empirical|model"),
             "angles", ext.angles);
  ext_b.bind(c_ext->add_option("--burn-in", ext.burn_in, "chain burn-in"),
             "burn_in", ext.burn_in);
  ext_b.bind(c_ext->add_option("--seed", ext.seed, "RNG seed"), "seed",
             ext.seed);
  ext_b.bind(c_ext->add_option("--save-cloud", ext.save_cloud,
                               "also write a simulated cloud CSV"),
             "save_cloud", ext.save_cloud);
  ext_b.bind(c_ext->add_option("--tau", ext.tau, "override sidecar tau"),
             "tau", ext.tau);
  ext_b.bind(c_ext->add_option("--source-size", ext.source_size,
                               "override sidecar source rows"),
             "source_size", ext.source_size);

  // ---- diagnose
  auto* c_dia = app.add_subcommand(
      "diagnose", "PP/QQ, return curves, chi, and limit-set exports");
  c_dia->add_option("--config", dia.config, "JSON config file");
  dia_b.bind(c_dia->add_option("--model", dia.model, "fitted model JSON")
                 ->required(),
             "model", dia.model);
  dia_b.bind(c_dia->add_option("--exceedances", dia.exceedances,
                               "exceedance CSV")
                 ->required(),
             "exceedances", dia.exceedances);
  dia_b.bind(c_dia->add_option("--data", dia.data,
                               "transformed dataset CSV (calibration + chi)"),
             "data", dia.data);
  dia_b.bind(c_dia->add_option("--out-dir", dia.out_dir, "output directory"),
             "out_dir", dia.out_dir);
  dia_b.bind(c_dia->add_option("--return-periods", dia.return_periods,
                               "comma list of T"),
             "return_periods", dia.return_periods);
  dia_b.bind(c_dia->add_option("--chi", dia.chi,
                               "comma list of 0-based margins"),
             "chi", dia.chi);
  dia_b.bind(c_dia->add_option("--chi-levels", dia.chi_levels,
                               "comma list of u levels"),
             "chi_levels", dia.chi_levels);
  dia_b.bind(c_dia->add_option("--angles", dia.angles,
                               "auto|empirical|model"),
             "angles", dia.angles);
  dia_b.bind(c_dia->add_option("--n-star", dia.n_star,
                               "cloud size behind model chi"),
             "n_star", dia.n_star);
  dia_b.bind(c_dia->add_option("--limit-resolution", dia.limit_resolution,
                               "limit-set grid size"),
             "limit_resolution", dia.limit_resolution);
  dia_b.bind(c_dia->add_option("--seed", dia.seed, "RNG seed"), "seed",
             dia.seed);
  dia_b.bind(c_dia->add_option("--tau", dia.tau, "override sidecar tau"),
             "tau", dia.tau);
  dia_b.bind(c_dia->add_option("--source-size", dia.source_size,
                               "override sidecar source rows"),
             "source_size", dia.source_size);

  // ---- study
  auto* c_stu = app.add_subcommand(
      "study", "Replicated end-to-end probability-estimation study");
  c_stu->add_option("--config", stu.config, "JSON config file");
  stu_b.bind(c_stu->add_option("--distribution", stu.distribution,
                               "catalogue entry 1-7"),
             "distribution", stu.distribution);
  stu_b.bind(c_stu->add_option("--pipeline", stu.pipeline, "SS1..SS6"),
             "pipeline", stu.pipeline);
  stu_b.bind(c_stu->add_option("--replications", stu.replications,
                               "independent pipeline runs"),
             "replications", stu.replications);
  stu_b.bind(c_stu->add_option("--n", stu.n, "sample size per replication"),
             "n", stu.n);
  stu_b.bind(c_stu->add_option("--n-star", stu.n_star,
                               "simulated cloud size per replication"),
             "n_star", stu.n_star);
  stu_b.bind(c_stu->add_option("--tau", stu.tau, "threshold quantile"), "tau",
             stu.tau);
  stu_b.bind(c_stu->add_option("--q", stu.q, "margin splice quantile"), "q",
             stu.q);
  stu_b.bind(c_stu->add_option("--mesh", stu.mesh, "regular|sparse"), "mesh",
             stu.mesh);
  stu_b.bind(c_stu->add_option("--resolution", stu.resolution,
                               "mesh resolution (0 = auto)"),
             "resolution", stu.resolution);
  stu_b.bind(c_stu->add_option("--lambda", stu.lambda,
                               "penalty weight (-1 = mode default)"),
             "lambda", stu.lambda);
  stu_b.bind(c_stu->add_option("--angular-lambda", stu.angular_lambda,
                               "angular-model penalty (-1 = default)"),
             "angular_lambda", stu.angular_lambda);
  stu_b.bind(c_stu->add_option("--threads", stu.threads,
                               "worker pool size (0 = hardware)"),
             "threads", stu.threads);
  stu_b.bind(c_stu->add_option("--seed", stu.seed, "base RNG seed"), "seed",
             stu.seed);
  stu_b.bind(c_stu->add_option("--regions", stu.regions_flag,
                               "|-separated region strings"),
             "regions", stu.regions_flag);
  stu_b.bind(c_stu->add_option("--truth", stu.truth,
                               "comma list of true probabilities"),
             "truth", stu.truth);
  stu_b.bind(c_stu->add_option("--out-dir", stu.out_dir, "output directory"),
             "out_dir", stu.out_dir);

  CLI11_PARSE(app, argc, argv);

  try {
    if (c_sim->parsed()) {
      sim_b.merge(sim.config);
      return run_simulate(sim);
    }
    if (c_tra->parsed()) {
      tra_b.merge(tra.config);
      return run_transform(tra);
    }
    if (c_thr->parsed()) {
      thr_b.merge(thr.config);
      return run_threshold(thr);
    }
    if (c_fit->parsed()) {
      fit_b.merge(fita.config);
      return run_fit(fita);
    }
    if (c_ext->parsed()) {
      ext_b.merge(ext.config);
      return run_extrapolate(ext);
    }
    if (c_dia->parsed()) {
      dia_b.merge(dia.config);
      return run_diagnose(dia);
    }
    if (c_stu->parsed()) {
      stu_b.merge(stu.config);
      return run_study(stu);
    }
  } catch (const std::invalid_argument& e) {
    std::cerr << "validation error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
