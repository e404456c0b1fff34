#include "pwle/data.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <numeric>
#include <set>
#include <sstream>

namespace pwle::data {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr int kMaxDim = 12;

// log of 1 - F for the semiparametric marginal model; the workhorse behind
// every margin map because it stays finite arbitrarily deep in the tail.
double margin_log_sf(const MarginTransform& t, double x) {
  const auto n = static_cast<double>(t.knots.size());
  const double* b = t.knots.data();
  const double* e = b + t.knots.size();
  if (x <= t.threshold) {
    const double rank = static_cast<double>(std::upper_bound(b, e, x) - b);
    return std::log((n + 1.0 - rank) / (n + 1.0));
  }
  const double rank_u =
      static_cast<double>(std::upper_bound(b, e, t.threshold) - b);
  const double log_zeta = std::log((n + 1.0 - rank_u) / (n + 1.0));
  const double y = x - t.threshold;
  if (std::abs(t.gpd_shape) < 1e-12) return log_zeta - y / t.gpd_scale;
  const double a = std::max(t.gpd_shape * y / t.gpd_scale, -1.0 + 1e-12);
  return log_zeta - std::log1p(a) / t.gpd_shape;
}

double gpd_nll(const vec_t& y, double sigma, double xi) {
  if (!(sigma > 0.0)) return kInf;
  double s = static_cast<double>(y.size()) * std::log(sigma);
  for (Eigen::Index i = 0; i < y.size(); ++i) {
    const double a = xi * y[i] / sigma;
    if (a <= -1.0) return kInf;
    s += std::abs(xi) < 1e-12 ? y[i] / sigma : (1.0 + 1.0 / xi) * std::log1p(a);
  }
  return s;
}

struct GpdFit {
  double sigma, xi;
};

// Profile likelihood over the shape in (-0.9, 1.0): coarse grid with an inner
// scale optimization, then a joint polish from the grid winner.
GpdFit fit_gpd(const vec_t& y) {
  const double ymean = y.mean();
  const double ymax = y.maxCoeff();
  double best_nll = kInf;
  vec_t best(2);
  for (int i = 0; i <= 36; ++i) {
    const double xi = -0.85 + 0.05 * i;
    double sig0 = std::max(ymean * (1.0 - xi), 1e-8);
    if (xi < 0.0) sig0 = std::max(sig0, -xi * ymax * 1.001);
    stats::NelderMeadOptions o1;
    o1.tol = 1e-9;
    o1.max_evals = 200;
    vec_t t0(1);
    t0 << std::log(sig0);
    auto r = stats::nelder_mead(
        [&](const vec_t& t) { return gpd_nll(y, std::exp(t[0]), xi); }, t0, o1);
    if (r.fval < best_nll) {
      best_nll = r.fval;
      best << r.x[0], xi;
    }
  }
  stats::NelderMeadOptions o2;
  o2.tol = 1e-10;
  o2.max_evals = 2000;
  o2.init_step = 0.02;
  auto r = stats::nelder_mead(
      [&](const vec_t& v) {
        if (v[1] <= -0.9 || v[1] >= 1.0) return kInf;
        return gpd_nll(y, std::exp(v[0]), v[1]);
      },
      best, o2);
  if (!r.converged || !std::isfinite(r.fval))
    throw std::runtime_error("tail fit did not converge");
  return {std::exp(r.x[0]), r.x[1]};
}

double frechet_to_exp(double z) { return -std::log(-std::expm1(-1.0 / z)); }

// Pre-resolved per-row sampler tree (mixtures recurse).
struct RowSampler {
  const CopulaSpec* spec = nullptr;
  mat_t chol;                     // gaussian: lower Cholesky factor
  std::vector<double> weight;     // asymmetric logistic: 1/m_j per margin
  std::vector<RowSampler> comps;  // mixture components

  void build(const CopulaSpec& s) {
    spec = &s;
    if (s.family == Family::gaussian) {
      Eigen::LLT<mat_t> llt(s.sigma);
      if (llt.info() != Eigen::Success)
        throw std::invalid_argument(
            "gaussian spec: correlation matrix is not positive definite");
      chol = llt.matrixL();
    } else if (s.family == Family::asymmetric_logistic) {
      std::vector<int> m(s.d, 0);
      for (const auto& c : s.sets)
        for (int j : c) ++m[j];
      weight.resize(s.d);
      for (int j = 0; j < s.d; ++j) weight[j] = 1.0 / m[j];
    } else if (s.family == Family::mixture) {
      comps.resize(2);
      comps[0].build(s.components[0]);
      comps[1].build(s.components[1]);
    }
  }

  // Writes one observation in standard exponential margins into x[0..d).
  void draw(stats::Rng& rng, double* x) const {
    const int d = spec->d;
    double z[kMaxDim];
    switch (spec->family) {
      case Family::logistic: {
        const double s = rng.positive_stable(spec->alpha);
        for (int j = 0; j < d; ++j)
          x[j] = frechet_to_exp(std::pow(s / rng.exponential(), spec->alpha));
        break;
      }
      case Family::inverted_logistic: {
        // If Z has the logistic copula in Frechet margins, 1/Z is standard
        // exponential with the inverted-logistic copula.
        const double s = rng.positive_stable(spec->alpha);
        for (int j = 0; j < d; ++j)
          x[j] = std::pow(rng.exponential() / s, spec->alpha);
        break;
      }
      case Family::gaussian: {
        for (int j = 0; j < d; ++j) z[j] = rng.normal();
        for (int j = d - 1; j >= 0; --j) {
          double acc = 0.0;
          for (int k = 0; k <= j; ++k) acc += chol(j, k) * z[k];
          x[j] = -std::log(stats::normal_cdf(-acc));
        }
        break;
      }
      case Family::asymmetric_logistic: {
        for (int j = 0; j < d; ++j) z[j] = 0.0;
        for (std::size_t k = 0; k < spec->sets.size(); ++k) {
          const auto& c = spec->sets[k];
          if (c.size() == 1) {
            const double t = 1.0 / rng.exponential();
            z[c[0]] = std::max(z[c[0]], t * weight[c[0]]);
          } else {
            const double a = spec->alphas[k];
            const double s = rng.positive_stable(a);
            for (int j : c) {
              const double t = std::pow(s / rng.exponential(), a);
              z[j] = std::max(z[j], t * weight[j]);
            }
          }
        }
        for (int j = 0; j < d; ++j) x[j] = frechet_to_exp(z[j]);
        break;
      }
      case Family::mixture: {
        const double u = rng.uniform();
        comps[u < 0.5 ? 0 : 1].draw(rng, x);
        break;
      }
    }
  }
};

std::vector<std::string> default_names(int d) {
  std::vector<std::string> names(d);
  for (int j = 0; j < d; ++j) names[j] = "x" + std::to_string(j + 1);
  return names;
}

std::string format_value(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace

std::string margins_name(Margins m) {
  switch (m) {
    case Margins::raw: return "raw";
    case Margins::exponential: return "exponential";
    case Margins::laplace: return "laplace";
  }
  throw std::logic_error("margins_name");
}

Margins margins_from_name(const std::string& s) {
  if (s == "raw") return Margins::raw;
  if (s == "exponential") return Margins::exponential;
  if (s == "laplace") return Margins::laplace;
  throw std::invalid_argument("unknown margin state: " + s);
}

std::string family_name(Family f) {
  switch (f) {
    case Family::logistic: return "logistic";
    case Family::gaussian: return "gaussian";
    case Family::inverted_logistic: return "inverted_logistic";
    case Family::asymmetric_logistic: return "asymmetric_logistic";
    case Family::mixture: return "mixture";
  }
  throw std::logic_error("family_name");
}

Family family_from_name(const std::string& s) {
  if (s == "logistic") return Family::logistic;
  if (s == "gaussian") return Family::gaussian;
  if (s == "inverted_logistic") return Family::inverted_logistic;
  if (s == "asymmetric_logistic") return Family::asymmetric_logistic;
  if (s == "mixture") return Family::mixture;
  throw std::invalid_argument("unknown copula family: " + s);
}

MarginTransform fit_margin(const vec_t& column, double tail_q) {
  if (!(tail_q > 0.0 && tail_q < 1.0))
    throw std::invalid_argument("fit_margin: tail quantile must lie in (0,1)");
  const auto n = column.size();
  MarginTransform t;
  t.splice_q = tail_q;
  t.knots = column;
  std::sort(t.knots.data(), t.knots.data() + n);
  auto k = static_cast<Eigen::Index>(std::ceil(tail_q * static_cast<double>(n)));
  k = std::clamp<Eigen::Index>(k, 1, n);
  t.threshold = t.knots[k - 1];
  std::vector<double> exc;
  for (Eigen::Index i = 0; i < n; ++i)
    if (column[i] > t.threshold) exc.push_back(column[i] - t.threshold);
  if (exc.size() < 30)
    throw std::invalid_argument(
        "fit_margin: need at least 30 exceedances of the splice threshold");
  const GpdFit g = fit_gpd(Eigen::Map<vec_t>(exc.data(), exc.size()));
  t.gpd_scale = g.sigma;
  t.gpd_shape = g.xi;
  return t;
}

double margin_sf(const MarginTransform& t, double x) {
  return std::exp(margin_log_sf(t, x));
}

double margin_cdf(const MarginTransform& t, double x) {
  return -std::expm1(margin_log_sf(t, x));
}

CopulaSpec gaussian_spec(int d, double rho) {
  CopulaSpec s;
  s.family = Family::gaussian;
  s.d = d;
  s.sigma = mat_t::Constant(d, d, rho);
  s.sigma.diagonal().setOnes();
  return s;
}

CopulaSpec study_distribution(int which) {
  CopulaSpec s;
  switch (which) {
    case 1:
    case 2:
      s.family = Family::logistic;
      s.d = 2;
      s.alpha = which == 1 ? 0.4 : 0.8;
      return s;
    case 3:
      return gaussian_spec(2, 0.8);
    case 4:
      s.family = Family::inverted_logistic;
      s.d = 2;
      s.alpha = 0.7;
      return s;
    case 5:
      s.family = Family::asymmetric_logistic;
      s.d = 3;
      s.sets = {{0, 1}, {1, 2}, {0, 2}};
      s.alphas = {0.4, 0.4, 0.4};
      return s;
    case 6:
      s.family = Family::asymmetric_logistic;
      s.d = 3;
      s.sets = {{0}, {0, 1}, {1, 2}};
      s.alphas = {0.4, 0.4, 0.4};
      return s;
    case 7: {
      s.family = Family::mixture;
      s.d = 3;
      CopulaSpec a;
      a.family = Family::asymmetric_logistic;
      a.d = 3;
      a.sets = {{0}, {1}, {2}, {0, 1}, {0, 1, 2}};
      a.alphas = {0.4, 0.4, 0.4, 0.4, 0.4};
      s.components = {a, gaussian_spec(3, 0.6)};
      return s;
    }
    default:
      throw std::invalid_argument("study_distribution: index must be 1..7");
  }
}

void validate(const CopulaSpec& spec) {
  if (spec.d < 2 || spec.d > kMaxDim)
    throw std::invalid_argument("copula spec: dimension out of range");
  switch (spec.family) {
    case Family::logistic:
    case Family::inverted_logistic:
      if (!(spec.alpha > 0.0 && spec.alpha < 1.0))
        throw std::invalid_argument("copula spec: alpha must lie in (0,1)");
      break;
    case Family::gaussian: {
      if (spec.sigma.rows() != spec.d || spec.sigma.cols() != spec.d)
        throw std::invalid_argument("gaussian spec: sigma must be d x d");
      if ((spec.sigma - spec.sigma.transpose()).cwiseAbs().maxCoeff() > 1e-12)
        throw std::invalid_argument("gaussian spec: sigma must be symmetric");
      if ((spec.sigma.diagonal().array() - 1.0).abs().maxCoeff() > 1e-12)
        throw std::invalid_argument("gaussian spec: sigma needs a unit diagonal");
      break;
    }
    case Family::asymmetric_logistic: {
      if (spec.sets.empty())
        throw std::invalid_argument("asymmetric logistic spec: no membership sets");
      if (spec.alphas.size() != spec.sets.size())
        throw std::invalid_argument(
            "asymmetric logistic spec: one alpha per membership set required");
      std::vector<bool> covered(spec.d, false);
      for (std::size_t k = 0; k < spec.sets.size(); ++k) {
        const auto& c = spec.sets[k];
        if (c.empty())
          throw std::invalid_argument("asymmetric logistic spec: empty set");
        std::set<int> uniq(c.begin(), c.end());
        if (uniq.size() != c.size())
          throw std::invalid_argument(
              "asymmetric logistic spec: duplicate index inside a set");
        for (int j : c) {
          if (j < 0 || j >= spec.d)
            throw std::invalid_argument(
                "asymmetric logistic spec: set index out of range");
          covered[j] = true;
        }
        if (c.size() > 1 && !(spec.alphas[k] > 0.0 && spec.alphas[k] < 1.0))
          throw std::invalid_argument(
              "asymmetric logistic spec: alpha must lie in (0,1)");
      }
      for (int j = 0; j < spec.d; ++j)
        if (!covered[j])
          throw std::invalid_argument(
              "asymmetric logistic spec: every margin needs a membership set");
      break;
    }
    case Family::mixture: {
      if (spec.components.size() != 2)
        throw std::invalid_argument("mixture spec: exactly two components");
      for (const auto& c : spec.components) {
        if (c.d != spec.d)
          throw std::invalid_argument("mixture spec: component dimension mismatch");
        validate(c);
      }
      break;
    }
  }
}

Dataset simulate(const CopulaSpec& spec, int n, std::uint64_t seed) {
  validate(spec);
  if (n < spec.d) throw std::invalid_argument("simulate: need n >= d rows");
  RowSampler sampler;
  sampler.build(spec);
  stats::Rng rng(seed);
  Dataset ds;
  ds.x.resize(n, spec.d);
  double row[kMaxDim];
  for (int i = 0; i < n; ++i) {
    sampler.draw(rng, row);
    for (int j = 0; j < spec.d; ++j) ds.x(i, j) = row[j];
  }
  ds.margins = Margins::exponential;
  ds.names = default_names(spec.d);
  return ds;
}

Dataset to_exponential_margins(const Dataset& raw, double tail_q) {
  Dataset out;
  out.x.resize(raw.x.rows(), raw.x.cols());
  out.margins = Margins::exponential;
  out.names = raw.names.empty() ? default_names(raw.dim()) : raw.names;
  for (int j = 0; j < raw.dim(); ++j) {
    const MarginTransform t = fit_margin(raw.x.col(j), tail_q);
    for (Eigen::Index i = 0; i < raw.x.rows(); ++i)
      out.x(i, j) = -margin_log_sf(t, raw.x(i, j));
    out.transforms.push_back(t);
  }
  return out;
}

Dataset to_laplace_margins(const Dataset& raw, double tail_q) {
  if (raw.dim() != 2)
    throw std::invalid_argument("to_laplace_margins: requires d = 2");
  Dataset out;
  out.x.resize(raw.x.rows(), 2);
  out.margins = Margins::laplace;
  out.names = raw.names.empty() ? default_names(2) : raw.names;
  for (int j = 0; j < 2; ++j) {
    const MarginTransform t = fit_margin(raw.x.col(j), tail_q);
    for (Eigen::Index i = 0; i < raw.x.rows(); ++i) {
      const double lsf = margin_log_sf(t, raw.x(i, j));
      const double p = -std::expm1(lsf);
      out.x(i, j) = p < 0.5 ? std::log(2.0 * p) : -std::log(2.0) - lsf;
    }
    out.transforms.push_back(t);
  }
  return out;
}

std::string meta_path(const std::string& csv_path) {
  if (csv_path.size() >= 4 && csv_path.substr(csv_path.size() - 4) == ".csv")
    return csv_path.substr(0, csv_path.size() - 4) + ".meta.json";
  return csv_path + ".meta.json";
}

void write_csv(const Dataset& ds, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open for writing: " + path);
  const auto names = ds.names.empty() ? default_names(ds.dim()) : ds.names;
  if (static_cast<int>(names.size()) != ds.dim())
    throw std::invalid_argument("write_csv: one column name per variable");
  for (int j = 0; j < ds.dim(); ++j) out << (j ? "," : "") << names[j];
  out << "\n";
  for (Eigen::Index i = 0; i < ds.x.rows(); ++i) {
    for (int j = 0; j < ds.dim(); ++j)
      out << (j ? "," : "") << format_value(ds.x(i, j));
    out << "\n";
  }
  if (!out) throw std::runtime_error("write failed: " + path);

  nlohmann::json meta;
  meta["margins"] = margins_name(ds.margins);
  meta["names"] = names;
  meta["n"] = ds.size();
  meta["d"] = ds.dim();
  auto& arr = meta["transforms"] = nlohmann::json::array();
  for (const auto& t : ds.transforms) {
    nlohmann::json jt;
    jt["splice_q"] = t.splice_q;
    jt["threshold"] = t.threshold;
    jt["gpd_scale"] = t.gpd_scale;
    jt["gpd_shape"] = t.gpd_shape;
    jt["knots"] = std::vector<double>(t.knots.data(), t.knots.data() + t.knots.size());
    arr.push_back(std::move(jt));
  }
  std::ofstream mout(meta_path(path));
  if (!mout) throw std::runtime_error("cannot open for writing: " + meta_path(path));
  mout << meta.dump(1) << "\n";
}

Dataset read_csv(const std::string& path, int* dropped_rows) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open for reading: " + path);
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error("empty csv: " + path);
  if (!line.empty() && line.back() == '\r') line.pop_back();
  Dataset ds;
  {
    std::stringstream ss(line);
    std::string field;
    while (std::getline(ss, field, ',')) ds.names.push_back(field);
  }
  const int d = static_cast<int>(ds.names.size());
  if (d < 1) throw std::runtime_error("csv has no columns: " + path);

  std::vector<double> values;
  int kept = 0, dropped = 0;
  std::vector<double> row(d);
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string field;
    int got = 0;
    bool ok = true;
    while (std::getline(ss, field, ',')) {
      if (got >= d) {
        ok = false;
        break;
      }
      char* end = nullptr;
      const double v = std::strtod(field.c_str(), &end);
      if (end == field.c_str() || *end != '\0' || !std::isfinite(v)) {
        ok = false;
        break;
      }
      row[got++] = v;
    }
    if (!ok || got != d) {
      ++dropped;
      continue;
    }
    values.insert(values.end(), row.begin(), row.end());
    ++kept;
  }
  if (dropped_rows) *dropped_rows = dropped;
  if (kept == 0) throw std::runtime_error("csv has no complete rows: " + path);
  ds.x = Eigen::Map<Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic,
                                  Eigen::RowMajor>>(values.data(), kept, d);

  const std::string mp = meta_path(path);
  if (std::filesystem::exists(mp)) {
    std::ifstream min(mp);
    nlohmann::json meta = nlohmann::json::parse(min);
    ds.margins = margins_from_name(meta.at("margins").get<std::string>());
    if (meta.contains("names"))
      ds.names = meta.at("names").get<std::vector<std::string>>();
    for (const auto& jt : meta.at("transforms")) {
      MarginTransform t;
      t.splice_q = jt.at("splice_q").get<double>();
      t.threshold = jt.at("threshold").get<double>();
      t.gpd_scale = jt.at("gpd_scale").get<double>();
      t.gpd_shape = jt.at("gpd_shape").get<double>();
      const auto kv = jt.at("knots").get<std::vector<double>>();
      t.knots = Eigen::Map<const vec_t>(kv.data(), kv.size());
      ds.transforms.push_back(std::move(t));
    }
  }
  return ds;
}

}  // namespace pwle::data
