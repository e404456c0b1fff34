#include "pwle/gauge.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace pwle::gauge {

namespace {

double factorial(int d) {
  double f = 1.0;
  for (int i = 2; i <= d; ++i) f *= i;
  return f;
}

// Cofactor normal of the hyperplane through the region's scaled vertices
// (columns of V). The overall sign is arbitrary; dividing by n . v_1 makes
// the gauge equal 1 at every vertex.
vec_t hyperplane_gradient(const mat_t& verts) {
  const int d = static_cast<int>(verts.rows());
  mat_t diff(d, d - 1);
  for (int j = 0; j + 1 < d; ++j) diff.col(j) = verts.col(j + 1) - verts.col(0);
  vec_t n(d);
  mat_t minor(d - 1, d - 1);
  for (int i = 0; i < d; ++i) {
    int r = 0;
    for (int row = 0; row < d; ++row) {
      if (row == i) continue;
      minor.row(r++) = diff.row(row);
    }
    const double det = (d == 2) ? minor(0, 0) : minor.determinant();
    n[i] = ((i % 2) == 0) ? det : -det;
  }
  const double denom = n.dot(verts.col(0));
  if (std::abs(denom) < 1e-14)
    throw std::runtime_error("gauge: degenerate region (vertices span the origin)");
  return n / denom;
}

}  // namespace

PwlGauge::PwlGauge(geom::SimplexMesh mesh, vec_t theta)
    : PwlGauge(std::make_shared<const geom::SimplexMesh>(std::move(mesh)),
               std::move(theta)) {}

PwlGauge::PwlGauge(std::shared_ptr<const geom::SimplexMesh> mesh, vec_t theta)
    : mesh_(std::move(mesh)), theta_(std::move(theta)) {
  build();
}

PwlGauge PwlGauge::with_theta(vec_t theta) const {
  return PwlGauge(mesh_, std::move(theta));
}

void PwlGauge::build() {
  const auto& m = *mesh_;
  if (theta_.size() != m.num_nodes())
    throw std::invalid_argument("gauge: theta size must match node count");
  if ((theta_.array() <= 0.0).any())
    throw std::invalid_argument("gauge: node scales must be positive");

  const int d = m.d;
  const int M = m.num_regions();
  grad_.resize(M, d);
  inverse_.clear();
  volume_ = 0.0;
  mat_t verts(d, d);
  for (int k = 0; k < M; ++k) {
    for (int j = 0; j < d; ++j) {
      const int node = m.regions[k][j];
      verts.col(j) = theta_[node] * m.angles.row(node).transpose();
    }
    grad_.row(k) = hyperplane_gradient(verts).transpose();
    volume_ += std::abs(verts.determinant()) / factorial(d);
    if (m.kind == geom::MeshKind::Simplex) {
      mat_t nodes(d, d);
      for (int j = 0; j < d; ++j)
        nodes.col(j) = m.angles.row(m.regions[k][j]).transpose();
      inverse_.push_back(nodes.inverse());
    }
  }
}

int PwlGauge::region_of(const vec_t& w) const {
  if (mesh_->kind == geom::MeshKind::LaplaceCircle) {
    const auto [r, ang] = geom::laplace_decompose(w[0], w[1]);
    return geom::locate_region(*mesh_, ang);
  }
  for (std::size_t k = 0; k < inverse_.size(); ++k) {
    if (((inverse_[k] * w).array() >= -1e-10).all()) return static_cast<int>(k);
  }
  throw std::runtime_error("gauge: angle not covered by any region");
}

int PwlGauge::region_of(double w) const {
  return geom::locate_region(*mesh_, w);
}

double PwlGauge::operator()(const vec_t& x) const {
  if (x.size() != dim()) throw std::invalid_argument("gauge: wrong dimension");
  if (mesh_->kind == geom::MeshKind::LaplaceCircle) {
    const double r = x.cwiseAbs().sum();
    if (r == 0.0) return 0.0;
    const auto [rr, ang] = geom::laplace_decompose(x[0], x[1]);
    return grad_.row(geom::locate_region(*mesh_, ang)).dot(x);
  }
  if (x.minCoeff() < -1e-9 * (1.0 + x.cwiseAbs().maxCoeff()))
    throw std::invalid_argument("gauge: point must be componentwise nonnegative");
  const double r = x.sum();
  if (r <= 0.0) return 0.0;
  return grad_.row(region_of(vec_t(x / r))).dot(x);
}

double PwlGauge::at_angle(const vec_t& w) const {
  return grad_.row(region_of(w)).dot(w);
}

double PwlGauge::at_angle(double w) const {
  const Eigen::Vector2d u = geom::laplace_unit(w);
  return grad_.row(geom::locate_region(*mesh_, w)).dot(u);
}

double PwlGauge::angular_density(const vec_t& w) const {
  const int d = dim();
  return std::pow(at_angle(w), -d) / (d * volume_);
}

double PwlGauge::angular_density(double w) const {
  return std::pow(at_angle(w), -2) / (2.0 * volume_);
}

// --- parametric catalogue ---------------------------------------------------

GaugeFn logistic_gauge(int d, double alpha) {
  if (d < 2 || alpha <= 0.0 || alpha > 1.0)
    throw std::invalid_argument("logistic_gauge: need d >= 2, alpha in (0,1]");
  return [d, alpha](const vec_t& x) {
    if (x.size() != d) throw std::invalid_argument("gauge: wrong dimension");
    return x.sum() / alpha + (1.0 - d / alpha) * x.minCoeff();
  };
}

GaugeFn inverted_logistic_gauge(int d, double alpha) {
  if (d < 2 || alpha <= 0.0 || alpha > 1.0)
    throw std::invalid_argument("inverted_logistic_gauge: need d >= 2, alpha in (0,1]");
  return [d, alpha](const vec_t& x) {
    if (x.size() != d) throw std::invalid_argument("gauge: wrong dimension");
    double s = 0.0;
    for (int j = 0; j < d; ++j) s += std::pow(std::max(x[j], 0.0), 1.0 / alpha);
    return std::pow(s, alpha);
  };
}

GaugeFn gaussian_gauge(const mat_t& correlation) {
  if (correlation.rows() != correlation.cols())
    throw std::invalid_argument("gaussian_gauge: correlation must be square");
  const mat_t prec = correlation.inverse();
  const int d = static_cast<int>(correlation.rows());
  return [prec, d](const vec_t& x) {
    if (x.size() != d) throw std::invalid_argument("gauge: wrong dimension");
    const vec_t s = x.cwiseMax(0.0).cwiseSqrt();
    return s.dot(prec * s);
  };
}

namespace {

void partitions_rec(int next, int d, std::vector<std::vector<int>>& current,
                    std::vector<std::vector<std::vector<int>>>& out) {
  if (next == d) {
    out.push_back(current);
    return;
  }
  // Index loop: recursion appends/removes blocks, which would invalidate
  // range-for iterators.
  const std::size_t base = current.size();
  for (std::size_t i = 0; i < base; ++i) {
    current[i].push_back(next);
    partitions_rec(next + 1, d, current, out);
    current[i].pop_back();
  }
  current.push_back({next});
  partitions_rec(next + 1, d, current, out);
  current.pop_back();
}

}  // namespace

GaugeFn asymmetric_logistic_gauge(int d, std::vector<std::vector<int>> sets,
                                  vec_t alphas) {
  if (static_cast<int>(sets.size()) != alphas.size())
    throw std::invalid_argument("asymmetric_logistic_gauge: one alpha per set");
  for (auto& s : sets) std::sort(s.begin(), s.end());
  std::vector<char> covered(d, 0);
  for (const auto& s : sets)
    for (int j : s) {
      if (j < 0 || j >= d)
        throw std::invalid_argument("asymmetric_logistic_gauge: index out of range");
      covered[j] = 1;
    }
  if (!std::all_of(covered.begin(), covered.end(), [](char c) { return c == 1; }))
    throw std::invalid_argument("asymmetric_logistic_gauge: sets must cover all coordinates");
  for (Eigen::Index k = 0; k < alphas.size(); ++k)
    if (alphas[k] <= 0.0 || alphas[k] > 1.0)
      throw std::invalid_argument("asymmetric_logistic_gauge: alpha in (0,1]");

  std::vector<std::vector<std::vector<int>>> parts;
  std::vector<std::vector<int>> current;
  partitions_rec(0, d, current, parts);

  // For each partition, each block's admissible covering sets.
  struct BlockInfo {
    std::vector<int> block;
    std::vector<int> covers;  // indices into `sets`
  };
  std::vector<std::vector<BlockInfo>> table;
  for (const auto& part : parts) {
    std::vector<BlockInfo> binfo;
    bool feasible = true;
    for (const auto& block : part) {
      BlockInfo bi;
      bi.block = block;
      for (std::size_t k = 0; k < sets.size(); ++k)
        if (std::includes(sets[k].begin(), sets[k].end(), block.begin(), block.end()))
          bi.covers.push_back(static_cast<int>(k));
      if (bi.covers.empty()) {
        feasible = false;
        break;
      }
      binfo.push_back(std::move(bi));
    }
    if (feasible) table.push_back(std::move(binfo));
  }
  if (table.empty())
    throw std::invalid_argument("asymmetric_logistic_gauge: no feasible partition");

  return [d, sets, alphas, table](const vec_t& x) {
    if (x.size() != d) throw std::invalid_argument("gauge: wrong dimension");
    double best = std::numeric_limits<double>::infinity();
    for (const auto& part : table) {
      double total = 0.0;
      for (const auto& bi : part) {
        double bcost = std::numeric_limits<double>::infinity();
        double bsum = 0.0;
        for (int j : bi.block) bsum += x[j];
        for (int k : bi.covers) {
          double mc = std::numeric_limits<double>::infinity();
          for (int j : sets[k]) mc = std::min(mc, x[j]);
          const double a = alphas[k];
          bcost = std::min(bcost, bsum / a + (1.0 - bi.block.size() / a) * mc);
        }
        total += bcost;
        if (total >= best) break;
      }
      best = std::min(best, total);
    }
    return best;
  };
}

GaugeFn mixture_gauge(GaugeFn a, GaugeFn b) {
  return [a = std::move(a), b = std::move(b)](const vec_t& x) {
    return std::min(a(x), b(x));
  };
}

GaugeFn signed_gaussian_gauge(const mat_t& correlation) {
  if (correlation.rows() != correlation.cols())
    throw std::invalid_argument("signed_gaussian_gauge: correlation must be square");
  const mat_t prec = correlation.inverse();
  const int d = static_cast<int>(correlation.rows());
  return [prec, d](const vec_t& x) {
    if (x.size() != d) throw std::invalid_argument("gauge: wrong dimension");
    vec_t s(d);
    for (int j = 0; j < d; ++j) {
      const double r = std::sqrt(std::abs(x[j]));
      s[j] = (x[j] < 0.0) ? -r : r;
    }
    return s.dot(prec * s);
  };
}

double project_gauge(const GaugeFn& g, int d, const std::vector<int>& keep,
                     const vec_t& x_keep, int grid) {
  if (static_cast<int>(keep.size()) != x_keep.size())
    throw std::invalid_argument("project_gauge: keep/x size mismatch");
  if (grid < 2) throw std::invalid_argument("project_gauge: grid >= 2");
  std::vector<int> dropped;
  std::vector<char> kept(d, 0);
  for (int j : keep) kept[j] = 1;
  for (int j = 0; j < d; ++j)
    if (!kept[j]) dropped.push_back(j);

  vec_t x = vec_t::Zero(d);
  for (std::size_t i = 0; i < keep.size(); ++i) x[keep[i]] = x_keep[i];
  if (dropped.empty()) return g(x);

  const double hi = x_keep.cwiseAbs().maxCoeff();
  const auto k = dropped.size();
  double best = std::numeric_limits<double>::infinity();
  vec_t center = vec_t::Zero(static_cast<int>(k));
  vec_t lo_box = vec_t::Zero(static_cast<int>(k));
  vec_t hi_box = vec_t::Constant(static_cast<int>(k), hi);

  // Coarse scan of the box, then three shrinking scans around the incumbent
  // minimum (one coarse cell wide, then one cell of that scan, ...), so the
  // result does not hinge on the minimizer falling on the coarse grid.
  for (int round = 0; round < 4; ++round) {
    std::vector<int> odo(k, 0);
    vec_t round_best = center;
    for (;;) {
      for (std::size_t i = 0; i < k; ++i) {
        const int ii = static_cast<int>(i);
        x[dropped[i]] =
            lo_box[ii] + (hi_box[ii] - lo_box[ii]) * odo[i] / (grid - 1);
      }
      const double val = g(x);
      if (val < best) {
        best = val;
        for (std::size_t i = 0; i < k; ++i)
          round_best[static_cast<int>(i)] = x[dropped[i]];
      }
      std::size_t pos = 0;
      while (pos < odo.size() && ++odo[pos] == grid) odo[pos++] = 0;
      if (pos == odo.size()) break;
    }
    center = round_best;
    for (int i = 0; i < static_cast<int>(k); ++i) {
      const double cell = (hi_box[i] - lo_box[i]) / (grid - 1);
      lo_box[i] = std::max(0.0, center[i] - cell);
      hi_box[i] = std::min(hi, center[i] + cell);
    }
  }
  return best;
}

}  // namespace pwle::gauge
