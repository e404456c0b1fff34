#include "pwle/mesh.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <numeric>

namespace pwle::geom {

std::pair<double, vec_t> decompose(const vec_t& x) {
  const double r = x.cwiseAbs().sum();
  if (!(r > 0.0)) throw std::invalid_argument("decompose: zero vector");
  return {r, x / r};
}

vec_t recompose(double r, const vec_t& w) { return r * w; }

double laplace_wrap(double w) {
  double v = std::fmod(w + 2.0, 4.0);
  if (v < 0.0) v += 4.0;
  return v - 2.0;
}

namespace {

double cos1(double w) { return 1.0 - std::abs(laplace_wrap(w)); }

}  // namespace

Eigen::Vector2d laplace_unit(double w) {
  return {cos1(w), cos1(w - 1.0)};
}

std::pair<double, double> laplace_decompose(double x1, double x2) {
  const double r = std::abs(x1) + std::abs(x2);
  if (!(r > 0.0)) throw std::invalid_argument("laplace_decompose: zero vector");
  const double eps = (x2 / r >= 0.0) ? 1.0 : -1.0;
  return {r, laplace_wrap(eps * (1.0 - x1 / r))};
}

Eigen::Vector2d laplace_recompose(double r, double w) {
  return r * laplace_unit(w);
}

// --- incremental Delaunay on the projected coordinates ----------------------

namespace {

double hash01(std::uint64_t i) {
  std::uint64_t z = i + 0x9E3779B97F4A7C15ULL;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  z = z ^ (z >> 31);
  return static_cast<double>(z >> 11) * 0x1.0p-53;
}

/**
 * Bowyer-Watson insertion in p dimensions. Cospherical families are resolved
 * by a deterministic perturbation of the paraboloid lift (1e-12 scale,
 * favouring earlier nodes); coordinates themselves are never moved, so grid
 * hulls stay exact. The in-sphere determinant's inside-positive parity
 * alternates with dimension as (-1)^p.
 */
class Triangulator {
 public:
  Triangulator(mat_t points, const std::vector<int>& initial_simplex)
      : pts_(std::move(points)), p_(static_cast<int>(pts_.cols())) {
    const auto n = pts_.rows();
    lift_eps_.resize(n);
    for (Eigen::Index i = 0; i < n; ++i)
      lift_eps_[i] = 1e-12 * ((static_cast<double>(n) - i) + 1e-3 * hash01(i));
    simplices_.push_back(initial_simplex);
  }

  void insert(int idx) {
    const int t0 = find_containing(idx);
    if (t0 < 0)
      throw std::runtime_error("triangulation: node outside current hull");
    // Grow the cavity across shared faces from the containing simplex.
    auto fmap = face_map();
    std::vector<char> in_cavity(simplices_.size(), 0);
    std::vector<int> stack{t0};
    in_cavity[t0] = 1;
    while (!stack.empty()) {
      const int i = stack.back();
      stack.pop_back();
      for_each_face(simplices_[i], [&](const region_t& face) {
        for (int j : fmap[face]) {
          if (!in_cavity[j] && insphere(simplices_[j], idx) > 0.0) {
            in_cavity[j] = 1;
            stack.push_back(j);
          }
        }
      });
    }
    // Boundary faces of the cavity appear exactly once among cavity faces.
    std::map<region_t, int> boundary;
    for (std::size_t i = 0; i < simplices_.size(); ++i) {
      if (!in_cavity[i]) continue;
      for_each_face(simplices_[i], [&](const region_t& face) { ++boundary[face]; });
    }
    std::vector<region_t> next;
    for (std::size_t i = 0; i < simplices_.size(); ++i)
      if (!in_cavity[i]) next.push_back(simplices_[i]);
    for (const auto& [face, count] : boundary) {
      if (count != 1) continue;
      region_t s = face;
      s.push_back(idx);
      if (std::abs(orient(s)) <= 1e-12) continue;  // point on the face's plane
      next.push_back(std::move(s));
    }
    simplices_ = std::move(next);
  }

  const std::vector<region_t>& simplices() const { return simplices_; }

 private:
  template <typename F>
  void for_each_face(const region_t& s, F&& fn) const {
    region_t face(s.size() - 1);
    for (std::size_t skip = 0; skip < s.size(); ++skip) {
      std::size_t k = 0;
      for (std::size_t j = 0; j < s.size(); ++j)
        if (j != skip) face[k++] = s[j];
      region_t sorted = face;
      std::sort(sorted.begin(), sorted.end());
      fn(sorted);
    }
  }

  std::map<region_t, std::vector<int>> face_map() const {
    std::map<region_t, std::vector<int>> fmap;
    for (std::size_t i = 0; i < simplices_.size(); ++i)
      for_each_face(simplices_[i],
                    [&](const region_t& face) { fmap[face].push_back(static_cast<int>(i)); });
    return fmap;
  }

  double orient(const region_t& s) const {
    mat_t m(p_, p_);
    for (int j = 0; j < p_; ++j)
      m.col(j) = (pts_.row(s[j + 1]) - pts_.row(s[0])).transpose();
    return m.determinant();
  }

  double insphere(const region_t& s, int qi) const {
    const auto q = pts_.row(qi);
    mat_t m(p_ + 1, p_ + 1);
    for (int i = 0; i <= p_; ++i) {
      const auto diff = pts_.row(s[i]) - q;
      m.row(i).head(p_) = diff;
      m(i, p_) = diff.squaredNorm() - lift_eps_[s[i]] + lift_eps_[qi];
    }
    const double parity = (p_ % 2 == 0) ? 1.0 : -1.0;
    const double o = orient(s);
    return parity * m.determinant() * (o > 0 ? 1.0 : -1.0);
  }

  int find_containing(int qi) const {
    const auto q = pts_.row(qi).transpose();
    for (std::size_t i = 0; i < simplices_.size(); ++i) {
      const auto& s = simplices_[i];
      mat_t a(p_, p_);
      for (int j = 0; j < p_; ++j)
        a.col(j) = (pts_.row(s[j + 1]) - pts_.row(s[0])).transpose();
      const vec_t b = a.partialPivLu().solve(q - pts_.row(s[0]).transpose());
      if ((b.array() >= -1e-10).all() && b.sum() <= 1.0 + 1e-10)
        return static_cast<int>(i);
    }
    return -1;
  }

  mat_t pts_;
  int p_;
  std::vector<double> lift_eps_;
  std::vector<region_t> simplices_;
};

void finalize_regions(SimplexMesh& mesh, std::vector<region_t> regions) {
  for (auto& r : regions) std::sort(r.begin(), r.end());
  std::sort(regions.begin(), regions.end());
  mesh.regions = std::move(regions);

  std::vector<char> used(mesh.num_nodes(), 0);
  for (const auto& r : mesh.regions)
    for (int v : r) used[v] = 1;
  if (!std::all_of(used.begin(), used.end(), [](char c) { return c == 1; }))
    throw std::runtime_error("mesh: triangulation does not use every node");
}

void compute_node_pairs(SimplexMesh& mesh) {
  const int n = mesh.num_nodes();
  const int d = mesh.d;
  mesh.node_pairs.assign(n, {});
  std::vector<std::vector<int>> containing(n);
  for (int k = 0; k < mesh.num_regions(); ++k)
    for (int v : mesh.regions[k]) containing[v].push_back(k);
  for (int node = 0; node < n; ++node) {
    const auto& regs = containing[node];
    for (std::size_t a = 0; a < regs.size(); ++a) {
      for (std::size_t b = a + 1; b < regs.size(); ++b) {
        const auto& ra = mesh.regions[regs[a]];
        const auto& rb = mesh.regions[regs[b]];
        region_t shared;
        std::set_intersection(ra.begin(), ra.end(), rb.begin(), rb.end(),
                              std::back_inserter(shared));
        if (static_cast<int>(shared.size()) == d - 1)
          mesh.node_pairs[node].emplace_back(regs[a], regs[b]);
      }
    }
  }
}

void validate_simplex_angles(const mat_t& angles) {
  const int d = static_cast<int>(angles.cols());
  if (d < 2) throw std::invalid_argument("mesh: need dimension >= 2");
  if (angles.rows() < d) throw std::invalid_argument("mesh: need at least d nodes");
  for (Eigen::Index i = 0; i < angles.rows(); ++i) {
    if ((angles.row(i).array() < -1e-12).any())
      throw std::invalid_argument("mesh: angles must be componentwise nonnegative");
    if (std::abs(angles.row(i).sum() - 1.0) > 1e-9)
      throw std::invalid_argument("mesh: angle rows must sum to one");
    for (Eigen::Index j = 0; j < i; ++j)
      if ((angles.row(i) - angles.row(j)).cwiseAbs().maxCoeff() < 1e-12)
        throw std::invalid_argument("mesh: duplicate nodes");
  }
}

std::vector<int> unit_vector_indices(const mat_t& angles) {
  const int d = static_cast<int>(angles.cols());
  std::vector<int> idx(d, -1);
  for (int j = 0; j < d; ++j) {
    for (Eigen::Index i = 0; i < angles.rows(); ++i) {
      if (std::abs(angles(i, j) - 1.0) < 1e-9 &&
          angles.row(i).sum() - angles(i, j) < 1e-9) {
        idx[j] = static_cast<int>(i);
        break;
      }
    }
    if (idx[j] < 0)
      throw std::invalid_argument("mesh: node list must contain every unit vector");
  }
  return idx;
}

std::vector<region_t> triangulate(const mat_t& angles) {
  const int d = static_cast<int>(angles.cols());
  const auto units = unit_vector_indices(angles);
  if (d == 2) {
    // One-dimensional case: consecutive segments of the sorted coordinates.
    std::vector<int> order(angles.rows());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(),
              [&](int a, int b) { return angles(a, 0) < angles(b, 0); });
    std::vector<region_t> regions;
    for (std::size_t k = 0; k + 1 < order.size(); ++k)
      regions.push_back({order[k], order[k + 1]});
    return regions;
  }
  Triangulator tri(angles.leftCols(d - 1), units);
  std::vector<char> is_unit(angles.rows(), 0);
  for (int u : units) is_unit[u] = 1;
  for (Eigen::Index i = 0; i < angles.rows(); ++i)
    if (!is_unit[i]) tri.insert(static_cast<int>(i));
  return tri.simplices();
}

}  // namespace

SimplexMesh mesh_from_angles(const mat_t& angles) {
  validate_simplex_angles(angles);
  SimplexMesh mesh;
  mesh.d = static_cast<int>(angles.cols());
  mesh.kind = MeshKind::Simplex;
  mesh.angles = angles;
  finalize_regions(mesh, triangulate(angles));
  compute_node_pairs(mesh);
  return mesh;
}

SimplexMesh make_regular_mesh(int d, int resolution) {
  if (resolution < 1) throw std::invalid_argument("make_regular_mesh: resolution >= 1");
  if (d == 2) {
    mat_t angles(resolution + 1, 2);
    for (int k = 0; k <= resolution; ++k) {
      const double w = static_cast<double>(k) / resolution;
      angles(k, 0) = w;
      angles(k, 1) = 1.0 - w;
    }
    return mesh_from_angles(angles);
  }
  if (d == 3) {
    std::vector<Eigen::Vector3d> pts;
    for (int i = 0; i <= resolution; ++i)
      for (int j = 0; j + i <= resolution; ++j)
        pts.emplace_back(static_cast<double>(i) / resolution,
                         static_cast<double>(j) / resolution,
                         static_cast<double>(resolution - i - j) / resolution);
    mat_t angles(pts.size(), 3);
    for (std::size_t k = 0; k < pts.size(); ++k) angles.row(k) = pts[k];
    return mesh_from_angles(angles);
  }
  throw std::invalid_argument("make_regular_mesh: use make_sparse_mesh for d >= 4");
}

SimplexMesh make_sparse_mesh(int d, bool refine) {
  if (d < 4) throw std::invalid_argument("make_sparse_mesh: requires d >= 4");
  std::vector<vec_t> nodes;
  for (int j = 0; j < d; ++j) {
    vec_t e = vec_t::Zero(d);
    e[j] = 1.0;
    nodes.push_back(e);
  }
  nodes.push_back(vec_t::Constant(d, 1.0 / d));
  // Centres of all subfaces of dimension 1..d-2 (vertex subsets of size
  // 2..d-1), in subset-size then lexicographic order.
  for (int size = 2; size <= d - 1; ++size) {
    std::vector<int> pick(size);
    std::iota(pick.begin(), pick.end(), 0);
    for (;;) {
      vec_t c = vec_t::Zero(d);
      for (int j : pick) c[j] = 1.0 / size;
      nodes.push_back(c);
      int i = size - 1;
      while (i >= 0 && pick[i] == d - size + i) --i;
      if (i < 0) break;
      ++pick[i];
      for (int j = i + 1; j < size; ++j) pick[j] = pick[j - 1] + 1;
    }
  }
  mat_t angles(nodes.size(), d);
  for (std::size_t k = 0; k < nodes.size(); ++k) angles.row(k) = nodes[k];
  SimplexMesh mesh = mesh_from_angles(angles);
  if (!refine) return mesh;

  // Refinement: append region centroids and insert them into the existing
  // triangulation (continuing the same incremental process).
  const int n0 = mesh.num_nodes();
  mat_t refined(n0 + mesh.num_regions(), d);
  refined.topRows(n0) = mesh.angles;
  for (int k = 0; k < mesh.num_regions(); ++k) {
    vec_t c = vec_t::Zero(d);
    for (int v : mesh.regions[k]) c += mesh.angles.row(v).transpose();
    refined.row(n0 + k) = (c / mesh.d).transpose();
  }
  return mesh_from_angles(refined);
}

SimplexMesh make_laplace_mesh(int n_nodes) {
  if (n_nodes < 4) throw std::invalid_argument("make_laplace_mesh: need >= 4 nodes");
  SimplexMesh mesh;
  mesh.d = 2;
  mesh.kind = MeshKind::LaplaceCircle;
  mesh.circle_coords.resize(n_nodes);
  mesh.angles.resize(n_nodes, 2);
  for (int k = 0; k < n_nodes; ++k) {
    const double w = -2.0 + 4.0 * k / n_nodes;
    mesh.circle_coords[k] = w;
    mesh.angles.row(k) = laplace_unit(w).transpose();
  }
  for (int k = 0; k < n_nodes; ++k)
    mesh.regions.push_back({k, (k + 1) % n_nodes});
  // Region k spans nodes k..k+1 (mod N), so node k joins regions k-1 and k.
  mesh.node_pairs.assign(n_nodes, {});
  for (int k = 0; k < n_nodes; ++k) {
    const int left = (k + n_nodes - 1) % n_nodes;
    mesh.node_pairs[k].emplace_back(std::min(left, k), std::max(left, k));
  }
  return mesh;
}

void rebuild_adjacency(SimplexMesh& mesh) {
  if (mesh.kind == MeshKind::LaplaceCircle) {
    const int n = mesh.num_nodes();
    mesh.node_pairs.assign(n, {});
    for (int k = 0; k < n; ++k) {
      const int left = (k + n - 1) % n;
      mesh.node_pairs[k].emplace_back(std::min(left, k), std::max(left, k));
    }
    return;
  }
  compute_node_pairs(mesh);
}

int locate_region(const SimplexMesh& mesh, const vec_t& w) {
  if (mesh.kind == MeshKind::LaplaceCircle) return locate_region(mesh, w[0]);
  if (w.size() != mesh.d) throw std::invalid_argument("locate_region: bad angle size");
  const int d = mesh.d;
  for (int k = 0; k < mesh.num_regions(); ++k) {
    const auto& reg = mesh.regions[k];
    mat_t v(d, d);
    for (int j = 0; j < d; ++j) v.col(j) = mesh.angles.row(reg[j]).transpose();
    const vec_t b = v.fullPivLu().solve(w);
    if ((b.array() >= -1e-10).all() && (v * b - w).cwiseAbs().maxCoeff() < 1e-8)
      return k;
  }
  throw std::runtime_error("locate_region: angle not covered by any region");
}

int locate_region(const SimplexMesh& mesh, double w) {
  if (mesh.kind != MeshKind::LaplaceCircle)
    throw std::invalid_argument("locate_region: scalar angle requires a Laplace mesh");
  const double wr = laplace_wrap(w);
  const int n = mesh.num_nodes();
  for (int k = 0; k < n; ++k) {
    const double a = mesh.circle_coords[mesh.regions[k][0]];
    double b = mesh.circle_coords[mesh.regions[k][1]];
    double x = wr;
    if (k == n - 1) b += 4.0;          // wrap arc
    if (x < a - 1e-10) x += 4.0;       // query below the arc start
    if (x >= a - 1e-10 && x <= b + 1e-10) return k;
  }
  throw std::runtime_error("locate_region: angle not covered by any arc");
}

mat_t angle_grid(int d, int n) {
  if (d == 2) {
    mat_t g(n, 2);
    for (int i = 0; i < n; ++i) {
      const double w = (n == 1) ? 0.5 : static_cast<double>(i) / (n - 1);
      g(i, 0) = w;
      g(i, 1) = 1.0 - w;
    }
    return g;
  }
  if (d == 3) {
    int m = 1;
    while ((m + 1) * (m + 2) / 2 < n) ++m;
    std::vector<Eigen::Vector3d> pts;
    for (int i = 0; i <= m; ++i)
      for (int j = 0; j + i <= m; ++j)
        pts.emplace_back(static_cast<double>(i) / m, static_cast<double>(j) / m,
                         static_cast<double>(m - i - j) / m);
    mat_t g(pts.size(), 3);
    for (std::size_t k = 0; k < pts.size(); ++k) g.row(k) = pts[k];
    return g;
  }
  // d >= 4: deterministic spread via hashed uniforms through the exponential
  // map (equivalent to a flat Dirichlet).
  mat_t g(n, d);
  for (int i = 0; i < n; ++i) {
    vec_t e(d);
    for (int j = 0; j < d; ++j) {
      double u = hash01(static_cast<std::uint64_t>(i) * 131 + j + 1);
      u = std::min(std::max(u, 1e-12), 1.0 - 1e-12);
      e[j] = -std::log(u);
    }
    g.row(i) = (e / e.sum()).transpose();
  }
  return g;
}

vec_t laplace_angle_grid(int n) {
  vec_t g(n);
  for (int i = 0; i < n; ++i) g[i] = -2.0 + 4.0 * i / n;
  return g;
}

}  // namespace pwle::geom
