#pragma once

#include <utility>
#include <vector>

#include "pwle/types.hpp"

namespace pwle::geom {

/// L1 radial-angular split on the positive orthant:
/// r = ||x||_1 and w = x / r, a point on the unit simplex.
std::pair<double, vec_t> decompose(const vec_t& x);

/// Inverse of decompose: x = r * w.
vec_t recompose(double r, const vec_t& w);

// --- Laplace-margin analogue for d = 2 -------------------------------------
// The angle is a scalar on the circle [-2, 2) covering all four quadrants;
// the unit vector is the L1 cosine/sine pair (period 4).

/// Wrap a scalar angle into [-2, 2).
double laplace_wrap(double w);

/// Unit L1 vector (cos1(w), sin1(w)) for an angle in [-2, 2).
Eigen::Vector2d laplace_unit(double w);

/// (r, w) with r = |x1| + |x2|; w in [-2, 2).
std::pair<double, double> laplace_decompose(double x1, double x2);

/// Inverse: (x1, x2) = r * laplace_unit(w).
Eigen::Vector2d laplace_recompose(double r, double w);

// --- simplex meshes ---------------------------------------------------------

enum class MeshKind { Simplex, LaplaceCircle };

/**
 * @brief Partition of the angular domain into simplicial regions.
 *
 * For MeshKind::Simplex the domain is the unit L1 simplex in d coordinates;
 * nodes are angles (rows of `angles`) and each region lists d node indices.
 * For MeshKind::LaplaceCircle (d = 2, Laplace margins) the domain is the
 * circle [-2, 2); nodes are scalar angles in `circle_coords` and regions are
 * consecutive arcs, including the wrap-around arc.
 */
struct SimplexMesh {
  int d = 0;
  MeshKind kind = MeshKind::Simplex;
  /// N x d; row k is the (signed, for Laplace) unit-L1 vector of node k.
  mat_t angles;
  /// Scalar node angles for the Laplace circle; empty otherwise.
  vec_t circle_coords;
  /// M regions; each holds d node indices. Simplex meshes store them
  /// ascending and lexicographically ordered across regions; Laplace arcs are
  /// stored start-to-end (region k spans nodes k and k+1 mod N).
  std::vector<region_t> regions;
  /// For each node, the pairs of region indices that share d-1 vertices and
  /// both contain that node (the smoothing-penalty neighbour sets).
  std::vector<std::vector<std::pair<int, int>>> node_pairs;

  int num_nodes() const { return static_cast<int>(angles.rows()); }
  int num_regions() const { return static_cast<int>(regions.size()); }
};

/**
 * @brief Build a mesh from a list of angles (rows summing to 1, one unit
 * vector per coordinate required). Regions come from a Delaunay triangulation
 * of the angles projected by dropping the last coordinate; degenerate
 * (cospherical) families are resolved by a deterministic 1e-12 lift
 * perturbation.
 */
SimplexMesh mesh_from_angles(const mat_t& angles);

/// Equally spaced mesh: d = 2 gives resolution+1 nodes on [0, 1]; d = 3 gives
/// the triangular grid {0, 1/res, ..., 1}^2 restricted to the simplex.
SimplexMesh make_regular_mesh(int d, int resolution);

/// Sparse mesh for d >= 4: unit vectors, the global centre, and the centres
/// of all subfaces of dimension 1..d-2. With refine=true the centroids of the
/// initial Delaunay regions are inserted as additional nodes.
SimplexMesh make_sparse_mesh(int d, bool refine);

/// Laplace-margin circle mesh: n_nodes equally spaced on [-2, 2), starting
/// at -2.
SimplexMesh make_laplace_mesh(int n_nodes);

/// Recompute node_pairs for a mesh whose d, kind, nodes, and regions were set
/// directly (e.g. after deserialization). Existing node_pairs are discarded.
void rebuild_adjacency(SimplexMesh& mesh);

/**
 * @brief Index of the region containing an angle (tolerance 1e-10 on
 * barycentric coordinates; ties resolved to the lowest region index).
 *
 * For Simplex meshes `w` is the full d-vector; for LaplaceCircle meshes pass
 * the scalar angle in w[0]. Throws std::runtime_error if no region matches.
 */
int locate_region(const SimplexMesh& mesh, const vec_t& w);

/// Scalar-angle overload for the Laplace circle.
int locate_region(const SimplexMesh& mesh, double w);

/// Roughly n angles covering the angular domain: a uniform grid on [0, 1]
/// (d = 2), a triangular grid (d = 3), or a low-discrepancy spread (d >= 4).
mat_t angle_grid(int d, int n);

/// Uniform grid of n scalar angles on [-2, 2), starting at -2.
vec_t laplace_angle_grid(int n);

}  // namespace pwle::geom
