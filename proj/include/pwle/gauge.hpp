#pragma once

#include <functional>
#include <memory>
#include <vector>

#include "pwle/mesh.hpp"
#include "pwle/types.hpp"

namespace pwle::gauge {

/// A gauge function: 1-homogeneous, positive away from the origin. Evaluated
/// on the nonnegative orthant (exponential margins) or all of R^2 (Laplace
/// margins).
using GaugeFn = std::function<double(const vec_t&)>;

/**
 * @brief Piecewise-linear gauge on a simplex (or Laplace circle) mesh.
 *
 * Node k of the mesh carries a scale theta[k] > 0; the boundary of the unit
 * level set interpolates the scaled nodes theta[k] * w_k linearly on each
 * region, making the gauge linear on each region's cone. All per-region
 * quantities (gradients, the level-set volume, region membership tests) are
 * precomputed, so evaluation is a locate plus one dot product.
 */
class PwlGauge {
 public:
  PwlGauge(geom::SimplexMesh mesh, vec_t theta);
  PwlGauge(std::shared_ptr<const geom::SimplexMesh> mesh, vec_t theta);

  const geom::SimplexMesh& mesh() const { return *mesh_; }
  const std::shared_ptr<const geom::SimplexMesh>& mesh_ptr() const { return mesh_; }
  const vec_t& theta() const { return theta_; }
  int dim() const { return mesh_->d; }

  /// Same mesh, new node scales (cheap: the mesh is shared, caches rebuilt).
  PwlGauge with_theta(vec_t theta) const;

  /// Evaluate at any point of the domain (g(0) = 0).
  double operator()(const vec_t& x) const;

  /// Region index containing the angle (first match in region order).
  int region_of(const vec_t& w) const;
  int region_of(double w) const;  // Laplace circle angle

  /// Gauge value at a unit-L1 angle.
  double at_angle(const vec_t& w) const;
  double at_angle(double w) const;  // Laplace circle angle

  /// Constant gradient of the gauge on region k; rows of gradients().
  vec_t region_gradient(int k) const { return grad_.row(k).transpose(); }
  const mat_t& gradients() const { return grad_; }

  /// Volume of the unit level set {g <= 1}.
  double volume() const { return volume_; }

  /// Angular density g(w)^{-d} / (d volume) with respect to Lebesgue measure
  /// on the first d-1 angle coordinates (or on the circle [-2,2)).
  double angular_density(const vec_t& w) const;
  double angular_density(double w) const;  // Laplace circle angle

 private:
  void build();

  std::shared_ptr<const geom::SimplexMesh> mesh_;
  vec_t theta_;
  mat_t grad_;                  // num_regions x d
  std::vector<mat_t> inverse_;  // per-region inverse of the node-angle matrix
  double volume_ = 0.0;
};

// --- closed-form gauges of the reference copulas (exponential margins) ------

/// Logistic dependence, alpha in (0, 1]: (1/a) sum x + (1 - d/a) min x.
GaugeFn logistic_gauge(int d, double alpha);

/// Inverted logistic, alpha in (0, 1]: (sum x^(1/a))^a.
GaugeFn inverted_logistic_gauge(int d, double alpha);

/// Gaussian copula with correlation matrix R: sqrt(x)' R^{-1} sqrt(x).
GaugeFn gaussian_gauge(const mat_t& correlation);

/**
 * @brief Asymmetric logistic gauge. `sets` lists the index groups that can be
 * simultaneously extreme (jointly covering all coordinates) and `alphas` the
 * per-group dependence. Minimizes the partition cost
 *   sum_blocks [ sum_{j in s} x_j / a_C + (1 - |s|/a_C) min_{j in C} x_j ]
 * over all partitions, each block s assigned a covering group C.
 */
GaugeFn asymmetric_logistic_gauge(int d, std::vector<std::vector<int>> sets,
                                  vec_t alphas);

/// Gauge of an equally-weighted density mixture: pointwise minimum.
GaugeFn mixture_gauge(GaugeFn a, GaugeFn b);

/// Gaussian copula in Laplace margins: s(x)' R^{-1} s(x), s = sign sqrt(|x|).
GaugeFn signed_gaussian_gauge(const mat_t& correlation);

/**
 * @brief Projection of a gauge onto the coordinates in `keep`:
 * min over the dropped coordinates (grid of `grid` points per dropped axis on
 * [0, max x_keep]) of g at the completed vector.
 */
double project_gauge(const GaugeFn& g, int d, const std::vector<int>& keep,
                     const vec_t& x_keep, int grid = 21);

}  // namespace pwle::gauge
