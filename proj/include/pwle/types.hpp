#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <stdexcept>
#include <vector>

namespace pwle {

using vec_t = Eigen::VectorXd;
using mat_t = Eigen::MatrixXd;
using ivec_t = std::vector<int>;

/// A mesh region: the node indices of one simplex (d entries).
using region_t = std::vector<int>;

}  // namespace pwle
