#pragma once

#include <Eigen/Dense>

namespace carnot {

// Chart dimension is capped at 8 so small vectors and matrices stay on the stack.
constexpr int kMaxDim = 8;

using Vec = Eigen::Matrix<double, Eigen::Dynamic, 1, 0, kMaxDim, 1>;
using Mat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, 0, kMaxDim, kMaxDim>;

} // namespace carnot
