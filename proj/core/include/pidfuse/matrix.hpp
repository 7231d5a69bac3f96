#pragma once

#include <Eigen/Dense>

namespace pidfuse {

using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

}  // namespace pidfuse
