#pragma once

#include <Eigen/Dense>

namespace fewshot {

/// Dense embedding coordinates, always held at double precision in memory.
using FeatureVector = Eigen::VectorXd;

/// Row-major so that each row is one contiguous feature vector.
using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// Absolute norm under which a vector is treated as zero.
inline constexpr double kDegenerateNorm = 1e-12;

}  // namespace fewshot
