#pragma once

#include <Eigen/Dense>

namespace fracctrl {

/// Ensemble storage: one row per path, one column per time step. Row-major so that a single
/// path is contiguous and can be handed out as a span.
template <typename Scalar>
using PathMatrixX = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

using PathMatrix = PathMatrixX<double>;

using Eigen::Index;

}  // namespace fracctrl
