#pragma once

#include <Eigen/Core>

namespace hmmse {

// Row-major so that one row is one frame and can be handed out as a span.
using FrameMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vector = Eigen::VectorXd;

}  // namespace hmmse
