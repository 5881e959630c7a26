#include "hmmse/dynamics.hpp"

#include "hmmse/error.hpp"

namespace hmmse {

FrameMatrix apply_delta_windows(const FrameMatrix& statics) {
  const Eigen::Index frames = statics.rows();
  const Eigen::Index dim = statics.cols();
  FrameMatrix out = FrameMatrix::Zero(frames, dim * static_cast<Eigen::Index>(kNumWindows));
  for (Eigen::Index t = 0; t < frames; ++t) {
    for (std::size_t w = 0; w < kNumWindows; ++w) {
      for (std::ptrdiff_t k = -1; k <= 1; ++k) {
        const double coef = kDeltaWindows[w][static_cast<std::size_t>(k + 1)];
        if (coef == 0.0) continue;
        const auto src = window_index(t, k, frames);
        out.row(t).segment(static_cast<Eigen::Index>(w) * dim, dim) += coef * statics.row(src);
      }
    }
  }
  return out;
}

FrameMatrix compute_deltas(const FrameMatrix& statics) {
  if (statics.rows() < 3) {
    throw Error(ErrorCode::TooShort, "delta computation needs at least 3 frames, got " + std::to_string(statics.rows()));
  }
  return apply_delta_windows(statics);
}

}  // namespace hmmse
