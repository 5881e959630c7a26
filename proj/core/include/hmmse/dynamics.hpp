#pragma once

#include <array>
#include <cstddef>

#include "hmmse/matrix.hpp"

namespace hmmse {

// Regression windows over offsets {-1, 0, +1}: static, delta, delta-delta.
// Training (compute_deltas) and generation (mlpg) both read this table, and
// both replicate the boundary frames, so the two can never disagree.
inline constexpr std::size_t kNumWindows = 3;
inline constexpr std::array<std::array<double, 3>, kNumWindows> kDeltaWindows = {{
    {0.0, 1.0, 0.0},
    {-0.5, 0.0, 0.5},
    {1.0, -2.0, 1.0},
}};

// Clamped frame index used by the windows at sequence boundaries.
inline std::ptrdiff_t window_index(std::ptrdiff_t t, std::ptrdiff_t offset, std::ptrdiff_t frames) {
  const std::ptrdiff_t i = t + offset;
  return i < 0 ? 0 : (i >= frames ? frames - 1 : i);
}

// [static, delta, delta-delta] per frame; width triples. Throws TooShort for
// fewer than 3 frames.
FrameMatrix compute_deltas(const FrameMatrix& statics);

// Same windows without the length requirement (short voiced runs of the
// pitch stream).
FrameMatrix apply_delta_windows(const FrameMatrix& statics);

}  // namespace hmmse
