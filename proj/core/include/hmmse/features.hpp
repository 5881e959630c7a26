#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <vector>

#include "hmmse/matrix.hpp"

namespace hmmse {

// Per-frame natural-log pitch. Unvoiced frames hold no value at all.
struct F0Track {
  int frame_shift = 80;
  std::vector<std::optional<double>> log_f0;

  std::size_t size() const { return log_f0.size(); }
  bool voiced(std::size_t t) const { return log_f0[t].has_value(); }
  double hz(std::size_t t) const { return std::exp(*log_f0[t]); }
  std::size_t voiced_count() const;
};

struct MelCepstrumSequence {
  int order = 24;  // coefficients 0..order
  double alpha = 0.42;
  int frame_shift = 80;
  FrameMatrix frames;  // rows = frames, cols = order + 1

  std::size_t size() const { return static_cast<std::size_t>(frames.rows()); }
  int width() const { return order + 1; }
};

// Shared binary feature container: "HMSE", version, frame count, width,
// frame shift, then float32 little-endian row-major frames.
struct FeatureFile {
  std::uint32_t frame_shift = 0;
  FrameMatrix data;
};

inline constexpr std::uint32_t kFeatureFileVersion = 1;

void write_feature_file(const FeatureFile& file, const std::filesystem::path& path);
FeatureFile read_feature_file(const std::filesystem::path& path);

// F0 is stored as width-2 rows {voiced flag, log_f0 or NaN}.
FeatureFile to_feature_file(const F0Track& f0);
F0Track f0_from_feature_file(const FeatureFile& file);

FeatureFile to_feature_file(const MelCepstrumSequence& mc);
// The container has no alpha field; callers supply the analysis alpha.
MelCepstrumSequence mc_from_feature_file(const FeatureFile& file, double alpha);

}  // namespace hmmse
