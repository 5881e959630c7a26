#include "hmmse/features.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <limits>

#include "hmmse/error.hpp"

namespace hmmse {
namespace {

constexpr char kMagic[4] = {'H', 'M', 'S', 'E'};

void put_u32(std::ostream& out, std::uint32_t v) {
  unsigned char b[4];
  for (int i = 0; i < 4; ++i) b[i] = static_cast<unsigned char>((v >> (8 * i)) & 0xff);
  out.write(reinterpret_cast<const char*>(b), 4);
}

std::uint32_t get_u32(std::istream& in) {
  unsigned char b[4];
  if (!in.read(reinterpret_cast<char*>(b), 4)) throw Error(ErrorCode::CorruptHeader, "truncated feature header");
  return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
         (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
}

}  // namespace

std::size_t F0Track::voiced_count() const {
  std::size_t n = 0;
  for (const auto& v : log_f0) n += v.has_value() ? 1 : 0;
  return n;
}

void write_feature_file(const FeatureFile& file, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::IoError, "cannot open " + path.string() + " for writing");
  out.write(kMagic, 4);
  put_u32(out, kFeatureFileVersion);
  put_u32(out, static_cast<std::uint32_t>(file.data.rows()));
  put_u32(out, static_cast<std::uint32_t>(file.data.cols()));
  put_u32(out, file.frame_shift);
  for (Eigen::Index r = 0; r < file.data.rows(); ++r) {
    for (Eigen::Index c = 0; c < file.data.cols(); ++c) {
      put_u32(out, std::bit_cast<std::uint32_t>(static_cast<float>(file.data(r, c))));
    }
  }
  if (!out) throw Error(ErrorCode::IoError, "write failed for " + path.string());
}

FeatureFile read_feature_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    if (!std::filesystem::exists(path)) throw Error(ErrorCode::NotFound, path.string());
    throw Error(ErrorCode::IoError, "cannot open " + path.string());
  }
  char magic[4];
  if (!in.read(magic, 4) || std::memcmp(magic, kMagic, 4) != 0) {
    throw Error(ErrorCode::CorruptHeader, path.string() + " is not a feature file");
  }
  const std::uint32_t version = get_u32(in);
  if (version != kFeatureFileVersion) {
    throw Error(ErrorCode::UnsupportedFormat, "feature file version " + std::to_string(version));
  }
  const std::uint32_t frames = get_u32(in);
  const std::uint32_t width = get_u32(in);
  FeatureFile file;
  file.frame_shift = get_u32(in);
  file.data.resize(frames, width);
  for (std::uint32_t r = 0; r < frames; ++r) {
    for (std::uint32_t c = 0; c < width; ++c) {
      file.data(r, c) = static_cast<double>(std::bit_cast<float>(get_u32(in)));
    }
  }
  return file;
}

FeatureFile to_feature_file(const F0Track& f0) {
  FeatureFile file;
  file.frame_shift = static_cast<std::uint32_t>(f0.frame_shift);
  file.data.resize(static_cast<Eigen::Index>(f0.size()), 2);
  for (std::size_t t = 0; t < f0.size(); ++t) {
    const auto r = static_cast<Eigen::Index>(t);
    file.data(r, 0) = f0.voiced(t) ? 1.0 : 0.0;
    file.data(r, 1) = f0.voiced(t) ? *f0.log_f0[t] : std::numeric_limits<double>::quiet_NaN();
  }
  return file;
}

F0Track f0_from_feature_file(const FeatureFile& file) {
  if (file.data.cols() != 2) {
    throw Error(ErrorCode::DimensionMismatch, "F0 feature files have width 2");
  }
  F0Track f0;
  f0.frame_shift = static_cast<int>(file.frame_shift);
  f0.log_f0.resize(static_cast<std::size_t>(file.data.rows()));
  for (Eigen::Index r = 0; r < file.data.rows(); ++r) {
    if (file.data(r, 0) > 0.5) {
      if (!std::isfinite(file.data(r, 1))) throw Error(ErrorCode::CorruptHeader, "voiced frame without pitch");
      f0.log_f0[static_cast<std::size_t>(r)] = file.data(r, 1);
    }
  }
  return f0;
}

FeatureFile to_feature_file(const MelCepstrumSequence& mc) {
  return FeatureFile{static_cast<std::uint32_t>(mc.frame_shift), mc.frames};
}

MelCepstrumSequence mc_from_feature_file(const FeatureFile& file, double alpha) {
  if (file.data.cols() < 1) throw Error(ErrorCode::DimensionMismatch, "empty cepstral width");
  MelCepstrumSequence mc;
  mc.order = static_cast<int>(file.data.cols()) - 1;
  mc.alpha = alpha;
  mc.frame_shift = static_cast<int>(file.frame_shift);
  mc.frames = file.data;
  return mc;
}

}  // namespace hmmse
