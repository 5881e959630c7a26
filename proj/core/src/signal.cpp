#include "hmmse/signal.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <numbers>

#include "hmmse/error.hpp"
#include "hmmse/spectral.hpp"

namespace hmmse {
namespace {

std::uint32_t read_u32(const unsigned char* p) {
  return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}

std::uint16_t read_u16(const unsigned char* p) {
  return static_cast<std::uint16_t>(p[0] | (p[1] << 8));
}

void put_u32(std::vector<unsigned char>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<unsigned char>((v >> (8 * i)) & 0xff));
}

void put_u16(std::vector<unsigned char>& out, std::uint16_t v) {
  out.push_back(static_cast<unsigned char>(v & 0xff));
  out.push_back(static_cast<unsigned char>((v >> 8) & 0xff));
}

void put_tag(std::vector<unsigned char>& out, const char* tag) {
  out.insert(out.end(), tag, tag + 4);
}

struct Biquad {
  double b0, b1, b2, a1, a2;
};

// RBJ high-pass sections; Q values of a 4th-order Butterworth prototype.
std::array<Biquad, 2> butterworth_highpass(double cutoff_hz, int sample_rate) {
  const std::array<double, 2> qs = {1.0 / (2.0 * std::cos(std::numbers::pi / 8.0)),
                                    1.0 / (2.0 * std::cos(3.0 * std::numbers::pi / 8.0))};
  const double w0 = 2.0 * std::numbers::pi * cutoff_hz / sample_rate;
  const double cw = std::cos(w0);
  const double sw = std::sin(w0);
  std::array<Biquad, 2> sections{};
  for (std::size_t i = 0; i < 2; ++i) {
    const double alpha = sw / (2.0 * qs[i]);
    const double a0 = 1.0 + alpha;
    sections[i] = {(1.0 + cw) / 2.0 / a0, -(1.0 + cw) / a0, (1.0 + cw) / 2.0 / a0, -2.0 * cw / a0,
                   (1.0 - alpha) / a0};
  }
  return sections;
}

void check_cutoff(double cutoff_hz, int sample_rate) {
  if (!(cutoff_hz > 0.0) || !(cutoff_hz < sample_rate / 2.0)) {
    throw Error(ErrorCode::InvalidCutoff,
                "cutoff must lie in (0, " + std::to_string(sample_rate / 2) + ") Hz");
  }
}

}  // namespace

void validate(const FrameConfig& cfg) {
  if (cfg.frame_shift <= 0 || cfg.frame_length <= 0 || cfg.frame_shift > cfg.frame_length) {
    throw Error(ErrorCode::ConfigError, "frame config requires 0 < frame_shift <= frame_length");
  }
}

Waveform read_wav(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    if (!std::filesystem::exists(path)) throw Error(ErrorCode::NotFound, path.string());
    throw Error(ErrorCode::IoError, "cannot open " + path.string());
  }
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (bytes.size() < 12 || std::memcmp(bytes.data(), "RIFF", 4) != 0 ||
      std::memcmp(bytes.data() + 8, "WAVE", 4) != 0) {
    throw Error(ErrorCode::CorruptHeader, path.string() + " is not a RIFF/WAVE file");
  }

  bool have_fmt = false;
  std::uint16_t format = 0, channels = 0, bits = 0;
  std::uint32_t rate = 0;
  std::size_t pos = 12;
  while (pos + 8 <= bytes.size()) {
    const unsigned char* chunk = bytes.data() + pos;
    const std::uint32_t size = read_u32(chunk + 4);
    const std::size_t body = pos + 8;
    if (std::memcmp(chunk, "fmt ", 4) == 0) {
      if (size < 16 || body + 16 > bytes.size()) throw Error(ErrorCode::CorruptHeader, "truncated fmt chunk");
      format = read_u16(bytes.data() + body);
      channels = read_u16(bytes.data() + body + 2);
      rate = read_u32(bytes.data() + body + 4);
      bits = read_u16(bytes.data() + body + 14);
      have_fmt = true;
    } else if (std::memcmp(chunk, "data", 4) == 0) {
      if (!have_fmt) throw Error(ErrorCode::CorruptHeader, "data chunk before fmt chunk");
      if (format != 1) throw Error(ErrorCode::UnsupportedFormat, "only PCM is supported (format tag " + std::to_string(format) + ")");
      if (channels != 1) throw Error(ErrorCode::UnsupportedFormat, "only mono is supported (" + std::to_string(channels) + " channels)");
      if (bits != 16) throw Error(ErrorCode::UnsupportedFormat, "only 16-bit samples are supported (" + std::to_string(bits) + " bits)");
      if (rate == 0) throw Error(ErrorCode::CorruptHeader, "zero sample rate");
      if (body + size > bytes.size()) throw Error(ErrorCode::CorruptHeader, "truncated data chunk");
      Waveform wf;
      wf.sample_rate = static_cast<int>(rate);
      wf.samples.resize(size / 2);
      for (std::size_t i = 0; i < wf.samples.size(); ++i) {
        const auto v = static_cast<std::int16_t>(read_u16(bytes.data() + body + 2 * i));
        wf.samples[i] = static_cast<double>(v) / 32768.0;
      }
      return wf;
    }
    pos = body + size + (size & 1u);
  }
  throw Error(ErrorCode::CorruptHeader, path.string() + " has no data chunk");
}

WavWriteReport write_wav(const Waveform& wf, const std::filesystem::path& path) {
  WavWriteReport report;
  const auto data_bytes = static_cast<std::uint32_t>(wf.samples.size() * 2);
  std::vector<unsigned char> out;
  out.reserve(44 + data_bytes);
  put_tag(out, "RIFF");
  put_u32(out, 36 + data_bytes);
  put_tag(out, "WAVE");
  put_tag(out, "fmt ");
  put_u32(out, 16);
  put_u16(out, 1);
  put_u16(out, 1);
  put_u32(out, static_cast<std::uint32_t>(wf.sample_rate));
  put_u32(out, static_cast<std::uint32_t>(wf.sample_rate) * 2);
  put_u16(out, 2);
  put_u16(out, 16);
  put_tag(out, "data");
  put_u32(out, data_bytes);
  for (double x : wf.samples) {
    if (x > 1.0 || x < -1.0 || !std::isfinite(x)) ++report.clipped_samples;
    double q = std::isfinite(x) ? std::round(x * 32768.0) : 0.0;
    q = std::clamp(q, -32768.0, 32767.0);
    put_u16(out, static_cast<std::uint16_t>(static_cast<std::int16_t>(q)));
  }
  std::ofstream file(path, std::ios::binary | std::ios::trunc);
  if (!file) throw Error(ErrorCode::IoError, "cannot open " + path.string() + " for writing");
  file.write(reinterpret_cast<const char*>(out.data()), static_cast<std::streamsize>(out.size()));
  if (!file) throw Error(ErrorCode::IoError, "write failed for " + path.string());
  return report;
}

std::vector<double> make_window(WindowKind kind, int length) {
  std::vector<double> w(static_cast<std::size_t>(length), 1.0);
  if (length <= 1 || kind == WindowKind::rectangular) return w;
  const double denom = static_cast<double>(length - 1);
  for (int n = 0; n < length; ++n) {
    const double c = std::cos(2.0 * std::numbers::pi * n / denom);
    w[static_cast<std::size_t>(n)] = kind == WindowKind::hamming ? 0.54 - 0.46 * c : 0.5 - 0.5 * c;
  }
  return w;
}

std::size_t frame_count(std::size_t num_samples, const FrameConfig& cfg) {
  const auto len = static_cast<std::size_t>(cfg.frame_length);
  if (num_samples < len) return 0;
  return (num_samples - len) / static_cast<std::size_t>(cfg.frame_shift) + 1;
}

FrameMatrix frame_signal(const Waveform& wf, const FrameConfig& cfg) {
  validate(cfg);
  const std::size_t count = frame_count(wf.samples.size(), cfg);
  const auto window = make_window(cfg.window, cfg.frame_length);
  FrameMatrix frames(static_cast<Eigen::Index>(count), cfg.frame_length);
  for (std::size_t t = 0; t < count; ++t) {
    const std::size_t start = t * static_cast<std::size_t>(cfg.frame_shift);
    for (int n = 0; n < cfg.frame_length; ++n) {
      frames(static_cast<Eigen::Index>(t), n) = wf.samples[start + static_cast<std::size_t>(n)] * window[static_cast<std::size_t>(n)];
    }
  }
  return frames;
}

Spectrogram spectrogram(const Waveform& wf, const FrameConfig& cfg, int fft_size, bool normalize) {
  if (!is_power_of_two(fft_size) || fft_size < cfg.frame_length) {
    throw Error(ErrorCode::InvalidFftSize,
                "fft size must be a power of two >= frame length, got " + std::to_string(fft_size));
  }
  Waveform normalized;
  const Waveform* src = &wf;
  if (normalize) {
    normalized = normalize_peak(wf);
    src = &normalized;
  }
  const FrameMatrix frames = frame_signal(*src, cfg);
  RealFft fft(fft_size);
  Spectrogram spec;
  spec.bin_hz = static_cast<double>(wf.sample_rate) / fft_size;
  spec.frame_shift = cfg.frame_shift;
  spec.floor_db = kSpectrogramFloorDb;
  spec.magnitudes_db.resize(frames.rows(), fft.bins());
  std::vector<double> power;
  for (Eigen::Index t = 0; t < frames.rows(); ++t) {
    fft.power(std::span<const double>(frames.row(t).data(), static_cast<std::size_t>(frames.cols())), power);
    for (int k = 0; k < fft.bins(); ++k) {
      const double db = 10.0 * std::log10(power[static_cast<std::size_t>(k)]);
      spec.magnitudes_db(t, k) = std::isfinite(db) ? std::max(db, spec.floor_db) : spec.floor_db;
    }
  }
  return spec;
}

Waveform highpass(const Waveform& wf, double cutoff_hz) {
  check_cutoff(cutoff_hz, wf.sample_rate);
  Waveform out{wf.samples, wf.sample_rate};
  for (const Biquad& s : butterworth_highpass(cutoff_hz, wf.sample_rate)) {
    double z1 = 0.0, z2 = 0.0;
    for (double& x : out.samples) {
      const double y = s.b0 * x + z1;
      z1 = s.b1 * x - s.a1 * y + z2;
      z2 = s.b2 * x - s.a2 * y;
      x = y;
    }
  }
  return out;
}

double highpass_response_db(double cutoff_hz, int sample_rate, double freq_hz) {
  check_cutoff(cutoff_hz, sample_rate);
  const std::complex<double> z1 = std::polar(1.0, -2.0 * std::numbers::pi * freq_hz / sample_rate);
  const std::complex<double> z2 = z1 * z1;
  std::complex<double> h(1.0, 0.0);
  for (const Biquad& s : butterworth_highpass(cutoff_hz, sample_rate)) {
    h *= (s.b0 + s.b1 * z1 + s.b2 * z2) / (1.0 + s.a1 * z1 + s.a2 * z2);
  }
  return 20.0 * std::log10(std::abs(h));
}

Waveform normalize_peak(const Waveform& wf, double target_peak) {
  if (!(target_peak > 0.0) || target_peak > 1.0) {
    throw Error(ErrorCode::ConfigError, "target peak must lie in (0, 1]");
  }
  const double p = peak(wf.samples);
  if (p == 0.0) throw Error(ErrorCode::SilentSignal, "cannot normalize an all-zero signal");
  Waveform out{wf.samples, wf.sample_rate};
  if (p == target_peak) return out;
  const double gain = target_peak / p;
  for (double& x : out.samples) x *= gain;
  return out;
}

double rms(std::span<const double> x) {
  if (x.empty()) return 0.0;
  double acc = 0.0;
  for (double v : x) acc += v * v;
  return std::sqrt(acc / static_cast<double>(x.size()));
}

double peak(std::span<const double> x) {
  double p = 0.0;
  for (double v : x) p = std::max(p, std::abs(v));
  return p;
}

}  // namespace hmmse
