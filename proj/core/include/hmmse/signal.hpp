#pragma once

#include <cstddef>
#include <filesystem>
#include <span>
#include <vector>

#include "hmmse/matrix.hpp"

namespace hmmse {

struct Waveform {
  std::vector<double> samples;
  int sample_rate = 16000;

  double duration_seconds() const {
    return static_cast<double>(samples.size()) / static_cast<double>(sample_rate);
  }
  std::size_t size() const { return samples.size(); }
};

enum class WindowKind { hamming, hann, rectangular };

struct FrameConfig {
  int frame_length = 400;  // 25 ms at 16 kHz
  int frame_shift = 80;    // 5 ms at 16 kHz
  WindowKind window = WindowKind::hamming;
};

// Throws ConfigError unless 0 < frame_shift <= frame_length.
void validate(const FrameConfig& cfg);

struct Spectrogram {
  FrameMatrix magnitudes_db;  // frames x (fft_size / 2 + 1)
  double bin_hz = 0.0;
  int frame_shift = 0;
  double floor_db = -100.0;

  std::size_t frames() const { return static_cast<std::size_t>(magnitudes_db.rows()); }
  std::size_t bins() const { return static_cast<std::size_t>(magnitudes_db.cols()); }
};

struct WavWriteReport {
  std::size_t clipped_samples = 0;
};

Waveform read_wav(const std::filesystem::path& path);
WavWriteReport write_wav(const Waveform& wf, const std::filesystem::path& path);

std::vector<double> make_window(WindowKind kind, int length);

std::size_t frame_count(std::size_t num_samples, const FrameConfig& cfg);

// Windowed frames, one row per frame.
FrameMatrix frame_signal(const Waveform& wf, const FrameConfig& cfg);

inline constexpr double kSpectrogramFloorDb = -100.0;

Spectrogram spectrogram(const Waveform& wf, const FrameConfig& cfg, int fft_size,
                        bool normalize = false);

// Fourth-order Butterworth high-pass as two cascaded biquads.
Waveform highpass(const Waveform& wf, double cutoff_hz);

// Magnitude response of highpass() at `freq_hz`, in dB.
double highpass_response_db(double cutoff_hz, int sample_rate, double freq_hz);

inline constexpr double kDefaultHighpassCutoff = 70.0;

Waveform normalize_peak(const Waveform& wf, double target_peak = 1.0);

double rms(std::span<const double> x);
double peak(std::span<const double> x);

}  // namespace hmmse
