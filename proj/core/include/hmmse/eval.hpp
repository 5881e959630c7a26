#pragma once

#include <cstddef>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "hmmse/features.hpp"
#include "hmmse/signal.hpp"

namespace hmmse {

// Mel-cepstral distortion in dB, c(0) excluded, averaged over frames. Throws
// LengthMismatch for different frame counts or orders.
double mcd(const MelCepstrumSequence& a, const MelCepstrumSequence& b);

// MCD along the minimum-distortion DTW path, for sequences of different length.
double mcd_dtw(const MelCepstrumSequence& a, const MelCepstrumSequence& b);

struct F0Metrics {
  double rmse_hz = 0.0;        // over frames voiced in both
  double vuv_error_pct = 0.0;  // frames with different voicing decisions
  std::size_t both_voiced = 0;
};

F0Metrics f0_metrics(const F0Track& a, const F0Track& b);

// `count` frames starting at `begin`, for lining up tracks that are offset
// in time.
F0Track slice_frames(const F0Track& f0, std::size_t begin, std::size_t count);
MelCepstrumSequence slice_frames(const MelCepstrumSequence& mc, std::size_t begin, std::size_t count);

struct BandEnergy {
  double lo_hz = 0.0;
  double hi_hz = 0.0;
  double db = 0.0;
};

// Mean dB over all frames and the bins whose centre lies in [lo, hi). Throws
// EmptyBand when no bin qualifies.
double band_energy(const Spectrogram& spec, double lo_hz, double hi_hz);

// Mean over frame pairs of the RMS dB change across bins in [lo, hi).
double spectral_flux(const Spectrogram& spec, double lo_hz, double hi_hz);

// Low band, modulation and formant-band diagnostics of one spectrogram.
struct TriptychReport {
  BandEnergy low_band;     // 0-100 Hz
  double flux_db = 0.0;    // 0-1 kHz
  std::vector<BandEnergy> formant_bands;  // 2375-2625 Hz, 3000-3500 Hz
};

TriptychReport triptych(const Spectrogram& spec);

inline constexpr double kDefaultSpikeFactor = 8.0;
inline constexpr std::size_t kDefaultSpikeWindow = 256;

// Samples exceeding k times the RMS of the surrounding window (the sample
// itself excluded, out-of-range samples counted as zero). Hits closer than
// window / 2 to the previous hit belong to the same event, reported at its
// largest sample. Throws ConfigError for window < 16.
std::vector<std::size_t> detect_spikes(const Waveform& wf, std::size_t window = kDefaultSpikeWindow,
                                       double k = kDefaultSpikeFactor);

// Writes `path` with extensions .csv (dB matrix, one frame per row) and .pgm
// (8-bit P5, time left to right, frequency bottom to top).
void export_spectrogram(const Spectrogram& spec, const std::filesystem::path& path);

// Gray levels of the PGM image, row-major from the top row.
std::vector<unsigned char> spectrogram_pixels(const Spectrogram& spec);

// Decay time from the Schroeder integral, fitted between -5 and -25 dB.
double schroeder_rt60(std::span<const double> impulse_response, int sample_rate);

struct MetricReport {
  double mcd_db = 0.0;
  F0Metrics f0;
  std::vector<BandEnergy> band_energies;
  std::vector<std::size_t> spikes;
};

std::string format_metric_report(const MetricReport& report);

}  // namespace hmmse
