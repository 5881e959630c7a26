#pragma once

#include <memory>
#include <span>
#include <vector>

#include "hmmse/features.hpp"
#include "hmmse/signal.hpp"

namespace hmmse {

struct AnalysisConfig {
  FrameConfig frame;
  int fft_size = 512;
  double f0_min = 60.0;
  double f0_max = 400.0;
  double vuv_threshold = 0.3;
  int median_width = 5;
  int order = 24;
  double alpha = 0.42;
};

// Throws ConfigError for bounds that cannot be honoured at `sample_rate`.
void validate(const AnalysisConfig& cfg, int sample_rate);

F0Track estimate_f0(const Waveform& wf, const AnalysisConfig& cfg);

MelCepstrumSequence mgc_analysis(const Waveform& wf, const AnalysisConfig& cfg);

// Frequency warping of the first-order all-pass map.
double warp_frequency(double omega, double alpha);

// Least-squares fit of a mel-cepstrum to a natural-log magnitude spectrum
// sampled on the fft_size/2 + 1 DFT bins. The Gram factorisation is built
// once and reused across frames.
class MelCepstrumFitter {
 public:
  MelCepstrumFitter(int order, double alpha, int fft_size, double ridge = 1e-6);
  ~MelCepstrumFitter();
  MelCepstrumFitter(MelCepstrumFitter&&) noexcept;
  MelCepstrumFitter& operator=(MelCepstrumFitter&&) noexcept;

  int order() const { return order_; }
  double alpha() const { return alpha_; }
  int fft_size() const { return fft_size_; }

  // `log_magnitude` holds ln|X(k)| for k = 0..fft_size/2.
  Vector fit(std::span<const double> log_magnitude) const;

 private:
  struct Impl;
  int order_;
  double alpha_;
  int fft_size_;
  std::unique_ptr<Impl> impl_;
};

// dB envelope 20*log10|H| on the fft_size/2 + 1 DFT bins.
std::vector<double> mc_to_envelope(std::span<const double> coefficients, double alpha, int fft_size);

// Number of analysis frames by which a vocoded signal leads its source:
// analysis frame t is centred frame_length/2 into its span while synthesis
// block t is centred frame_shift/2 into its block.
int synthesis_lag_frames(const FrameConfig& cfg);

}  // namespace hmmse
