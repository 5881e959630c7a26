#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "hmmse/analysis.hpp"
#include "hmmse/features.hpp"
#include "hmmse/signal.hpp"

namespace hmmse {

enum class PulseGain { unit_energy_per_period, unit_amplitude };

struct ExcitationConfig {
  std::uint64_t seed = 1;
  double noise_gain = 1.0;
  PulseGain pulse_gain = PulseGain::unit_energy_per_period;
};

// Pulse train in voiced frames, seeded white Gaussian noise in unvoiced ones.
// Output length is frames * frame_shift.
Waveform make_excitation(const F0Track& f0, int sample_rate, const ExcitationConfig& cfg);

inline constexpr double kMlsaStateLimit = 1e6;
inline constexpr int kPadeOrder = 5;

// Mel-cepstrum to MLSA filter coefficients b(m).
std::vector<double> mc_to_mlsa(std::span<const double> mc, double alpha);

// Streaming MLSA filter for fixed coefficients; the caller updates b between
// samples. Throws UnstableCoefficients when the internal state leaves the
// +-kMlsaStateLimit range.
class MlsaFilter {
 public:
  MlsaFilter(int order, double alpha);

  double filter(double x, std::span<const double> b);
  void reset();

 private:
  double first_stage(double x, double b1);
  double second_stage(double x, std::span<const double> b);
  double fir(double x, std::span<const double> b, std::span<double> d) const;

  int order_;
  double alpha_;
  std::vector<double> d1_;  // first-stage delay line, 2 * (pade + 1)
  std::vector<double> d2_;  // second-stage delay lines, pade * (order + 2) + pade + 1
};

// Time-varying MLSA synthesis, coefficients interpolated between frame centres.
Waveform mlsa_filter(const MelCepstrumSequence& mc, const Waveform& excitation);

Waveform resynthesize(const Waveform& wf, const AnalysisConfig& cfg, const ExcitationConfig& ex_cfg);

// Vocoder back end shared by resynthesis and the enhancement pipeline.
Waveform vocode(const F0Track& f0, const MelCepstrumSequence& mc, int sample_rate, const ExcitationConfig& ex_cfg);

}  // namespace hmmse
