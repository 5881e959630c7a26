#include "hmmse/vocoder.hpp"

#include <array>
#include <cmath>
#include <random>

#include "hmmse/error.hpp"

namespace hmmse {
namespace {

// Pade(5) coefficients of the exponential, as used by MLSA realisations.
constexpr std::array<double, kPadeOrder + 1> kPade = {1.0,        0.4999391,    0.1107098,
                                                      0.01369984, 0.0009564853, 0.00003041721};

[[noreturn]] void unstable(const char* where) {
  throw Error(ErrorCode::UnstableCoefficients,
              std::string("MLSA filter state exceeded the stability limit in ") + where);
}

}  // namespace

Waveform make_excitation(const F0Track& f0, int sample_rate, const ExcitationConfig& cfg) {
  if (cfg.noise_gain < 0.0) throw Error(ErrorCode::ConfigError, "noise_gain must be >= 0");
  const auto shift = static_cast<std::size_t>(f0.frame_shift);
  Waveform out;
  out.sample_rate = sample_rate;
  out.samples.assign(f0.size() * shift, 0.0);

  std::mt19937_64 rng(cfg.seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  bool in_voiced = false;
  double counter = 0.0;
  for (std::size_t t = 0; t < f0.size(); ++t) {
    if (!f0.voiced(t)) {
      in_voiced = false;
      for (std::size_t i = 0; i < shift; ++i) out.samples[t * shift + i] = cfg.noise_gain * gauss(rng);
      continue;
    }
    const double period = sample_rate / f0.hz(t);
    const bool next_voiced = t + 1 < f0.size() && f0.voiced(t + 1);
    const double next_period = next_voiced ? sample_rate / f0.hz(t + 1) : period;
    if (!in_voiced) {
      counter = period;  // first sample of a voiced run carries a pulse
      in_voiced = true;
    }
    for (std::size_t i = 0; i < shift; ++i) {
      const double p = period + (next_period - period) * static_cast<double>(i) / static_cast<double>(shift);
      double x = 0.0;
      if (counter >= p) {
        x = cfg.pulse_gain == PulseGain::unit_energy_per_period ? std::sqrt(p) : 1.0;
        counter -= p;
      }
      counter += 1.0;
      out.samples[t * shift + i] = x;
    }
  }
  return out;
}

std::vector<double> mc_to_mlsa(std::span<const double> mc, double alpha) {
  std::vector<double> b(mc.begin(), mc.end());
  if (b.empty()) return b;
  for (std::size_t m = b.size() - 1; m-- > 0;) b[m] = mc[m] - alpha * b[m + 1];
  return b;
}

MlsaFilter::MlsaFilter(int order, double alpha)
    : order_(order),
      alpha_(alpha),
      d1_(2 * (kPadeOrder + 1), 0.0),
      d2_(static_cast<std::size_t>(kPadeOrder * (order + 2) + kPadeOrder + 1), 0.0) {}

void MlsaFilter::reset() {
  std::fill(d1_.begin(), d1_.end(), 0.0);
  std::fill(d2_.begin(), d2_.end(), 0.0);
}

double MlsaFilter::first_stage(double x, double b1) {
  const double aa = 1.0 - alpha_ * alpha_;
  double* d = d1_.data();
  double* pt = d + kPadeOrder + 1;
  double out = 0.0;
  for (int i = kPadeOrder; i >= 1; --i) {
    d[i] = aa * pt[i - 1] + alpha_ * d[i];
    pt[i] = d[i] * b1;
    const double v = pt[i] * kPade[static_cast<std::size_t>(i)];
    x += (i & 1) ? v : -v;
    out += v;
    if (!(std::abs(d[i]) <= kMlsaStateLimit)) unstable("first stage");
  }
  pt[0] = x;
  out += x;
  return out;
}

double MlsaFilter::fir(double x, std::span<const double> b, std::span<double> d) const {
  const double aa = 1.0 - alpha_ * alpha_;
  const int m = order_;
  d[0] = x;
  d[1] = aa * d[0] + alpha_ * d[1];
  for (int i = 2; i <= m; ++i) d[static_cast<std::size_t>(i)] += alpha_ * (d[static_cast<std::size_t>(i) + 1] - d[static_cast<std::size_t>(i) - 1]);
  double y = 0.0;
  for (int i = 2; i <= m; ++i) y += d[static_cast<std::size_t>(i)] * b[static_cast<std::size_t>(i)];
  for (int i = m + 1; i > 1; --i) d[static_cast<std::size_t>(i)] = d[static_cast<std::size_t>(i) - 1];
  return y;
}

double MlsaFilter::second_stage(double x, std::span<const double> b) {
  const auto stride = static_cast<std::size_t>(order_ + 2);
  double* pt = d2_.data() + kPadeOrder * stride;
  double out = 0.0;
  for (int i = kPadeOrder; i >= 1; --i) {
    std::span<double> line(d2_.data() + static_cast<std::size_t>(i - 1) * stride, stride);
    pt[i] = fir(pt[i - 1], b, line);
    const double v = pt[i] * kPade[static_cast<std::size_t>(i)];
    x += (i & 1) ? v : -v;
    out += v;
    if (!(std::abs(pt[i]) <= kMlsaStateLimit)) unstable("second stage");
  }
  pt[0] = x;
  out += x;
  return out;
}

double MlsaFilter::filter(double x, std::span<const double> b) {
  x *= std::exp(b[0]);
  if (!(std::abs(x) <= kMlsaStateLimit)) unstable("gain stage");
  if (order_ >= 1) x = first_stage(x, b[1]);
  if (order_ >= 2) x = second_stage(x, b);
  if (!(std::abs(x) <= kMlsaStateLimit)) unstable("output");
  return x;
}

Waveform mlsa_filter(const MelCepstrumSequence& mc, const Waveform& excitation) {
  const auto shift = static_cast<std::size_t>(mc.frame_shift);
  const std::size_t frames = mc.size();
  if (excitation.size() != frames * shift) {
    throw Error(ErrorCode::LengthMismatch, "excitation has " + std::to_string(excitation.size()) +
                                               " samples, expected " + std::to_string(frames * shift));
  }
  Waveform out;
  out.sample_rate = excitation.sample_rate;
  out.samples.assign(excitation.size(), 0.0);
  if (frames == 0) return out;

  const auto width = static_cast<std::size_t>(mc.width());
  std::vector<std::vector<double>> b(frames);
  for (std::size_t t = 0; t < frames; ++t) {
    b[t] = mc_to_mlsa(std::span<const double>(mc.frames.row(static_cast<Eigen::Index>(t)).data(), width), mc.alpha);
  }

  MlsaFilter filter(mc.order, mc.alpha);
  std::vector<double> current(width);
  const double centre = (static_cast<double>(shift) - 1.0) / 2.0;
  for (std::size_t n = 0; n < excitation.size(); ++n) {
    const double u = (static_cast<double>(n) - centre) / static_cast<double>(shift);
    const double base = std::floor(u);
    std::size_t t0 = 0;
    double frac = 0.0;
    if (base >= 0.0) {
      t0 = static_cast<std::size_t>(base);
      frac = u - base;
    }
    if (t0 + 1 >= frames) {
      t0 = frames - 1;
      frac = 0.0;
    }
    if (frac == 0.0) {
      current = b[t0];
    } else {
      for (std::size_t m = 0; m < width; ++m) current[m] = (1.0 - frac) * b[t0][m] + frac * b[t0 + 1][m];
    }
    out.samples[n] = filter.filter(excitation.samples[n], current);
  }
  return out;
}

Waveform vocode(const F0Track& f0, const MelCepstrumSequence& mc, int sample_rate, const ExcitationConfig& ex_cfg) {
  if (f0.size() != mc.size()) {
    throw Error(ErrorCode::LengthMismatch, "F0 track and mel-cepstrum differ in frame count");
  }
  if (f0.frame_shift != mc.frame_shift) {
    throw Error(ErrorCode::LengthMismatch, "F0 track and mel-cepstrum differ in frame shift");
  }
  return mlsa_filter(mc, make_excitation(f0, sample_rate, ex_cfg));
}

Waveform resynthesize(const Waveform& wf, const AnalysisConfig& cfg, const ExcitationConfig& ex_cfg) {
  const F0Track f0 = estimate_f0(wf, cfg);
  const MelCepstrumSequence mc = mgc_analysis(wf, cfg);
  return vocode(f0, mc, wf.sample_rate, ex_cfg);
}

}  // namespace hmmse
