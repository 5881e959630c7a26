#include "hmmse/analysis.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <complex>
#include <limits>
#include <numbers>

#include "hmmse/error.hpp"
#include "hmmse/spectral.hpp"

namespace hmmse {
namespace {

constexpr double kPowerFloor = 1e-30;
constexpr int kSpectralTapers = 2;
constexpr int kWhiteningOrder = 12;
constexpr int kSmoothingHalfWidth = 3;
// Residual periodicity needed on top of the vuv threshold; rejects frames
// whose window only grazes a voiced region.
constexpr double kResidualVoicing = 0.5;
constexpr double kHalfLagRatio = 0.9;
constexpr std::size_t kMinVoicedRun = 3;

double median_of(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 == 1 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

// Normalised autocorrelation of a mean-removed segment for lags
// [0, r.size()): r(lag) = sum x[i] x[i+lag] / sqrt(sum x[i]^2 * sum x[i+lag]^2)
// over the overlapping part.
class Autocorrelator {
 public:
  // Linear (not circular) correlation for lags below `lags`.
  Autocorrelator(int max_length, int lags) : fft_(next_power_of_two(max_length + lags)) {}

  void compute(std::span<const double> x, std::vector<double>& r) {
    fft_.forward(x, spectrum_);
    for (auto& c : spectrum_) c = std::norm(c);
    fft_.inverse(spectrum_, raw_);
    energy_.assign(x.size() + 1, 0.0);
    for (std::size_t i = 0; i < x.size(); ++i) energy_[i + 1] = energy_[i] + x[i] * x[i];
    const std::size_t n = x.size();
    for (std::size_t lag = 0; lag < r.size(); ++lag) {
      if (lag >= n) {
        r[lag] = 0.0;
        continue;
      }
      const double head = energy_[n - lag];
      const double tail = energy_[n] - energy_[lag];
      const double denom = std::sqrt(head * tail);
      r[lag] = denom > 0.0 ? raw_[lag] / denom : 0.0;
    }
  }

 private:
  RealFft fft_;
  std::vector<std::complex<double>> spectrum_;
  std::vector<double> raw_;
  std::vector<double> energy_;
};

// Replaces x by its order-p linear-prediction residual (Hamming-windowed
// autocorrelation, Levinson-Durbin). The first p samples are dropped.
void prewhiten(std::vector<double>& x, int p) {
  const std::size_t n = x.size();
  if (n <= static_cast<std::size_t>(2 * p)) return;
  std::vector<double> w(n);
  for (std::size_t i = 0; i < n; ++i) {
    w[i] = x[i] * (0.54 - 0.46 * std::cos(2.0 * std::numbers::pi * static_cast<double>(i) / static_cast<double>(n - 1)));
  }
  std::vector<double> ac(static_cast<std::size_t>(p) + 1, 0.0);
  for (int k = 0; k <= p; ++k) {
    for (std::size_t i = static_cast<std::size_t>(k); i < n; ++i) ac[static_cast<std::size_t>(k)] += w[i] * w[i - k];
  }
  if (!(ac[0] > 0.0)) return;
  ac[0] *= 1.0 + 1e-9;
  std::vector<double> a(static_cast<std::size_t>(p) + 1, 0.0), prev;
  a[0] = 1.0;
  double err = ac[0];
  for (int i = 1; i <= p; ++i) {
    double acc = ac[static_cast<std::size_t>(i)];
    for (int j = 1; j < i; ++j) acc += a[static_cast<std::size_t>(j)] * ac[static_cast<std::size_t>(i - j)];
    const double k = -acc / err;
    prev = a;
    for (int j = 1; j < i; ++j) a[static_cast<std::size_t>(j)] += k * prev[static_cast<std::size_t>(i - j)];
    a[static_cast<std::size_t>(i)] = k;
    err *= 1.0 - k * k;
    if (!(err > 0.0)) break;
  }
  std::vector<double> e(n - static_cast<std::size_t>(p));
  for (std::size_t i = static_cast<std::size_t>(p); i < n; ++i) {
    double acc = 0.0;
    for (int j = 0; j <= p; ++j) acc += a[static_cast<std::size_t>(j)] * x[i - static_cast<std::size_t>(j)];
    e[i - static_cast<std::size_t>(p)] = acc;
  }
  x = std::move(e);
}

// Triangular moving average of half-width h; drops h samples at each end.
void smooth(std::vector<double>& x, int h) {
  if (h <= 0 || x.size() <= static_cast<std::size_t>(2 * h + 1)) return;
  std::vector<double> out(x.size() - 2 * static_cast<std::size_t>(h), 0.0);
  const double norm = static_cast<double>((h + 1) * (h + 1));
  for (std::size_t i = 0; i < out.size(); ++i) {
    double acc = 0.0;
    for (int k = -h; k <= h; ++k) acc += (h + 1 - std::abs(k)) * x[i + static_cast<std::size_t>(h + k)];
    out[i] = acc / norm;
  }
  x = std::move(out);
}

}  // namespace

void validate(const AnalysisConfig& cfg, int sample_rate) {
  validate(cfg.frame);
  if (sample_rate <= 0) throw Error(ErrorCode::ConfigError, "sample rate must be positive");
  if (!(cfg.f0_min > 0.0) || !(cfg.f0_min < cfg.f0_max) || !(cfg.f0_max < sample_rate / 2.0)) {
    throw Error(ErrorCode::ConfigError, "require 0 < f0_min < f0_max < sample_rate/2");
  }
  if (!(cfg.vuv_threshold > 0.0 && cfg.vuv_threshold < 1.0)) {
    throw Error(ErrorCode::ConfigError, "vuv_threshold must lie in (0, 1)");
  }
  if (!(cfg.alpha > -1.0 && cfg.alpha < 1.0)) throw Error(ErrorCode::ConfigError, "alpha must lie in (-1, 1)");
  if (cfg.order < 1) throw Error(ErrorCode::ConfigError, "cepstral order must be >= 1");
  if (!is_power_of_two(cfg.fft_size) || cfg.fft_size < cfg.frame.frame_length) {
    throw Error(ErrorCode::ConfigError, "fft_size must be a power of two >= frame_length");
  }
  if (cfg.order >= cfg.fft_size / 2) throw Error(ErrorCode::ConfigError, "cepstral order too large for fft_size");
  if (cfg.median_width < 1 || cfg.median_width % 2 == 0) {
    throw Error(ErrorCode::ConfigError, "median width must be a positive odd number");
  }
  const double max_lag = sample_rate / cfg.f0_min;
  if (max_lag + 1.0 >= cfg.frame.frame_length) {
    throw Error(ErrorCode::ConfigError, "frame too short for f0_min");
  }
}

F0Track estimate_f0(const Waveform& wf, const AnalysisConfig& cfg) {
  validate(cfg, wf.sample_rate);
  const double sr = wf.sample_rate;
  const int min_lag = std::max(2, static_cast<int>(std::floor(sr / cfg.f0_max)));
  const int max_lag = static_cast<int>(std::ceil(sr / cfg.f0_min));
  const std::size_t count = frame_count(wf.size(), cfg.frame);
  const auto len = static_cast<std::size_t>(cfg.frame.frame_length);

  F0Track track;
  track.frame_shift = cfg.frame.frame_shift;
  track.log_f0.resize(count);

  // Pitch uses its own window of at least two maximum periods, centred on
  // the analysis frame, so long lags still overlap over a full period.
  const std::size_t span = std::max(len, 2 * static_cast<std::size_t>(max_lag) + 2);
  Autocorrelator acf(static_cast<int>(span), max_lag + 2);
  std::vector<double> segment, residual;
  // r is indexed by lag; entries min_lag - 1 and max_lag + 1 feed interpolation.
  std::vector<double> r(static_cast<std::size_t>(max_lag) + 2, 0.0);
  const auto peak_in_range = [&] {
    double best = 0.0;
    for (int lag = min_lag; lag <= max_lag; ++lag) best = std::max(best, r[static_cast<std::size_t>(lag)]);
    return best;
  };
  const auto local_max = [&](int lag) {
    const auto i = static_cast<std::size_t>(lag);
    return r[i] >= r[i - 1] && r[i] >= r[i + 1];
  };

  for (std::size_t t = 0; t < count; ++t) {
    const std::size_t centre = t * static_cast<std::size_t>(cfg.frame.frame_shift) + len / 2;
    const std::size_t begin = centre >= span / 2 ? centre - span / 2 : 0;
    const std::size_t end = std::min(wf.size(), begin + span);
    segment.assign(wf.samples.begin() + static_cast<std::ptrdiff_t>(begin),
                   wf.samples.begin() + static_cast<std::ptrdiff_t>(end));
    double mean = 0.0;
    for (const double v : segment) mean += v;
    mean /= static_cast<double>(segment.size());
    for (auto& v : segment) v -= mean;

    acf.compute(segment, r);
    if (!(peak_in_range() > cfg.vuv_threshold)) continue;

    // Lag search on the smoothed prediction residual, where formants no
    // longer compete with the period.
    residual = segment;
    prewhiten(residual, kWhiteningOrder);
    smooth(residual, kSmoothingHalfWidth);
    acf.compute(residual, r);
    if (!(peak_in_range() > kResidualVoicing)) continue;

    int chosen = -1;
    for (int lag = min_lag; lag <= max_lag; ++lag) {
      if (local_max(lag) && (chosen < 0 || r[static_cast<std::size_t>(lag)] > r[static_cast<std::size_t>(chosen)])) {
        chosen = lag;
      }
    }
    if (chosen < 0) continue;
    // Move to half the lag while that is nearly as periodic.
    while (chosen / 2 >= min_lag) {
      int best_half = -1;
      for (int lag = std::max(min_lag, chosen / 2 - 2); lag <= std::min(max_lag, chosen / 2 + 2); ++lag) {
        if (local_max(lag) && (best_half < 0 || r[static_cast<std::size_t>(lag)] > r[static_cast<std::size_t>(best_half)])) {
          best_half = lag;
        }
      }
      if (best_half < 0 || r[static_cast<std::size_t>(best_half)] < kHalfLagRatio * r[static_cast<std::size_t>(chosen)]) {
        break;
      }
      chosen = best_half;
    }

    const double rm = r[static_cast<std::size_t>(chosen) - 1];
    const double r0 = r[static_cast<std::size_t>(chosen)];
    const double rp = r[static_cast<std::size_t>(chosen) + 1];
    const double curvature = rm - 2.0 * r0 + rp;
    double offset = curvature < 0.0 ? 0.5 * (rm - rp) / curvature : 0.0;
    offset = std::clamp(offset, -0.5, 0.5);
    const double f0 = std::clamp(sr / (chosen + offset), cfg.f0_min, cfg.f0_max);
    track.log_f0[t] = std::log(f0);
  }

  for (std::size_t t = 0; t < count;) {
    if (!track.log_f0[t]) {
      ++t;
      continue;
    }
    std::size_t e = t;
    while (e < count && track.log_f0[e]) ++e;
    if (e - t < kMinVoicedRun) {
      for (std::size_t k = t; k < e; ++k) track.log_f0[k].reset();
    }
    t = e;
  }

  if (cfg.median_width > 1) {
    const auto half = static_cast<std::ptrdiff_t>(cfg.median_width / 2);
    std::vector<std::optional<double>> smoothed = track.log_f0;
    std::vector<double> window;
    for (std::ptrdiff_t t = 0; t < static_cast<std::ptrdiff_t>(count); ++t) {
      if (!track.log_f0[static_cast<std::size_t>(t)]) continue;
      window.clear();
      for (std::ptrdiff_t k = t - half; k <= t + half; ++k) {
        if (k < 0 || k >= static_cast<std::ptrdiff_t>(count)) continue;
        if (const auto& v = track.log_f0[static_cast<std::size_t>(k)]) window.push_back(*v);
      }
      smoothed[static_cast<std::size_t>(t)] = median_of(window);
    }
    track.log_f0 = std::move(smoothed);
  }
  return track;
}

double warp_frequency(double omega, double alpha) {
  return omega + 2.0 * std::atan(alpha * std::sin(omega) / (1.0 - alpha * std::cos(omega)));
}

struct MelCepstrumFitter::Impl {
  Eigen::MatrixXd weighted_basis;  // (order+1) x bins, rows = W B^T / sum(w)
  Eigen::LDLT<Eigen::MatrixXd> gram;
};

MelCepstrumFitter::MelCepstrumFitter(int order, double alpha, int fft_size, double ridge)
    : order_(order), alpha_(alpha), fft_size_(fft_size), impl_(std::make_unique<Impl>()) {
  if (order < 0 || order >= fft_size / 2) throw Error(ErrorCode::ConfigError, "cepstral order out of range");
  if (!(alpha > -1.0 && alpha < 1.0)) throw Error(ErrorCode::ConfigError, "alpha must lie in (-1, 1)");
  const int bins = fft_size / 2 + 1;
  Eigen::MatrixXd basis(bins, order + 1);
  Eigen::VectorXd weight(bins);
  for (int k = 0; k < bins; ++k) {
    const double omega = std::numbers::pi * k / (bins - 1);
    const double warped = warp_frequency(omega, alpha);
    // Trapezoid rule on the linear grid times the warping Jacobian, so the
    // fit is uniform along the warped axis.
    const double jacobian = (1.0 - alpha * alpha) / (1.0 - 2.0 * alpha * std::cos(omega) + alpha * alpha);
    weight(k) = (k == 0 || k == bins - 1 ? 0.5 : 1.0) * jacobian;
    for (int m = 0; m <= order; ++m) basis(k, m) = std::cos(m * warped);
  }
  weight /= weight.sum();
  impl_->weighted_basis = basis.transpose() * weight.asDiagonal();
  Eigen::MatrixXd g = impl_->weighted_basis * basis;
  g.diagonal().array() += ridge;
  impl_->gram.compute(g);
}

MelCepstrumFitter::~MelCepstrumFitter() = default;
MelCepstrumFitter::MelCepstrumFitter(MelCepstrumFitter&&) noexcept = default;
MelCepstrumFitter& MelCepstrumFitter::operator=(MelCepstrumFitter&&) noexcept = default;

Vector MelCepstrumFitter::fit(std::span<const double> log_magnitude) const {
  const auto bins = impl_->weighted_basis.cols();
  if (static_cast<Eigen::Index>(log_magnitude.size()) != bins) {
    throw Error(ErrorCode::DimensionMismatch, "log spectrum has wrong number of bins");
  }
  const Eigen::Map<const Eigen::VectorXd> l(log_magnitude.data(), bins);
  return impl_->gram.solve(impl_->weighted_basis * l);
}

MelCepstrumSequence mgc_analysis(const Waveform& wf, const AnalysisConfig& cfg) {
  validate(cfg, wf.sample_rate);
  FrameConfig raw_cfg = cfg.frame;
  raw_cfg.window = WindowKind::rectangular;
  const FrameMatrix frames = frame_signal(wf, raw_cfg);
  if (frames.rows() == 0) throw Error(ErrorCode::EmptySignal, "signal shorter than one analysis frame");

  // Unit-energy sine tapers; their average periodogram has far less
  // variance on noise-excited frames than a single windowed one.
  const int n = cfg.frame.frame_length;
  std::vector<std::vector<double>> tapers(kSpectralTapers, std::vector<double>(static_cast<std::size_t>(n)));
  for (int k = 0; k < kSpectralTapers; ++k) {
    for (int i = 0; i < n; ++i) {
      tapers[static_cast<std::size_t>(k)][static_cast<std::size_t>(i)] =
          std::sqrt(2.0 / (n + 1)) * std::sin(std::numbers::pi * (k + 1) * (i + 1) / (n + 1));
    }
  }

  MelCepstrumFitter fitter(cfg.order, cfg.alpha, cfg.fft_size);
  RealFft fft(cfg.fft_size);
  MelCepstrumSequence out;
  out.order = cfg.order;
  out.alpha = cfg.alpha;
  out.frame_shift = cfg.frame.frame_shift;
  out.frames.resize(frames.rows(), cfg.order + 1);

  std::vector<double> power(static_cast<std::size_t>(fft.bins())), single;
  std::vector<double> tapered(static_cast<std::size_t>(n));
  std::vector<double> log_mag(static_cast<std::size_t>(fft.bins()));
  for (Eigen::Index t = 0; t < frames.rows(); ++t) {
    std::fill(power.begin(), power.end(), 0.0);
    for (const auto& taper : tapers) {
      for (int i = 0; i < n; ++i) tapered[static_cast<std::size_t>(i)] = frames(t, i) * taper[static_cast<std::size_t>(i)];
      fft.power(tapered, single);
      for (std::size_t k = 0; k < power.size(); ++k) power[k] += single[k];
    }
    for (std::size_t k = 0; k < power.size(); ++k) {
      log_mag[k] = 0.5 * std::log(power[k] / kSpectralTapers + kPowerFloor);
    }
    out.frames.row(t) = fitter.fit(log_mag).transpose();
  }
  return out;
}

std::vector<double> mc_to_envelope(std::span<const double> coefficients, double alpha, int fft_size) {
  const int bins = fft_size / 2 + 1;
  std::vector<double> env(static_cast<std::size_t>(bins));
  const double to_db = 20.0 / std::numbers::ln10;
  for (int k = 0; k < bins; ++k) {
    const double warped = warp_frequency(std::numbers::pi * k / (bins - 1), alpha);
    double acc = 0.0;
    for (std::size_t m = 0; m < coefficients.size(); ++m) acc += coefficients[m] * std::cos(static_cast<double>(m) * warped);
    env[static_cast<std::size_t>(k)] = to_db * acc;
  }
  return env;
}

int synthesis_lag_frames(const FrameConfig& cfg) {
  return static_cast<int>(std::lround(static_cast<double>(cfg.frame_length - cfg.frame_shift) /
                                      (2.0 * cfg.frame_shift)));
}

}  // namespace hmmse
