#include "hmmse/eval.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <numbers>

#include "hmmse/error.hpp"
#include "json.hpp"

namespace hmmse {
namespace {

const double kMcdScale = 10.0 / std::numbers::ln10;

double frame_distortion(const FrameMatrix& a, Eigen::Index i, const FrameMatrix& b, Eigen::Index j) {
  const Eigen::Index n = a.cols();
  const double sq = (a.row(i).tail(n - 1) - b.row(j).tail(n - 1)).squaredNorm();
  return kMcdScale * std::sqrt(2.0 * sq);
}

void check_orders(const MelCepstrumSequence& a, const MelCepstrumSequence& b) {
  if (a.frames.cols() != b.frames.cols()) {
    throw Error(ErrorCode::LengthMismatch, "mel-cepstra of different orders");
  }
}

std::vector<Eigen::Index> band_bins(const Spectrogram& spec, double lo_hz, double hi_hz) {
  std::vector<Eigen::Index> bins;
  for (std::size_t k = 0; k < spec.bins(); ++k) {
    const double centre = static_cast<double>(k) * spec.bin_hz;
    if (centre >= lo_hz && centre < hi_hz) bins.push_back(static_cast<Eigen::Index>(k));
  }
  if (bins.empty()) {
    throw Error(ErrorCode::EmptyBand, "no bin centre in [" + std::to_string(lo_hz) + ", " + std::to_string(hi_hz) + ")");
  }
  return bins;
}

std::string format_number(double v) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof(buf), static_cast<float>(v));
  return std::string(buf, res.ptr);
}

}  // namespace

double mcd(const MelCepstrumSequence& a, const MelCepstrumSequence& b) {
  check_orders(a, b);
  if (a.size() != b.size()) {
    throw Error(ErrorCode::LengthMismatch,
                "MCD needs equal frame counts, got " + std::to_string(a.size()) + " and " + std::to_string(b.size()));
  }
  if (a.size() == 0) return 0.0;
  double total = 0.0;
  for (Eigen::Index t = 0; t < a.frames.rows(); ++t) total += frame_distortion(a.frames, t, b.frames, t);
  return total / static_cast<double>(a.size());
}

double mcd_dtw(const MelCepstrumSequence& a, const MelCepstrumSequence& b) {
  check_orders(a, b);
  const auto n = a.frames.rows(), m = b.frames.rows();
  if (n == 0 || m == 0) throw Error(ErrorCode::EmptySequence, "DTW needs non-empty sequences");
  constexpr double kInf = std::numeric_limits<double>::infinity();
  // Cumulative cost and path length, steps (1,0), (0,1), (1,1).
  std::vector<double> cost(static_cast<std::size_t>((n + 1) * (m + 1)), kInf);
  std::vector<int> steps(cost.size(), 0);
  auto at = [m](Eigen::Index i, Eigen::Index j) { return static_cast<std::size_t>(i * (m + 1) + j); };
  cost[at(0, 0)] = 0.0;
  for (Eigen::Index i = 1; i <= n; ++i) {
    for (Eigen::Index j = 1; j <= m; ++j) {
      const double d = frame_distortion(a.frames, i - 1, b.frames, j - 1);
      std::size_t from = at(i - 1, j - 1);
      if (cost[at(i - 1, j)] < cost[from]) from = at(i - 1, j);
      if (cost[at(i, j - 1)] < cost[from]) from = at(i, j - 1);
      cost[at(i, j)] = cost[from] + d;
      steps[at(i, j)] = steps[from] + 1;
    }
  }
  return cost[at(n, m)] / steps[at(n, m)];
}

F0Metrics f0_metrics(const F0Track& a, const F0Track& b) {
  if (a.size() != b.size()) {
    throw Error(ErrorCode::LengthMismatch,
                "F0 tracks differ in length: " + std::to_string(a.size()) + " and " + std::to_string(b.size()));
  }
  F0Metrics m;
  if (a.size() == 0) return m;
  double sq = 0.0;
  std::size_t mismatched = 0;
  for (std::size_t t = 0; t < a.size(); ++t) {
    if (a.voiced(t) != b.voiced(t)) ++mismatched;
    if (a.voiced(t) && b.voiced(t)) {
      const double d = a.hz(t) - b.hz(t);
      sq += d * d;
      ++m.both_voiced;
    }
  }
  m.rmse_hz = m.both_voiced ? std::sqrt(sq / static_cast<double>(m.both_voiced)) : 0.0;
  m.vuv_error_pct = 100.0 * static_cast<double>(mismatched) / static_cast<double>(a.size());
  return m;
}

F0Track slice_frames(const F0Track& f0, std::size_t begin, std::size_t count) {
  if (begin + count > f0.size()) throw Error(ErrorCode::LengthMismatch, "slice beyond the end of the F0 track");
  F0Track out;
  out.frame_shift = f0.frame_shift;
  out.log_f0.assign(f0.log_f0.begin() + static_cast<std::ptrdiff_t>(begin),
                    f0.log_f0.begin() + static_cast<std::ptrdiff_t>(begin + count));
  return out;
}

MelCepstrumSequence slice_frames(const MelCepstrumSequence& mc, std::size_t begin, std::size_t count) {
  if (begin + count > mc.size()) throw Error(ErrorCode::LengthMismatch, "slice beyond the end of the mel-cepstrum");
  MelCepstrumSequence out = mc;
  out.frames = mc.frames.middleRows(static_cast<Eigen::Index>(begin), static_cast<Eigen::Index>(count));
  return out;
}

double band_energy(const Spectrogram& spec, double lo_hz, double hi_hz) {
  const auto bins = band_bins(spec, lo_hz, hi_hz);
  if (spec.frames() == 0) throw Error(ErrorCode::EmptyBand, "spectrogram has no frames");
  double total = 0.0;
  for (Eigen::Index t = 0; t < spec.magnitudes_db.rows(); ++t) {
    for (const auto k : bins) total += spec.magnitudes_db(t, k);
  }
  return total / static_cast<double>(spec.frames() * bins.size());
}

double spectral_flux(const Spectrogram& spec, double lo_hz, double hi_hz) {
  const auto bins = band_bins(spec, lo_hz, hi_hz);
  if (spec.frames() < 2) return 0.0;
  double total = 0.0;
  for (Eigen::Index t = 1; t < spec.magnitudes_db.rows(); ++t) {
    double sq = 0.0;
    for (const auto k : bins) {
      const double d = spec.magnitudes_db(t, k) - spec.magnitudes_db(t - 1, k);
      sq += d * d;
    }
    total += std::sqrt(sq / static_cast<double>(bins.size()));
  }
  return total / static_cast<double>(spec.frames() - 1);
}

TriptychReport triptych(const Spectrogram& spec) {
  TriptychReport r;
  r.low_band = {0.0, 100.0, band_energy(spec, 0.0, 100.0)};
  r.flux_db = spectral_flux(spec, 0.0, 1000.0);
  for (const auto& [lo, hi] : {std::pair{2375.0, 2625.0}, std::pair{3000.0, 3500.0}}) {
    r.formant_bands.push_back({lo, hi, band_energy(spec, lo, hi)});
  }
  return r;
}

std::vector<std::size_t> detect_spikes(const Waveform& wf, std::size_t window, double k) {
  if (window < 16) throw Error(ErrorCode::ConfigError, "spike window must be at least 16 samples");
  const std::size_t n = wf.size();
  std::vector<double> prefix(n + 1, 0.0);
  for (std::size_t i = 0; i < n; ++i) prefix[i + 1] = prefix[i] + wf.samples[i] * wf.samples[i];
  const std::size_t half = window / 2;
  const double others = static_cast<double>(2 * half);

  std::vector<std::size_t> events;
  std::size_t last_hit = 0;
  bool open = false;
  for (std::size_t i = 0; i < n; ++i) {
    const double x = std::abs(wf.samples[i]);
    if (x == 0.0) continue;
    const std::size_t lo = i >= half ? i - half : 0;
    const std::size_t hi = std::min(n, i + half + 1);
    const double energy = std::max(0.0, prefix[hi] - prefix[lo] - x * x);
    const double local = std::sqrt(energy / others);
    if (!(x > k * local)) continue;
    if (open && i - last_hit < half) {
      if (x > std::abs(wf.samples[events.back()])) events.back() = i;
    } else {
      events.push_back(i);
      open = true;
    }
    last_hit = i;
  }
  return events;
}

std::vector<unsigned char> spectrogram_pixels(const Spectrogram& spec) {
  const auto frames = spec.magnitudes_db.rows();
  const auto bins = spec.magnitudes_db.cols();
  std::vector<unsigned char> pixels(static_cast<std::size_t>(frames * bins), 0);
  if (pixels.empty()) return pixels;
  const double top = spec.magnitudes_db.maxCoeff();
  const double range = top - spec.floor_db;
  for (Eigen::Index k = 0; k < bins; ++k) {
    const Eigen::Index row = bins - 1 - k;
    for (Eigen::Index t = 0; t < frames; ++t) {
      double level = 0.0;
      if (range > 0.0) level = std::clamp((spec.magnitudes_db(t, k) - spec.floor_db) / range, 0.0, 1.0) * 255.0;
      pixels[static_cast<std::size_t>(row * frames + t)] = static_cast<unsigned char>(std::floor(level + 0.5));
    }
  }
  return pixels;
}

void export_spectrogram(const Spectrogram& spec, const std::filesystem::path& path) {
  auto csv_path = path;
  csv_path.replace_extension(".csv");
  auto pgm_path = path;
  pgm_path.replace_extension(".pgm");

  std::ofstream csv(csv_path);
  if (!csv) throw Error(ErrorCode::IoError, "cannot open " + csv_path.string());
  for (Eigen::Index t = 0; t < spec.magnitudes_db.rows(); ++t) {
    for (Eigen::Index k = 0; k < spec.magnitudes_db.cols(); ++k) {
      if (k) csv << ',';
      csv << format_number(spec.magnitudes_db(t, k));
    }
    csv << '\n';
  }
  if (!csv) throw Error(ErrorCode::IoError, "failed writing " + csv_path.string());

  std::ofstream pgm(pgm_path, std::ios::binary);
  if (!pgm) throw Error(ErrorCode::IoError, "cannot open " + pgm_path.string());
  pgm << "P5\n" << spec.magnitudes_db.rows() << ' ' << spec.magnitudes_db.cols() << "\n255\n";
  const auto pixels = spectrogram_pixels(spec);
  pgm.write(reinterpret_cast<const char*>(pixels.data()), static_cast<std::streamsize>(pixels.size()));
  if (!pgm) throw Error(ErrorCode::IoError, "failed writing " + pgm_path.string());
}

double schroeder_rt60(std::span<const double> impulse_response, int sample_rate) {
  const std::size_t n = impulse_response.size();
  std::vector<double> edc(n);
  double acc = 0.0;
  for (std::size_t i = n; i-- > 0;) {
    acc += impulse_response[i] * impulse_response[i];
    edc[i] = acc;
  }
  if (acc == 0.0) throw Error(ErrorCode::SilentSignal, "impulse response is silent");
  double sx = 0.0, sy = 0.0, sxx = 0.0, sxy = 0.0, count = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double db = 10.0 * std::log10(edc[i] / edc[0]);
    if (db > -5.0) continue;
    if (db < -25.0) break;
    const double x = static_cast<double>(i) / sample_rate;
    sx += x;
    sy += db;
    sxx += x * x;
    sxy += x * db;
    count += 1.0;
  }
  if (count < 2.0) throw Error(ErrorCode::TooShort, "impulse response too short for a decay fit");
  const double slope = (count * sxy - sx * sy) / (count * sxx - sx * sx);
  return -60.0 / slope;
}

std::string format_metric_report(const MetricReport& report) {
  nlohmann::json bands = nlohmann::json::array();
  for (const auto& b : report.band_energies) bands.push_back({{"lo_hz", b.lo_hz}, {"hi_hz", b.hi_hz}, {"db", b.db}});
  nlohmann::json doc{{"mcd_db", report.mcd_db},
                     {"f0_rmse_hz", report.f0.rmse_hz},
                     {"vuv_error_pct", report.f0.vuv_error_pct},
                     {"both_voiced_frames", report.f0.both_voiced},
                     {"band_energies_db", std::move(bands)},
                     {"spikes", report.spikes}};
  return doc.dump(2) + "\n";
}

}  // namespace hmmse
