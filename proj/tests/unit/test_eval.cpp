#include <gtest/gtest.h>

#include <cmath>
#include <fstream>
#include <numbers>
#include <random>
#include <sstream>

#include "hmmse/eval.hpp"
#include "support.hpp"

namespace hmmse {
namespace {

using testing::error_code;

const double kMcdScale = 10.0 / std::numbers::ln10;

MelCepstrumSequence random_mc(std::size_t frames, int order, std::mt19937_64& rng) {
  std::normal_distribution<double> normal(0.0, 0.5);
  MelCepstrumSequence mc;
  mc.order = order;
  mc.frames = FrameMatrix::NullaryExpr(static_cast<Eigen::Index>(frames), order + 1, [&] { return normal(rng); });
  return mc;
}

F0Track track(std::vector<std::optional<double>> hz) {
  F0Track f0;
  for (const auto& v : hz) f0.log_f0.push_back(v ? std::optional(std::log(*v)) : std::nullopt);
  return f0;
}

Spectrogram flat_spectrogram(std::size_t frames, double db) {
  Spectrogram s;
  s.magnitudes_db = FrameMatrix::Constant(static_cast<Eigen::Index>(frames), 257, db);
  s.bin_hz = 16000.0 / 512.0;
  s.frame_shift = 80;
  return s;
}

TEST(Mcd, IdenticalIsZero) {
  std::mt19937_64 rng(1);
  const auto a = random_mc(20, 24, rng);
  EXPECT_EQ(mcd(a, a), 0.0);
}

TEST(Mcd, ClosedFormSingleDimension) {
  MelCepstrumSequence a, b;
  a.order = b.order = 3;
  a.frames = FrameMatrix::Zero(1, 4);
  b.frames = a.frames;
  b.frames(0, 2) = 0.3;
  EXPECT_NEAR(mcd(a, b), kMcdScale * std::sqrt(2.0) * 0.3, 1e-12);
  b.frames(0, 2) = 0.6;
  EXPECT_NEAR(mcd(a, b), 2.0 * kMcdScale * std::sqrt(2.0) * 0.3, 1e-12);
  // c(0) does not count.
  b.frames(0, 0) = 5.0;
  EXPECT_NEAR(mcd(a, b), 2.0 * kMcdScale * std::sqrt(2.0) * 0.3, 1e-12);
}

TEST(Mcd, Pseudometric) {
  std::mt19937_64 rng(2);
  for (int trial = 0; trial < 50; ++trial) {
    const auto a = random_mc(10, 6, rng);
    const auto b = random_mc(10, 6, rng);
    const auto c = random_mc(10, 6, rng);
    EXPECT_NEAR(mcd(a, b), mcd(b, a), 1e-12);
    EXPECT_LE(mcd(a, c), mcd(a, b) + mcd(b, c) + 1e-9);
  }
}

TEST(Mcd, LengthMismatch) {
  std::mt19937_64 rng(3);
  EXPECT_EQ(error_code([&] { mcd(random_mc(10, 4, rng), random_mc(11, 4, rng)); }), ErrorCode::LengthMismatch);
  EXPECT_EQ(error_code([&] { mcd(random_mc(10, 4, rng), random_mc(10, 5, rng)); }), ErrorCode::LengthMismatch);
}

TEST(Mcd, DtwAbsorbsTimeStretch) {
  std::mt19937_64 rng(4);
  const auto a = random_mc(15, 8, rng);
  MelCepstrumSequence stretched = a;
  stretched.frames.resize(30, 9);
  for (Eigen::Index t = 0; t < 30; ++t) stretched.frames.row(t) = a.frames.row(t / 2);
  EXPECT_NEAR(mcd_dtw(a, stretched), 0.0, 1e-12);
  const auto b = random_mc(15, 8, rng);
  EXPECT_LE(mcd_dtw(a, b), mcd(a, b) + 1e-12);
}

TEST(F0, IdenticalTracks) {
  const F0Track a = track({100.0, std::nullopt, 120.0, 130.0});
  const F0Metrics m = f0_metrics(a, a);
  EXPECT_NEAR(m.rmse_hz, 0.0, 1e-12);
  EXPECT_EQ(m.vuv_error_pct, 0.0);
  EXPECT_EQ(m.both_voiced, 3u);
}

TEST(F0, OneFlippedFlagOfTen) {
  std::vector<std::optional<double>> hz(10, 150.0);
  const F0Track a = track(hz);
  hz[4].reset();
  const F0Metrics m = f0_metrics(a, track(hz));
  EXPECT_DOUBLE_EQ(m.vuv_error_pct, 10.0);
  EXPECT_EQ(m.both_voiced, 9u);
}

TEST(F0, ConstantOffset) {
  std::vector<std::optional<double>> a, b;
  for (int i = 0; i < 20; ++i) {
    a.push_back(100.0 + i);
    b.push_back(101.0 + i);
  }
  EXPECT_NEAR(f0_metrics(track(a), track(b)).rmse_hz, 1.0, 1e-9);
  EXPECT_EQ(error_code([&] { f0_metrics(track(a), track({100.0})); }), ErrorCode::LengthMismatch);
}

TEST(F0, Slicing) {
  const F0Track a = track({100.0, 110.0, 120.0, std::nullopt});
  const F0Track s = slice_frames(a, 1, 2);
  ASSERT_EQ(s.size(), 2u);
  EXPECT_NEAR(std::exp(*s.log_f0[0]), 110.0, 1e-9);
  EXPECT_THROW(slice_frames(a, 3, 2), Error);
}

TEST(Bands, FlatSpectrogram) {
  EXPECT_DOUBLE_EQ(band_energy(flat_spectrogram(5, -100.0), 2375.0, 2625.0), -100.0);
}

TEST(Bands, EmptyBand) {
  const Spectrogram s = flat_spectrogram(5, -40.0);
  EXPECT_EQ(error_code([&] { band_energy(s, 1.0, 10.0); }), ErrorCode::EmptyBand);
  EXPECT_EQ(error_code([&] { band_energy(s, 500.0, 400.0); }), ErrorCode::EmptyBand);
}

TEST(Bands, GainShiftsEnergy) {
  const Waveform wf = testing::white_noise(8000, 5, 0.1);
  Waveform louder = wf;
  for (auto& v : louder.samples) v *= 2.0;
  const Spectrogram a = spectrogram(wf, {}, 512);
  const Spectrogram b = spectrogram(louder, {}, 512);
  EXPECT_NEAR(band_energy(b, 3000.0, 3500.0) - band_energy(a, 3000.0, 3500.0), 20.0 * std::log10(2.0), 1e-9);
}

TEST(Bands, BinCentresInHalfOpenRange) {
  Spectrogram s = flat_spectrogram(2, -80.0);
  s.magnitudes_db.col(2).setConstant(-20.0);  // 62.5 Hz
  EXPECT_DOUBLE_EQ(band_energy(s, 62.5, 93.75), -20.0);
  EXPECT_DOUBLE_EQ(band_energy(s, 31.25, 62.5), -80.0);
}

TEST(Triptych, ReportsTheThreeDiagnostics) {
  const Spectrogram s = flat_spectrogram(10, -60.0);
  const TriptychReport r = triptych(s);
  EXPECT_DOUBLE_EQ(r.low_band.db, -60.0);
  EXPECT_EQ(r.low_band.hi_hz, 100.0);
  EXPECT_DOUBLE_EQ(r.flux_db, 0.0);
  ASSERT_EQ(r.formant_bands.size(), 2u);
  EXPECT_EQ(r.formant_bands[0].lo_hz, 2375.0);
  EXPECT_EQ(r.formant_bands[1].hi_hz, 3500.0);
}

TEST(Spikes, CleanSineHasNone) {
  EXPECT_TRUE(detect_spikes(testing::sine(440.0, 1.0)).empty());
  EXPECT_TRUE(detect_spikes(testing::constant(0.0, 4000)).empty());
}

TEST(Spikes, SingleConstructedSpike) {
  // RMS 0.1, so a full-scale sample stands 10 RMS above its neighbourhood.
  Waveform wf = testing::sine(440.0, 1.0, 16000, 0.1 * std::numbers::sqrt2);
  wf.samples[5000] = 1.0;
  const auto events = detect_spikes(wf);
  ASSERT_EQ(events.size(), 1u);
  EXPECT_NEAR(static_cast<double>(events[0]), 5000.0, kDefaultSpikeWindow / 2.0);
}

TEST(Spikes, ShiftEquivariant) {
  Waveform wf = testing::white_noise(6000, 7, 0.05);
  for (const std::size_t i : {700u, 2500u, 2530u, 5100u}) wf.samples[i] = 0.9;
  const auto events = detect_spikes(wf);
  ASSERT_FALSE(events.empty());
  Waveform delayed = wf;
  delayed.samples.insert(delayed.samples.begin(), 333, 0.0);
  const auto shifted = detect_spikes(delayed);
  ASSERT_EQ(shifted.size(), events.size());
  for (std::size_t i = 0; i < events.size(); ++i) EXPECT_EQ(shifted[i], events[i] + 333);
}

TEST(Spikes, SmallWindowRejected) {
  EXPECT_EQ(error_code([] { detect_spikes(testing::constant(0.0, 100), 8); }), ErrorCode::ConfigError);
}

TEST(Export, PixelMapping) {
  // Displayed image {-100, -50; 0, -100}: top row is the upper bin.
  Spectrogram s;
  s.floor_db = -100.0;
  s.magnitudes_db.resize(2, 2);
  s.magnitudes_db(0, 1) = -100.0;
  s.magnitudes_db(1, 1) = -50.0;
  s.magnitudes_db(0, 0) = 0.0;
  s.magnitudes_db(1, 0) = -100.0;
  EXPECT_EQ(spectrogram_pixels(s), (std::vector<unsigned char>{0, 128, 255, 0}));
}

TEST(Export, CsvAndPgmFiles) {
  testing::TempDir dir;
  const Spectrogram s = spectrogram(testing::sine(1000.0, 0.2), {}, 512);
  export_spectrogram(s, dir / "spec");
  std::ifstream csv(dir / "spec.csv");
  std::string line;
  Eigen::Index t = 0;
  while (std::getline(csv, line)) {
    std::stringstream row(line);
    std::string cell;
    Eigen::Index k = 0;
    while (std::getline(row, cell, ',')) {
      const double v = std::stod(cell);
      ASSERT_NEAR(v, s.magnitudes_db(t, k), 1e-6 * (1.0 + std::abs(v)));
      ++k;
    }
    EXPECT_EQ(k, s.magnitudes_db.cols());
    ++t;
  }
  EXPECT_EQ(t, s.magnitudes_db.rows());

  const auto bytes = testing::read_bytes(dir / "spec.pgm");
  const std::string header = "P5\n" + std::to_string(s.frames()) + " " + std::to_string(s.bins()) + "\n255\n";
  ASSERT_GE(bytes.size(), header.size());
  EXPECT_EQ(std::string(bytes.begin(), bytes.begin() + static_cast<std::ptrdiff_t>(header.size())), header);
  EXPECT_EQ(bytes.size(), header.size() + s.frames() * s.bins());
}

TEST(Export, EmptySpectrogram) {
  testing::TempDir dir;
  Spectrogram s;
  export_spectrogram(s, dir / "empty.pgm");
  const auto bytes = testing::read_bytes(dir / "empty.pgm");
  EXPECT_EQ(std::string(bytes.begin(), bytes.end()), "P5\n0 0\n255\n");
  EXPECT_EQ(error_code([&] { export_spectrogram(s, dir / "missing" / "x.pgm"); }), ErrorCode::IoError);
}

TEST(Rt60, ExponentialDecay) {
  const int sr = 16000;
  const double rt60 = 0.45;
  std::vector<double> ir(static_cast<std::size_t>(sr));
  for (std::size_t n = 0; n < ir.size(); ++n) {
    ir[n] = std::pow(10.0, -3.0 * static_cast<double>(n) / (rt60 * sr));
  }
  EXPECT_NEAR(schroeder_rt60(ir, sr), rt60, 0.01 * rt60);
}

TEST(Report, ContainsEveryField) {
  MetricReport r;
  r.mcd_db = 1.5;
  r.f0.rmse_hz = 2.0;
  r.band_energies.push_back({3000.0, 3500.0, -42.0});
  r.spikes = {17};
  const std::string text = format_metric_report(r);
  for (const char* key : {"mcd_db", "f0_rmse_hz", "vuv_error_pct", "band_energies_db", "spikes"}) {
    EXPECT_NE(text.find(key), std::string::npos) << key;
  }
}

}  // namespace
}  // namespace hmmse
