#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "hmmse/align.hpp"
#include "support.hpp"

namespace hmmse {
namespace {

using testing::error_code;

VoiceModel model_for(const std::vector<std::string>& phones, std::uint64_t seed, double duration_mean = 5.0) {
  testing::RandomModelSpec spec;
  spec.phones = phones;
  spec.seed = seed;
  spec.order = 1;
  spec.duration_mean = duration_mean;
  return testing::random_model(spec);
}

// Random features (not drawn from the model) so that the optimum is not obvious.
Observations random_observations(std::size_t frames, Eigen::Index dim, std::mt19937_64& rng) {
  std::normal_distribution<double> normal(0.0, 4.0);
  std::bernoulli_distribution voiced(0.7);
  Observations obs;
  obs.spectral = FrameMatrix::NullaryExpr(static_cast<Eigen::Index>(frames), dim, [&] { return normal(rng); });
  obs.pitch = FrameMatrix::Zero(static_cast<Eigen::Index>(frames), kPitchWidth);
  obs.voiced.resize(frames);
  for (std::size_t t = 0; t < frames; ++t) {
    obs.voiced[t] = voiced(rng);
    if (obs.voiced[t]) obs.pitch.row(static_cast<Eigen::Index>(t)) << 4.8 + 0.1 * normal(rng), 0.01 * normal(rng), 0.0;
  }
  return obs;
}

TEST(Align, FiveStatesFiveFrames) {
  const VoiceModel m = model_for({"aa"}, 1);
  std::mt19937_64 rng(1);
  const auto labels = testing::untimed({"aa"});
  const AlignmentResult r = viterbi_align(m, labels, random_observations(5, m.spectral_dim(), rng));
  ASSERT_EQ(r.phones.size(), 1u);
  for (int j = 0; j < kStatesPerPhone; ++j) {
    EXPECT_EQ(r.phones[0].states[static_cast<std::size_t>(j)].start, static_cast<std::size_t>(j));
    EXPECT_EQ(r.phones[0].states[static_cast<std::size_t>(j)].length(), 1u);
  }
}

TEST(Align, MatchesBruteForceOnSmallInstances) {
  const VoiceModel m = model_for({"aa", "iy", "m"}, 2, 2.5);
  std::mt19937_64 rng(2);
  const std::vector<std::string> pool = {"aa", "iy", "m"};
  for (std::size_t phones = 1; phones <= 3; ++phones) {
    for (std::size_t frames = 5 * phones; frames <= 5 * phones + 5; ++frames) {
      std::vector<std::string> names;
      for (std::size_t i = 0; i < phones; ++i) names.push_back(pool[rng() % pool.size()]);
      const auto labels = testing::untimed(names);
      const Observations obs = random_observations(frames, m.spectral_dim(), rng);
      const AlignmentResult r = viterbi_align(m, labels, obs);
      const auto oracle = testing::brute_force_align(m, labels, obs);
      EXPECT_NEAR(r.log_likelihood, oracle.score, 1e-9 * std::abs(oracle.score));
      EXPECT_EQ(state_durations(r), oracle.durations) << phones << " phones, " << frames << " frames";
    }
  }
}

TEST(Align, ReportedScoreEqualsRecomputedPathScore) {
  const VoiceModel m = model_for({"aa", "iy", "uw", "m"}, 3);
  const Corpus corpus = testing::sample_corpus(m, 5, 4, 4);
  for (const auto& u : corpus) {
    const AlignmentResult r = viterbi_align(m, u.labels, u.observations);
    EXPECT_NEAR(score_segmentation(m, u.labels, u.observations, state_durations(r)), r.log_likelihood,
                1e-9 * std::abs(r.log_likelihood));
  }
}

TEST(Align, SpansAreContiguousAndCover) {
  const VoiceModel m = model_for({"aa", "iy", "uw", "m"}, 5);
  const Corpus corpus = testing::sample_corpus(m, 5, 5, 6);
  for (const auto& u : corpus) {
    const AlignmentResult r = viterbi_align(m, u.labels, u.observations);
    ASSERT_EQ(r.phones.size(), u.labels.size());
    EXPECT_EQ(r.frames, u.observations.frames());
    std::size_t t = 0;
    for (const auto& p : r.phones) {
      EXPECT_EQ(p.span.start, t);
      for (const auto& s : p.states) {
        EXPECT_EQ(s.start, t);
        EXPECT_GE(s.length(), 1u);
        t = s.end;
      }
      EXPECT_EQ(p.span.end, t);
    }
    EXPECT_EQ(t, u.observations.frames());
  }
}

TEST(Align, RecoversSampledTwoPhoneBoundary) {
  const VoiceModel m = model_for({"aa", "iy", "uw", "m"}, 7);
  const Corpus corpus = testing::sample_corpus(m, 40, 2, 8);
  std::mt19937_64 rng(9);
  int within = 0;
  for (const auto& u : corpus) {
    // Resample with known phone lengths so the true boundary is known.
    const auto& a = m.backoff.at(u.labels[0].phoneme);
    const auto& b = m.backoff.at(u.labels[1].phoneme);
    std::vector<const HmmState*> states;
    for (const auto& s : a.states) states.push_back(&s);
    for (const auto& s : b.states) states.push_back(&s);
    std::normal_distribution<double> normal(0.0, 1.0);
    Observations obs;
    const std::size_t per_state = 4;
    const auto T = static_cast<Eigen::Index>(states.size() * per_state);
    obs.spectral.resize(T, m.spectral_dim());
    obs.pitch = FrameMatrix::Zero(T, kPitchWidth);
    obs.voiced.assign(static_cast<std::size_t>(T), false);
    for (Eigen::Index t = 0; t < T; ++t) {
      const HmmState& s = *states[static_cast<std::size_t>(t) / per_state];
      for (Eigen::Index d = 0; d < m.spectral_dim(); ++d) {
        obs.spectral(t, d) = s.spectral.mean(d) + std::sqrt(s.spectral.variance(d)) * normal(rng);
      }
    }
    const AlignmentResult r = viterbi_align(m, u.labels, obs);
    const auto boundary = static_cast<long>(r.phones[1].span.start);
    if (std::abs(boundary - static_cast<long>(5 * per_state)) <= 1) ++within;
  }
  EXPECT_EQ(within, 40);
}

TEST(Align, TooFewFramesAndUnknownPhone) {
  const VoiceModel m = model_for({"aa", "iy"}, 10);
  std::mt19937_64 rng(10);
  EXPECT_EQ(error_code([&] { viterbi_align(m, testing::untimed({"aa", "iy"}), random_observations(9, m.spectral_dim(), rng)); }),
            ErrorCode::TooFewFrames);
  EXPECT_EQ(error_code([&] { viterbi_align(m, testing::untimed({"zh"}), random_observations(9, m.spectral_dim(), rng)); }),
            ErrorCode::UnalignableLabel);
}

TEST(AlignmentLabels, UnitConversion) {
  AlignmentResult r;
  r.frames = 25;
  AlignedPhone a;
  a.phoneme = "sil";
  a.span = {0, 10};
  AlignedPhone b;
  b.phoneme = "aa";
  b.span = {10, 25};
  r.phones = {a, b};
  const auto labels = alignment_to_labels(r, 80, 16000);
  ASSERT_EQ(labels.size(), 2u);
  EXPECT_EQ(*labels[0].start, 0);
  EXPECT_EQ(*labels[0].end, 500000);
  EXPECT_EQ(*labels[1].start, 500000);
  EXPECT_EQ(*labels[1].end, 1250000);
}

TEST(AlignmentLabels, CoverUtteranceAndSurviveRoundTrip) {
  const VoiceModel m = model_for({"aa", "iy", "uw", "m"}, 11);
  const Corpus corpus = testing::sample_corpus(m, 1, 4, 12);
  const auto& u = corpus[0];
  const AlignmentResult r = viterbi_align(m, u.labels, u.observations);
  const auto labels = alignment_to_labels(r, 80, 16000);
  EXPECT_EQ(*labels.front().start, 0);
  EXPECT_EQ(*labels.back().end, static_cast<std::int64_t>(u.observations.frames()) * 80 * kLabelUnitsPerSecond / 16000);
  for (std::size_t i = 1; i < labels.size(); ++i) EXPECT_EQ(*labels[i].start, *labels[i - 1].end);
  testing::TempDir dir;
  write_label_file(labels, dir / "a.lab");
  const auto back = parse_label_file(dir / "a.lab");
  ASSERT_EQ(back.size(), labels.size());
  for (std::size_t i = 0; i < back.size(); ++i) {
    EXPECT_EQ(back[i].start, labels[i].start);
    EXPECT_EQ(back[i].end, labels[i].end);
    EXPECT_EQ(back[i].phoneme, labels[i].phoneme);
  }
}

TEST(Align, DurationTermIsGaussian) {
  HmmState s;
  s.duration_mean = 4.0;
  s.duration_variance = 2.0;
  EXPECT_NEAR(duration_log_likelihood(s, 6.0), -0.5 * std::log(2.0 * std::numbers::pi * 2.0) - 1.0, 1e-12);
}

}  // namespace
}  // namespace hmmse
