#pragma once

#include <cstddef>
#include <vector>

#include "hmmse/align.hpp"
#include "hmmse/features.hpp"
#include "hmmse/hmm.hpp"
#include "hmmse/matrix.hpp"

namespace hmmse {

// Ordered states with per-state frame counts. The states point into the
// model that produced them.
struct StateSequence {
  std::vector<const HmmState*> states;
  std::vector<std::size_t> durations;

  std::size_t frames() const;
};

// Per-state frames = max(1, round(rate * duration mean)). Throws ConfigError
// for rate <= 0.
StateSequence predict_durations(const VoiceModel& model, const std::vector<ContextLabel>& contexts,
                                double rate = 1.0);

// State sequence of an alignment: the alignment's durations over the models
// of `labels`.
StateSequence aligned_state_sequence(const VoiceModel& model, const std::vector<PhoneLabel>& labels,
                                     const AlignmentResult& alignment);

// Frame-level [static, delta, delta-delta] means and variances, blocks of
// `width` columns each.
struct StreamStatistics {
  FrameMatrix mean;
  FrameMatrix variance;

  std::size_t frames() const { return static_cast<std::size_t>(mean.rows()); }
  Eigen::Index width() const { return mean.cols() / 3; }
};

StreamStatistics spectral_statistics(const StateSequence& seq);

struct MlpgSolution {
  Vector trajectory;
  double relative_residual = 0.0;  // ||A c - r|| / ||r||
};

inline constexpr double kMlpgResidualLimit = 1e-8;

// One dimension: solves (W' P W) c = W' P mu for T x 3 means and variances.
// Infinite variances carry zero weight. Throws SingularSystem when the
// system is not positive definite or the residual exceeds kMlpgResidualLimit.
MlpgSolution mlpg_solve(const FrameMatrix& means, const FrameMatrix& variances);

// Static T x width trajectory of every dimension of a stream.
FrameMatrix mlpg_stream(const StreamStatistics& stats);

struct GeneratedParameters {
  MelCepstrumSequence mc;
  F0Track f0;  // voiced where the state's voiced weight exceeds 0.5
  StreamStatistics spectral;
};

GeneratedParameters mlpg(const VoiceModel& model, const StateSequence& seq);

struct GvTarget {
  Vector target;  // per static dimension, > 0
  double weight = 0.7;
  int iterations = 20;
  double step = 0.1;
};

// Per-dimension population variance over frames.
Vector trajectory_variance(const FrameMatrix& traj);

// Preconditioned gradient ascent on (1 - w) * L_hmm + w * L_gv with
// L_gv = -sum_d ((v_d - target_d) / target_d)^2. This overload stands in a
// quadratic anchor at the input trajectory for the HMM term.
FrameMatrix gv_enhance(const FrameMatrix& traj, const GvTarget& gv);

// Same objective with the exact HMM term of the generating statistics.
FrameMatrix gv_enhance(const FrameMatrix& traj, const GvTarget& gv, const StreamStatistics& stats);

// Mean over utterances of each utterance's per-dimension static variance.
// Throws EmptyCorpus.
GvTarget model_gv_stats(const std::vector<MelCepstrumSequence>& corpus);

}  // namespace hmmse
