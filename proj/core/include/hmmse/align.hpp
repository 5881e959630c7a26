#pragma once

#include <array>
#include <cstddef>
#include <vector>

#include "hmmse/hmm.hpp"
#include "hmmse/labels.hpp"

namespace hmmse {

// Half-open frame range [start, end).
struct FrameSpan {
  std::size_t start = 0;
  std::size_t end = 0;

  std::size_t length() const { return end - start; }
};

struct AlignedPhone {
  std::string phoneme;
  FrameSpan span;
  std::array<FrameSpan, kStatesPerPhone> states;
};

struct AlignmentResult {
  std::vector<AlignedPhone> phones;
  std::size_t frames = 0;
  // Emission log-likelihoods plus the log duration densities of every state span.
  double log_likelihood = 0.0;
};

// Semi-Markov Viterbi alignment of the concatenated label models. Every state
// gets at least one frame; ties go to the segmentation that stays longer in
// earlier states. Throws TooFewFrames when T < 5 * labels and UnalignableLabel
// for phonemes without a model.
AlignmentResult viterbi_align(const VoiceModel& model, const std::vector<PhoneLabel>& labels,
                              const Observations& obs);

// Score of a given per-state duration sequence under the alignment objective.
// Durations must be >= 1 and sum to T.
double score_segmentation(const VoiceModel& model, const std::vector<PhoneLabel>& labels, const Observations& obs,
                          const std::vector<std::size_t>& state_durations);

// log N(d; mean, variance) duration term used by the alignment objective.
double duration_log_likelihood(const HmmState& state, double frames);

std::vector<PhoneLabel> alignment_to_labels(const AlignmentResult& result, int frame_shift, int sample_rate);

// Per-state frame counts in alignment order.
std::vector<std::size_t> state_durations(const AlignmentResult& result);

}  // namespace hmmse
