#include "hmmse/align.hpp"

#include <cmath>
#include <limits>
#include <numbers>

#include "hmmse/error.hpp"

namespace hmmse {
namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

struct Problem {
  UtteranceModel um;
  std::vector<ContextLabel> contexts;
  FrameMatrix prefix;  // (T + 1) x S cumulative emission log-likelihoods
  std::size_t frames = 0;
  std::size_t states = 0;

  double emission(std::size_t s, std::size_t start, std::size_t end) const {
    const auto c = static_cast<Eigen::Index>(s);
    return prefix(static_cast<Eigen::Index>(end), c) - prefix(static_cast<Eigen::Index>(start), c);
  }
  double span_score(std::size_t s, std::size_t start, std::size_t end) const {
    return emission(s, start, end) + duration_log_likelihood(*um.states[s], static_cast<double>(end - start));
  }
};

Problem prepare(const VoiceModel& model, const std::vector<PhoneLabel>& labels, const Observations& obs) {
  if (labels.empty()) throw Error(ErrorCode::EmptySequence, "no labels to align");
  Problem p;
  p.frames = obs.frames();
  p.states = labels.size() * kStatesPerPhone;
  if (p.frames < p.states) {
    throw Error(ErrorCode::TooFewFrames, std::to_string(p.frames) + " frames for " + std::to_string(labels.size()) +
                                             " labels (" + std::to_string(p.states) + " states)");
  }
  if (obs.spectral.cols() != model.spectral_dim()) {
    throw Error(ErrorCode::DimensionMismatch, "features do not match the model dimensions");
  }
  p.contexts = expand_context(labels, model.metadata.context_width);
  p.um = build_utterance_model(model, p.contexts);
  const FrameMatrix em = emission_log_likelihoods(p.um, obs);
  const auto T = static_cast<Eigen::Index>(p.frames);
  p.prefix = FrameMatrix::Zero(T + 1, em.cols());
  for (Eigen::Index t = 0; t < T; ++t) p.prefix.row(t + 1) = p.prefix.row(t) + em.row(t);
  return p;
}

}  // namespace

double duration_log_likelihood(const HmmState& state, double frames) {
  const double diff = frames - state.duration_mean;
  return -0.5 * (std::log(2.0 * std::numbers::pi * state.duration_variance) +
                 diff * diff / state.duration_variance);
}

AlignmentResult viterbi_align(const VoiceModel& model, const std::vector<PhoneLabel>& labels,
                              const Observations& obs) {
  const Problem p = prepare(model, labels, obs);
  const std::size_t T = p.frames;
  const std::size_t S = p.states;

  // best(s, t): best score of frames [t, T) using states s.. with state s
  // starting at t. Filled backwards so the forward read-out can prefer long
  // early spans on ties.
  std::vector<double> best((S + 1) * (T + 1), kNegInf);
  std::vector<std::size_t> choice((S + 1) * (T + 1), 0);
  auto at = [T](std::size_t s, std::size_t t) { return s * (T + 1) + t; };
  best[at(S, T)] = 0.0;
  for (std::size_t s = S; s-- > 0;) {
    const std::size_t remaining = S - s;  // states s..S-1
    for (std::size_t t = s; t + remaining <= T; ++t) {
      double top = kNegInf;
      std::size_t top_d = 0;
      const std::size_t max_d = T - t - (remaining - 1);
      for (std::size_t d = max_d; d >= 1; --d) {
        const double next = best[at(s + 1, t + d)];
        if (next == kNegInf) continue;
        const double v = p.span_score(s, t, t + d) + next;
        if (v > top) {
          top = v;
          top_d = d;
        }
      }
      best[at(s, t)] = top;
      choice[at(s, t)] = top_d;
    }
  }
  if (!std::isfinite(best[at(0, 0)])) {
    throw Error(ErrorCode::NumericalUnderflow, "no finite-likelihood segmentation");
  }

  AlignmentResult result;
  result.frames = T;
  result.log_likelihood = best[at(0, 0)];
  std::size_t t = 0;
  for (std::size_t label = 0; label < labels.size(); ++label) {
    AlignedPhone phone;
    phone.phoneme = labels[label].phoneme;
    phone.span.start = t;
    for (std::size_t j = 0; j < kStatesPerPhone; ++j) {
      const std::size_t s = label * kStatesPerPhone + j;
      const std::size_t d = choice[at(s, t)];
      phone.states[j] = {t, t + d};
      t += d;
    }
    phone.span.end = t;
    result.phones.push_back(std::move(phone));
  }
  return result;
}

double score_segmentation(const VoiceModel& model, const std::vector<PhoneLabel>& labels, const Observations& obs,
                          const std::vector<std::size_t>& state_durations) {
  const Problem p = prepare(model, labels, obs);
  if (state_durations.size() != p.states) {
    throw Error(ErrorCode::LengthMismatch, "one duration per state required");
  }
  double total = 0.0;
  std::size_t t = 0;
  for (std::size_t s = 0; s < p.states; ++s) {
    const std::size_t d = state_durations[s];
    if (d == 0 || t + d > p.frames) throw Error(ErrorCode::LengthMismatch, "invalid state duration");
    total += p.span_score(s, t, t + d);
    t += d;
  }
  if (t != p.frames) throw Error(ErrorCode::LengthMismatch, "durations do not cover the utterance");
  return total;
}

std::vector<PhoneLabel> alignment_to_labels(const AlignmentResult& result, int frame_shift, int sample_rate) {
  auto units = [&](std::size_t frame) {
    const double seconds = static_cast<double>(frame) * frame_shift / sample_rate;
    return static_cast<std::int64_t>(std::llround(seconds * static_cast<double>(kLabelUnitsPerSecond)));
  };
  std::vector<PhoneLabel> labels;
  labels.reserve(result.phones.size());
  for (const auto& phone : result.phones) {
    PhoneLabel l;
    l.phoneme = phone.phoneme;
    l.start = units(phone.span.start);
    l.end = units(phone.span.end);
    labels.push_back(std::move(l));
  }
  return labels;
}

std::vector<std::size_t> state_durations(const AlignmentResult& result) {
  std::vector<std::size_t> out;
  for (const auto& phone : result.phones) {
    for (const auto& s : phone.states) out.push_back(s.length());
  }
  return out;
}

}  // namespace hmmse
