#include <algorithm>
#include <cmath>
#include <numbers>
#include <set>
#include <unordered_map>

#include "hmm_internal.hpp"
#include "hmmse/dynamics.hpp"
#include "hmmse/error.hpp"
#include "hmmse/hmm.hpp"

namespace hmmse {

const PhoneHmm* VoiceModel::find(const ContextLabel& context) const {
  if (const auto it = models.find(context.key()); it != models.end()) return &it->second;
  if (const auto it = backoff.find(context.center); it != backoff.end()) return &it->second;
  return nullptr;
}

const PhoneHmm& VoiceModel::lookup(const ContextLabel& context) const {
  const PhoneHmm* hmm = find(context);
  if (!hmm) throw Error(ErrorCode::UnalignableLabel, "no model for phoneme '" + context.center + "'");
  return *hmm;
}

Observations make_observations(const MelCepstrumSequence& mc, const F0Track& f0) {
  if (mc.size() != f0.size()) {
    throw Error(ErrorCode::DimensionMismatch, "mel-cepstrum has " + std::to_string(mc.size()) +
                                                  " frames but F0 has " + std::to_string(f0.size()));
  }
  Observations obs;
  obs.spectral = compute_deltas(mc.frames);
  const auto frames = static_cast<Eigen::Index>(f0.size());
  obs.pitch = FrameMatrix::Zero(frames, kPitchWidth);
  obs.voiced.assign(f0.size(), false);
  Eigen::Index t = 0;
  while (t < frames) {
    if (!f0.voiced(static_cast<std::size_t>(t))) {
      ++t;
      continue;
    }
    Eigen::Index end = t;
    while (end < frames && f0.voiced(static_cast<std::size_t>(end))) ++end;
    FrameMatrix run(end - t, 1);
    for (Eigen::Index i = t; i < end; ++i) run(i - t, 0) = *f0.log_f0[static_cast<std::size_t>(i)];
    obs.pitch.block(t, 0, end - t, kPitchWidth) = apply_delta_windows(run);
    for (Eigen::Index i = t; i < end; ++i) obs.voiced[static_cast<std::size_t>(i)] = true;
    t = end;
  }
  return obs;
}

namespace detail {

GaussianCache::GaussianCache(const StreamGaussian& g) : mean(g.mean), inv_var(g.variance.cwiseInverse()) {
  log_norm = -0.5 * (static_cast<double>(g.mean.size()) * std::log(2.0 * std::numbers::pi) +
                     g.variance.array().log().sum());
}

double GaussianCache::log_density(const double* x) const {
  double acc = 0.0;
  for (Eigen::Index i = 0; i < mean.size(); ++i) {
    const double d = x[i] - mean(i);
    acc += d * d * inv_var(i);
  }
  return log_norm - 0.5 * acc;
}

StateCache::StateCache(const HmmState& s)
    : spectral(s.spectral),
      pitch(s.pitch),
      log_voiced(std::log(s.pitch.voiced_weight)),
      log_unvoiced(std::log1p(-s.pitch.voiced_weight)) {}

double StateCache::log_likelihood(const Observations& obs, std::size_t t) const {
  const auto r = static_cast<Eigen::Index>(t);
  double ll = spectral.log_density(obs.spectral.row(r).data());
  if (obs.voiced[t]) {
    ll += log_voiced + pitch.log_density(obs.pitch.row(r).data());
  } else {
    ll += log_unvoiced;
  }
  return ll;
}

double log_sum_exp(double a, double b) {
  if (a == -std::numeric_limits<double>::infinity()) return b;
  if (b == -std::numeric_limits<double>::infinity()) return a;
  return a > b ? a + std::log1p(std::exp(b - a)) : b + std::log1p(std::exp(a - b));
}

}  // namespace detail

double state_log_likelihood(const HmmState& state, const Observations& obs, std::size_t t) {
  return detail::StateCache(state).log_likelihood(obs, t);
}

UtteranceModel build_utterance_model(const VoiceModel& model, const std::vector<ContextLabel>& contexts) {
  UtteranceModel um;
  for (const auto& c : contexts) {
    const PhoneHmm& hmm = model.lookup(c);
    const bool is_context = model.models.find(c.key()) != model.models.end();
    um.model_keys.push_back(is_context ? "ctx:" + c.key() : "mono:" + c.center);
    um.phone_models.push_back(&hmm);
    for (const auto& s : hmm.states) um.states.push_back(&s);
  }
  return um;
}

FrameMatrix emission_log_likelihoods(const UtteranceModel& um, const Observations& obs) {
  const auto frames = static_cast<Eigen::Index>(obs.frames());
  const auto states = static_cast<Eigen::Index>(um.states.size());
  if (frames > 0 && obs.spectral.cols() != um.states.front()->spectral.mean.size()) {
    throw Error(ErrorCode::DimensionMismatch, "observation width does not match the model");
  }
  std::unordered_map<const HmmState*, detail::StateCache> cache;
  std::vector<const detail::StateCache*> per_state;
  per_state.reserve(um.states.size());
  for (const HmmState* s : um.states) {
    auto it = cache.find(s);
    if (it == cache.end()) it = cache.emplace(s, detail::StateCache(*s)).first;
    per_state.push_back(&it->second);
  }
  FrameMatrix out(frames, states);
  for (Eigen::Index t = 0; t < frames; ++t) {
    for (Eigen::Index s = 0; s < states; ++s) {
      out(t, s) = per_state[static_cast<std::size_t>(s)]->log_likelihood(obs, static_cast<std::size_t>(t));
    }
  }
  return out;
}

namespace detail {

std::vector<TransitionLogs> transition_logs(const UtteranceModel& um) {
  std::vector<TransitionLogs> out;
  out.reserve(um.states.size());
  for (const HmmState* s : um.states) {
    const double stay = s->self_loop();
    out.push_back({stay > 0.0 ? std::log(stay) : -std::numeric_limits<double>::infinity(),
                   -std::log(s->duration_mean)});
  }
  return out;
}

ForwardBackwardResult forward_backward(const FrameMatrix& emissions, const std::vector<TransitionLogs>& trans) {
  constexpr double kNegInf = -std::numeric_limits<double>::infinity();
  const Eigen::Index frames = emissions.rows();
  const Eigen::Index states = emissions.cols();
  ForwardBackwardResult result;
  if (frames < states || states == 0) return result;

  FrameMatrix alpha = FrameMatrix::Constant(frames, states, kNegInf);
  FrameMatrix beta = FrameMatrix::Constant(frames, states, kNegInf);
  alpha(0, 0) = emissions(0, 0);
  for (Eigen::Index t = 1; t < frames; ++t) {
    // State s is reachable at t only if s <= t and the remaining states fit.
    const Eigen::Index lo = std::max<Eigen::Index>(0, states - (frames - t));
    const Eigen::Index hi = std::min<Eigen::Index>(states - 1, t);
    for (Eigen::Index s = lo; s <= hi; ++s) {
      double v = alpha(t - 1, s) + trans[static_cast<std::size_t>(s)].stay;
      if (s > 0) v = log_sum_exp(v, alpha(t - 1, s - 1) + trans[static_cast<std::size_t>(s - 1)].exit);
      alpha(t, s) = v + emissions(t, s);
    }
  }
  const double total = alpha(frames - 1, states - 1) + trans.back().exit;
  if (!std::isfinite(total)) return result;

  beta(frames - 1, states - 1) = trans.back().exit;
  for (Eigen::Index t = frames - 2; t >= 0; --t) {
    const Eigen::Index lo = std::max<Eigen::Index>(0, states - (frames - t));
    const Eigen::Index hi = std::min<Eigen::Index>(states - 1, t);
    for (Eigen::Index s = lo; s <= hi; ++s) {
      double v = trans[static_cast<std::size_t>(s)].stay + emissions(t + 1, s) + beta(t + 1, s);
      if (s + 1 < states) {
        v = log_sum_exp(v, trans[static_cast<std::size_t>(s)].exit + emissions(t + 1, s + 1) + beta(t + 1, s + 1));
      }
      beta(t, s) = v;
    }
  }

  result.log_likelihood = total;
  result.posteriors = FrameMatrix::Zero(frames, states);
  for (Eigen::Index t = 0; t < frames; ++t) {
    for (Eigen::Index s = 0; s < states; ++s) {
      const double lp = alpha(t, s) + beta(t, s) - total;
      if (lp > -700.0) result.posteriors(t, s) = std::exp(lp);
    }
  }
  return result;
}

}  // namespace detail

ForwardBackwardResult forward_backward(const UtteranceModel& um, const Observations& obs) {
  return detail::forward_backward(emission_log_likelihoods(um, obs), detail::transition_logs(um));
}

double viterbi_log_likelihood(const UtteranceModel& um, const Observations& obs) {
  constexpr double kNegInf = -std::numeric_limits<double>::infinity();
  const FrameMatrix emissions = emission_log_likelihoods(um, obs);
  const auto trans = detail::transition_logs(um);
  const Eigen::Index frames = emissions.rows();
  const Eigen::Index states = emissions.cols();
  if (frames < states || states == 0) return kNegInf;
  std::vector<double> prev(static_cast<std::size_t>(states), kNegInf), cur(prev.size());
  prev[0] = emissions(0, 0);
  for (Eigen::Index t = 1; t < frames; ++t) {
    for (Eigen::Index s = 0; s < states; ++s) {
      double v = prev[static_cast<std::size_t>(s)] + trans[static_cast<std::size_t>(s)].stay;
      if (s > 0) v = std::max(v, prev[static_cast<std::size_t>(s - 1)] + trans[static_cast<std::size_t>(s - 1)].exit);
      cur[static_cast<std::size_t>(s)] = v + emissions(t, s);
    }
    std::swap(prev, cur);
  }
  return prev.back() + trans.back().exit;
}

VoiceModel flat_start(const Corpus& corpus, const PhoneSet& phones, const ModelMetadata& metadata) {
  if (corpus.empty()) throw Error(ErrorCode::EmptyCorpus, "flat start needs at least one utterance");
  const Eigen::Index dim = 3 * (metadata.order + 1);
  Vector s_sum = Vector::Zero(dim), s_sq = Vector::Zero(dim);
  Vector p_sum = Vector::Zero(kPitchWidth), p_sq = Vector::Zero(kPitchWidth);
  double frames = 0.0, voiced = 0.0, labels = 0.0;
  for (const auto& utt : corpus) {
    const auto& obs = utt.observations;
    if (obs.spectral.cols() != dim) {
      throw Error(ErrorCode::DimensionMismatch, "utterance " + utt.id + " has spectral width " +
                                                    std::to_string(obs.spectral.cols()) + ", expected " +
                                                    std::to_string(dim));
    }
    for (std::size_t t = 0; t < obs.frames(); ++t) {
      const auto r = static_cast<Eigen::Index>(t);
      s_sum += obs.spectral.row(r).transpose();
      s_sq += obs.spectral.row(r).transpose().cwiseProduct(obs.spectral.row(r).transpose());
      if (obs.voiced[t]) {
        p_sum += obs.pitch.row(r).transpose();
        p_sq += obs.pitch.row(r).transpose().cwiseProduct(obs.pitch.row(r).transpose());
        voiced += 1.0;
      }
    }
    frames += static_cast<double>(obs.frames());
    labels += static_cast<double>(utt.labels.size());
  }
  if (frames == 0.0) throw Error(ErrorCode::EmptyCorpus, "corpus has no frames");

  VoiceModel model;
  model.metadata = metadata;
  model.kind = ModelKind::average;
  const Vector s_mean = s_sum / frames;
  const Vector s_var = (s_sq / frames - s_mean.cwiseProduct(s_mean)).cwiseMax(0.0);
  model.metadata.spectral_floor = (kVarianceFloorScale * s_var).cwiseMax(kMinVarianceFloor);

  Vector p_mean = Vector::Zero(kPitchWidth);
  Vector p_var = Vector::Ones(kPitchWidth);
  if (voiced > 0.0) {
    p_mean = p_sum / voiced;
    p_var = (p_sq / voiced - p_mean.cwiseProduct(p_mean)).cwiseMax(0.0);
  }
  model.metadata.pitch_floor = (kVarianceFloorScale * p_var).cwiseMax(kMinVarianceFloor);
  const double voiced_weight = std::clamp(voiced / frames, kMinVoicedWeight, 1.0 - kMinVoicedWeight);

  HmmState state;
  state.spectral = {s_mean, s_var.cwiseMax(model.metadata.spectral_floor), 1.0};
  state.pitch = {p_mean, p_var.cwiseMax(model.metadata.pitch_floor), voiced_weight};
  const double phone_frames = labels > 0.0 ? frames / labels : static_cast<double>(kStatesPerPhone);
  state.duration_mean = std::max(1.0, phone_frames / kStatesPerPhone);
  state.duration_variance = std::max(kDurationVarianceFloor, state.duration_mean);

  for (const auto& phone : phones.phones()) {
    PhoneHmm hmm;
    hmm.phoneme = phone;
    hmm.states.fill(state);
    model.backoff.emplace(phone, std::move(hmm));
  }
  model.metadata.training_log.push_back("flat_start: " + std::to_string(corpus.size()) + " utterances, " +
                                        std::to_string(static_cast<long long>(frames)) + " frames");
  return model;
}

VoiceModel add_context_models(const VoiceModel& model, const Corpus& corpus) {
  VoiceModel out = model;
  std::size_t added = 0;
  for (const auto& utt : corpus) {
    for (const auto& c : expand_context(utt.labels, model.metadata.context_width)) {
      if (out.models.count(c.key())) continue;
      const auto it = out.backoff.find(c.center);
      if (it == out.backoff.end()) throw Error(ErrorCode::UnalignableLabel, "no monophone for '" + c.center + "'");
      PhoneHmm clone = it->second;
      clone.occupancy = 0.0;
      out.models.emplace(c.key(), std::move(clone));
      ++added;
    }
  }
  out.metadata.training_log.push_back("add_context_models: " + std::to_string(added) + " cloned");
  return out;
}

VoiceModel tie_backoff(const VoiceModel& model, double min_occupancy) {
  VoiceModel out = model;
  std::size_t removed = 0;
  for (auto it = out.models.begin(); it != out.models.end();) {
    if (it->second.occupancy < min_occupancy) {
      it = out.models.erase(it);
      ++removed;
    } else {
      ++it;
    }
  }
  out.metadata.training_log.push_back("tie_backoff: removed " + std::to_string(removed) + ", kept " +
                                      std::to_string(out.models.size()));
  return out;
}

}  // namespace hmmse
