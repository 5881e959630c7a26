#include <algorithm>
#include <atomic>
#include <cmath>
#include <mutex>
#include <sstream>
#include <thread>

#include "hmm_internal.hpp"
#include "hmmse/error.hpp"
#include "hmmse/hmm.hpp"

namespace hmmse {
namespace detail {

void parallel_for(std::size_t count, int workers, const std::function<void(std::size_t)>& work) {
  const auto threads = static_cast<std::size_t>(std::max(1, workers));
  if (threads == 1 || count <= 1) {
    for (std::size_t i = 0; i < count; ++i) work(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  std::vector<std::thread> pool;
  for (std::size_t w = 0; w < std::min(threads, count); ++w) {
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < count; i = next++) {
        try {
          work(i);
        } catch (...) {
          std::lock_guard lock(failure_mutex);
          if (!failure) failure = std::current_exception();
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  if (failure) std::rethrow_exception(failure);
}

PhoneHmm* find_mutable(VoiceModel& model, const std::string& tagged_key) {
  if (tagged_key.rfind("ctx:", 0) == 0) {
    const auto it = model.models.find(tagged_key.substr(4));
    return it == model.models.end() ? nullptr : &it->second;
  }
  if (tagged_key.rfind("mono:", 0) == 0) {
    const auto it = model.backoff.find(tagged_key.substr(5));
    return it == model.backoff.end() ? nullptr : &it->second;
  }
  return nullptr;
}

}  // namespace detail

namespace {

struct StateAccum {
  double occ = 0.0;
  Vector s_sum, s_sq;
  double p_occ = 0.0;  // voiced occupancy
  Vector p_sum, p_sq;
  double dur_sum = 0.0, dur_sq = 0.0, instances = 0.0;

  void init(Eigen::Index dim) {
    s_sum = Vector::Zero(dim);
    s_sq = Vector::Zero(dim);
    p_sum = Vector::Zero(kPitchWidth);
    p_sq = Vector::Zero(kPitchWidth);
  }

  void merge(const StateAccum& o) {
    occ += o.occ;
    s_sum += o.s_sum;
    s_sq += o.s_sq;
    p_occ += o.p_occ;
    p_sum += o.p_sum;
    p_sq += o.p_sq;
    dur_sum += o.dur_sum;
    dur_sq += o.dur_sq;
    instances += o.instances;
  }
};

using ModelAccum = std::array<StateAccum, kStatesPerPhone>;

struct UtteranceAccum {
  std::map<std::string, ModelAccum> models;
  double log_likelihood = 0.0;
  bool skipped = false;
};

UtteranceAccum accumulate(const VoiceModel& model, const TrainingUtterance& utt) {
  UtteranceAccum acc;
  const auto& obs = utt.observations;
  const Eigen::Index dim = model.spectral_dim();
  if (obs.spectral.cols() != dim || obs.pitch.cols() != kPitchWidth) {
    throw Error(ErrorCode::DimensionMismatch, "utterance " + utt.id + " does not match the model dimensions");
  }
  const auto contexts = expand_context(utt.labels, model.metadata.context_width);
  const UtteranceModel um = build_utterance_model(model, contexts);
  const ForwardBackwardResult fb = forward_backward(um, obs);
  if (std::isnan(fb.log_likelihood)) {
    throw Error(ErrorCode::NumericalUnderflow, "NaN log-likelihood in utterance " + utt.id);
  }
  if (!std::isfinite(fb.log_likelihood)) {
    acc.skipped = true;
    return acc;
  }
  acc.log_likelihood = fb.log_likelihood;
  const Eigen::Index frames = static_cast<Eigen::Index>(obs.frames());
  for (std::size_t label = 0; label < contexts.size(); ++label) {
    ModelAccum& ma = acc.models[um.model_keys[label]];
    for (int j = 0; j < kStatesPerPhone; ++j) {
      StateAccum& sa = ma[static_cast<std::size_t>(j)];
      if (sa.s_sum.size() == 0) sa.init(dim);
      const auto s = static_cast<Eigen::Index>(label * kStatesPerPhone + static_cast<std::size_t>(j));
      double instance_occ = 0.0;
      for (Eigen::Index t = 0; t < frames; ++t) {
        const double g = fb.posteriors(t, s);
        if (g == 0.0) continue;
        instance_occ += g;
        const auto o = obs.spectral.row(t).transpose();
        sa.s_sum += g * o;
        sa.s_sq += g * o.cwiseProduct(o);
        if (obs.voiced[static_cast<std::size_t>(t)]) {
          const auto p = obs.pitch.row(t).transpose();
          sa.p_occ += g;
          sa.p_sum += g * p;
          sa.p_sq += g * p.cwiseProduct(p);
        }
      }
      sa.occ += instance_occ;
      sa.dur_sum += instance_occ;
      sa.dur_sq += instance_occ * instance_occ;
      sa.instances += 1.0;
    }
  }
  return acc;
}

// Constrained M-step; every clamp below keeps the update a maximiser of the
// auxiliary function inside its feasible set, so EM stays monotone.
void reestimate(HmmState& state, const StateAccum& a, const ModelMetadata& meta) {
  constexpr double kMinOcc = 1e-10;
  if (a.occ < kMinOcc) return;
  const Vector mean = a.s_sum / a.occ;
  state.spectral.mean = mean;
  state.spectral.variance = (a.s_sq / a.occ - mean.cwiseProduct(mean)).cwiseMax(meta.spectral_floor);

  state.pitch.voiced_weight = std::clamp(a.p_occ / a.occ, kMinVoicedWeight, 1.0 - kMinVoicedWeight);
  if (a.p_occ > kMinOcc) {
    const Vector pm = a.p_sum / a.p_occ;
    state.pitch.mean = pm;
    state.pitch.variance = (a.p_sq / a.p_occ - pm.cwiseProduct(pm)).cwiseMax(meta.pitch_floor);
  }

  if (a.instances > 0.0) {
    const double dm = std::max(1.0, a.dur_sum / a.instances);
    state.duration_mean = dm;
    state.duration_variance = std::max(kDurationVarianceFloor, a.dur_sq / a.instances - dm * dm);
  }
}

}  // namespace

TrainingResult baum_welch(const VoiceModel& model, const Corpus& corpus, int iterations, const TrainingConfig& config) {
  if (corpus.empty()) throw Error(ErrorCode::EmptyCorpus, "Baum-Welch needs at least one utterance");
  TrainingResult result;
  result.model = model;
  for (int iter = 0; iter < iterations; ++iter) {
    std::vector<UtteranceAccum> per_utt(corpus.size());
    detail::parallel_for(corpus.size(), config.workers,
                         [&](std::size_t i) { per_utt[i] = accumulate(result.model, corpus[i]); });

    // Canonical merge order: utterance index, then model key.
    std::map<std::string, ModelAccum> total;
    double ll = 0.0;
    std::size_t skipped = 0;
    for (auto& u : per_utt) {
      if (u.skipped) {
        ++skipped;
        continue;
      }
      ll += u.log_likelihood;
      for (auto& [key, ma] : u.models) {
        auto it = total.find(key);
        if (it == total.end()) {
          total.emplace(key, std::move(ma));
        } else {
          for (int j = 0; j < kStatesPerPhone; ++j) it->second[static_cast<std::size_t>(j)].merge(ma[static_cast<std::size_t>(j)]);
        }
      }
    }
    if (skipped == corpus.size()) {
      throw Error(ErrorCode::InsufficientData, "no utterance has enough frames for its label sequence");
    }

    for (auto& [key, hmm] : result.model.models) hmm.occupancy = 0.0;
    for (auto& [key, hmm] : result.model.backoff) hmm.occupancy = 0.0;
    for (const auto& [key, ma] : total) {
      PhoneHmm* hmm = detail::find_mutable(result.model, key);
      if (!hmm) continue;
      double occ = 0.0;
      for (int j = 0; j < kStatesPerPhone; ++j) {
        reestimate(hmm->states[static_cast<std::size_t>(j)], ma[static_cast<std::size_t>(j)], result.model.metadata);
        occ += ma[static_cast<std::size_t>(j)].occ;
      }
      hmm->occupancy = occ;
    }
    result.log_likelihood.push_back(ll);
    result.skipped_utterances = skipped;
    std::ostringstream log;
    log.precision(10);
    log << "baum_welch iteration " << iter + 1 << ": log-likelihood " << ll << ", skipped " << skipped;
    result.model.metadata.training_log.push_back(log.str());
  }
  return result;
}

}  // namespace hmmse
