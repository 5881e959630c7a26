#pragma once

#include <functional>
#include <string>
#include <vector>

#include "hmmse/hmm.hpp"

namespace hmmse::detail {

struct GaussianCache {
  explicit GaussianCache(const StreamGaussian& g);
  double log_density(const double* x) const;

  Vector mean;
  Vector inv_var;
  double log_norm = 0.0;
};

struct StateCache {
  explicit StateCache(const HmmState& s);
  double log_likelihood(const Observations& obs, std::size_t t) const;

  GaussianCache spectral;
  GaussianCache pitch;
  double log_voiced;
  double log_unvoiced;
};

struct TransitionLogs {
  double stay;
  double exit;
};

double log_sum_exp(double a, double b);
std::vector<TransitionLogs> transition_logs(const UtteranceModel& um);
ForwardBackwardResult forward_backward(const FrameMatrix& emissions, const std::vector<TransitionLogs>& trans);

// Runs `work(i)` for i in [0, count) on `workers` threads. Each index is
// handled exactly once; callers merge results in index order afterwards.
void parallel_for(std::size_t count, int workers, const std::function<void(std::size_t)>& work);

PhoneHmm* find_mutable(VoiceModel& model, const std::string& tagged_key);

}  // namespace hmmse::detail
