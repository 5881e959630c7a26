#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "hmmse/error.hpp"
#include "hmmse/hmm.hpp"
#include "hmmse/labels.hpp"
#include "hmmse/signal.hpp"

namespace hmmse::testing {

// Code of the hmmse::Error thrown by f, or nullopt when nothing is thrown.
template <class F>
std::optional<ErrorCode> error_code(F&& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  return std::nullopt;
}

// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  TempDir();
  ~TempDir();
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

Waveform sine(double hz, double seconds, int sample_rate = 16000, double amplitude = 0.5, double phase = 0.0);
Waveform pulse_train(double hz, double seconds, int sample_rate = 16000, double amplitude = 0.5);
Waveform white_noise(std::size_t samples, std::uint64_t seed, double stddev = 0.1, int sample_rate = 16000);
Waveform constant(double value, std::size_t samples, int sample_rate = 16000);

std::string read_text(const std::filesystem::path& path);
void write_text(const std::filesystem::path& path, const std::string& text);
std::vector<unsigned char> read_bytes(const std::filesystem::path& path);

// Well separated random monophones over `phones`, small spectral order.
struct RandomModelSpec {
  std::vector<std::string> phones = {"aa", "iy", "uw", "m"};
  int order = 2;
  double mean_spread = 6.0;
  double duration_mean = 5.0;
  double voiced_weight = 0.8;
  std::uint64_t seed = 7;
};

VoiceModel random_model(const RandomModelSpec& spec);

// Draws utterances from the model's own generative story: geometric state
// durations matching the self-loop view, independent diagonal Gaussian
// frames, Bernoulli voicing. Each utterance holds `labels_per_utterance`
// phones chosen uniformly from the model's monophones.
Corpus sample_corpus(const VoiceModel& model, std::size_t utterances, std::size_t labels_per_utterance,
                     std::uint64_t seed);

// Relative parameter changes, each as ||new - old|| / ||old|| over the
// concatenation of the group across all states.
struct ParameterChange {
  double spectral_mean = 0.0;
  double spectral_variance = 0.0;
  double pitch_mean = 0.0;
  double pitch_variance = 0.0;
  double duration_mean = 0.0;

  double max() const;
};

ParameterChange parameter_change(const VoiceModel& before, const VoiceModel& after);

// Dense normal-equation MLPG for one dimension (T x 3 means and variances).
Vector dense_mlpg(const FrameMatrix& means, const FrameMatrix& variances);

// Exhaustive search over every state segmentation.
struct BruteForceAlignment {
  double score;
  std::vector<std::size_t> durations;
};

BruteForceAlignment brute_force_align(const VoiceModel& model, const std::vector<PhoneLabel>& labels,
                                      const Observations& obs);

std::vector<PhoneLabel> untimed(const std::vector<std::string>& phones);

}  // namespace hmmse::testing
