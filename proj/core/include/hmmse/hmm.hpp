#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <limits>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "hmmse/features.hpp"
#include "hmmse/labels.hpp"
#include "hmmse/matrix.hpp"

namespace hmmse {

inline constexpr int kStatesPerPhone = 5;
inline constexpr int kPitchWidth = 3;
inline constexpr double kVarianceFloorScale = 1e-4;
inline constexpr double kMinVarianceFloor = 1e-8;
inline constexpr double kDurationVarianceFloor = 1.0;
inline constexpr double kMinVoicedWeight = 1e-5;

// Diagonal Gaussian. For the pitch stream, voiced_weight is the probability
// mass of the voiced space; the unvoiced space is a point mass.
struct StreamGaussian {
  Vector mean;
  Vector variance;
  double voiced_weight = 1.0;
};

struct HmmState {
  StreamGaussian spectral;  // [mgc, d mgc, dd mgc]
  StreamGaussian pitch;     // [lf0, d lf0, dd lf0]
  double duration_mean = 1.0;  // frames
  double duration_variance = 1.0;

  // Self-loop probability of the conventional HMM view of the duration.
  double self_loop() const { return 1.0 - 1.0 / duration_mean; }
};

// Five-state left-to-right model without skips.
struct PhoneHmm {
  std::string phoneme;
  std::array<HmmState, kStatesPerPhone> states;
  double occupancy = 0.0;  // expected training frames at the last re-estimation
};

enum class ModelKind { average, adapted };

struct AffineTransform {
  Eigen::MatrixXd A;
  Vector b;
};

struct ModelMetadata {
  double alpha = 0.42;
  int order = 24;
  int frame_shift = 80;
  int sample_rate = 16000;
  ContextWidth context_width = ContextWidth::triphone;
  Vector spectral_floor;  // variance floor per dimension
  Vector pitch_floor;
  Vector gv_target;  // per static spectral dimension; empty when unknown
  std::optional<AffineTransform> spectral_transform;
  std::optional<AffineTransform> pitch_transform;
  std::vector<std::string> training_log;
};

struct VoiceModel {
  std::map<std::string, PhoneHmm> models;   // context key -> model
  std::map<std::string, PhoneHmm> backoff;  // phoneme -> monophone
  ModelMetadata metadata;
  ModelKind kind = ModelKind::average;

  int spectral_dim() const { return 3 * (metadata.order + 1); }

  // Context model when present, else the centre phone's monophone, else null.
  const PhoneHmm* find(const ContextLabel& context) const;
  // As find(), but throws UnalignableLabel for phonemes without a monophone.
  const PhoneHmm& lookup(const ContextLabel& context) const;
};

// Observation vectors of one utterance, deltas already appended.
struct Observations {
  FrameMatrix spectral;      // T x 3(M+1)
  FrameMatrix pitch;         // T x 3; rows of unvoiced frames are zero
  std::vector<bool> voiced;  // T

  std::size_t frames() const { return voiced.size(); }
};

// Requires equal frame counts and at least 3 frames. Pitch deltas are taken
// within each voiced run, boundaries replicated.
Observations make_observations(const MelCepstrumSequence& mc, const F0Track& f0);

struct TrainingUtterance {
  std::string id;
  std::vector<PhoneLabel> labels;
  Observations observations;
};

using Corpus = std::vector<TrainingUtterance>;

struct TrainingConfig {
  int workers = 1;
};

// Monophones for every phone in `phones`, initialised to the global
// statistics of the corpus.
VoiceModel flat_start(const Corpus& corpus, const PhoneSet& phones, const ModelMetadata& metadata);

struct TrainingResult {
  VoiceModel model;
  // Total log-likelihood of the corpus under the model entering each
  // iteration; size == iterations.
  std::vector<double> log_likelihood;
  std::size_t skipped_utterances = 0;
};

TrainingResult baum_welch(const VoiceModel& model, const Corpus& corpus, int iterations,
                          const TrainingConfig& config = {});

// Clones the centre monophone for every context in the corpus that lacks a model.
VoiceModel add_context_models(const VoiceModel& model, const Corpus& corpus);

// Drops context models trained on fewer than `min_occupancy` frames.
VoiceModel tie_backoff(const VoiceModel& model, double min_occupancy);

inline constexpr double kDefaultMinOccupancy = 50.0;

struct AdaptationConfig {
  int iterations = 3;
  int workers = 1;
};

VoiceModel adapt_mllr(const VoiceModel& model, const Corpus& adaptation, const AdaptationConfig& config = {});

// Per-utterance inference, exposed for alignment, diagnostics and tests.
struct UtteranceModel {
  std::vector<const HmmState*> states;
  std::vector<std::string> model_keys;  // one per label
  std::vector<const PhoneHmm*> phone_models;
};

UtteranceModel build_utterance_model(const VoiceModel& model, const std::vector<ContextLabel>& contexts);

// log N(x) for the spectral stream plus the two-space pitch term.
double state_log_likelihood(const HmmState& state, const Observations& obs, std::size_t t);

// T x S matrix of state log-likelihoods.
FrameMatrix emission_log_likelihoods(const UtteranceModel& um, const Observations& obs);

struct ForwardBackwardResult {
  double log_likelihood = -std::numeric_limits<double>::infinity();
  FrameMatrix posteriors;  // T x S state occupation probabilities
};

ForwardBackwardResult forward_backward(const UtteranceModel& um, const Observations& obs);

// Best single-path log-likelihood under the same self-loop HMM.
double viterbi_log_likelihood(const UtteranceModel& um, const Observations& obs);

// Model container: "HMSEMDL\0", u32 version, u64 metadata length, JSON
// metadata, float32 parameter blocks in metadata order.
inline constexpr std::uint32_t kModelFileVersion = 1;

std::vector<unsigned char> serialize_model(const VoiceModel& model);
VoiceModel deserialize_model(const std::vector<unsigned char>& bytes);
void write_model(const VoiceModel& model, const std::filesystem::path& path);
VoiceModel read_model(const std::filesystem::path& path);

}  // namespace hmmse
