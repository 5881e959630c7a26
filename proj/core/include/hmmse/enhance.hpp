#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "hmmse/align.hpp"
#include "hmmse/analysis.hpp"
#include "hmmse/hmm.hpp"
#include "hmmse/labels.hpp"
#include "hmmse/pargen.hpp"
#include "hmmse/signal.hpp"
#include "hmmse/vocoder.hpp"

namespace hmmse {

// Step 1: the clean-signal features used as the oracle.
struct OracleComponents {
  F0Track f0;
  MelCepstrumSequence mc;
};

OracleComponents oracle_components(const Waveform& clean, const AnalysisConfig& cfg);

// Step 2: interference applied to the waveform.
enum class InterferenceKind { additive_noise, reverberation, competing_speaker };

struct InterferenceSpec {
  InterferenceKind kind = InterferenceKind::additive_noise;
  double snr_db = 0.0;
  double rt60_seconds = 0.3;
  std::uint64_t seed = 1;
};

// Noise and competing speech are scaled to the requested SNR exactly; a
// shorter competing signal is zero-padded, a longer one truncated.
// Reverberation convolves with reverb_impulse_response(), truncates to the
// input length and restores the input peak.
Waveform add_interference(const Waveform& clean, const InterferenceSpec& spec,
                          const std::optional<Waveform>& competing = std::nullopt);

// Exponentially decaying Gaussian noise with a 60 dB amplitude decay over
// rt60; runs for 1.5 * rt60.
std::vector<double> reverb_impulse_response(double rt60_seconds, int sample_rate, std::uint64_t seed);

// 10 log10(P_clean / P_(mixture - clean)).
double measure_snr(const Waveform& clean, const Waveform& mixture);

// Step 3 and step 4 outputs, with the generated parameters for diagnostics.
struct SynthesisOutput {
  Waveform audio;
  MelCepstrumSequence mc;  // after GV
  F0Track f0;
  StateSequence states;
};

// Labels -> contexts -> durations -> MLPG -> GV -> excitation from the model's
// pitch stream -> MLSA. GV is skipped when the target is empty.
SynthesisOutput synthesize_from_labels(const VoiceModel& model, const std::vector<PhoneLabel>& labels,
                                       const GvTarget& gv, const ExcitationConfig& ex_cfg, double rate = 1.0);

SynthesisOutput synthesize_from_text(const VoiceModel& model, std::string_view text, const Lexicon& lexicon,
                                     const GvTarget& gv, const ExcitationConfig& ex_cfg, double rate = 1.0);

struct EnhancementOutput {
  Waveform audio;
  MelCepstrumSequence mc;  // after GV, one frame per side_f0 frame
  AlignmentResult alignment;
  double log_likelihood_per_frame = 0.0;
};

inline constexpr std::size_t kFrameCountTolerance = 1;

// Aligns the labels against features of `observed`, generates the spectral
// stream on the aligned durations and excites it with `side_f0`. Throws
// FrameCountMismatch when side_f0 and the observed features differ by more
// than kFrameCountTolerance frames.
EnhancementOutput enhance_with_side_info(const VoiceModel& model, const std::vector<PhoneLabel>& labels,
                                         const Waveform& observed, const F0Track& side_f0, const GvTarget& gv,
                                         const ExcitationConfig& ex_cfg, const AnalysisConfig& analysis = {});

// Observation vectors for alignment and training.
Observations extract_observations(const Waveform& wf, const AnalysisConfig& cfg);

TrainingUtterance make_training_utterance(std::string id, const Waveform& wf, std::vector<PhoneLabel> labels,
                                          const AnalysisConfig& cfg);

// Average voice recipe: flat start, monophone re-estimation, context
// cloning, context re-estimation, pruning of rarely seen contexts. The GV
// target is taken from the static spectral columns of the corpus.
struct TrainingRecipe {
  int monophone_iterations = 5;
  int context_iterations = 3;
  double min_occupancy = kDefaultMinOccupancy;
  TrainingConfig config;
};

struct RecipeResult {
  VoiceModel model;
  std::vector<double> log_likelihood;  // every iteration of both passes
};

RecipeResult train_average_voice(const Corpus& corpus, const PhoneSet& phones, const ModelMetadata& metadata,
                                 const TrainingRecipe& recipe = {});

// Phones occurring in the corpus labels.
PhoneSet corpus_phone_set(const Corpus& corpus);

// GV target stored in the model, or an empty target when none was trained.
GvTarget model_gv_target(const VoiceModel& model, double weight);

// Per-utterance seed of batch runs.
inline std::uint64_t utterance_seed(std::uint64_t seed, std::size_t index) {
  return seed ^ static_cast<std::uint64_t>(index);
}

// Corpus quality control.
enum class QcFinding {
  missing_audio,
  missing_label,
  empty_label,
  duration_mismatch,
  clipping,
  inaudible,
  low_snr,
  unreadable_audio,
  malformed_label,
};

std::string_view to_string(QcFinding finding);

struct QcIssue {
  QcFinding kind;
  double measurement = 0.0;  // the quantity compared against the threshold
  std::string detail;
};

struct QcEntry {
  std::string stem;
  std::vector<QcIssue> findings;

  bool has(QcFinding kind) const;
};

struct QcReport {
  std::vector<QcEntry> entries;  // sorted by stem

  std::size_t count(QcFinding kind) const;
  const QcEntry* find(std::string_view stem) const;
};

struct QcConfig {
  double duration_tolerance = 0.2;   // relative
  double clip_fraction = 0.001;      // of samples at full scale
  double inaudible_dbfs = -45.0;     // utterance RMS
  double min_snr_db = 15.0;          // P90 - P10 of frame energies
  FrameConfig frame;
  std::string audio_extension = ".wav";
  std::string label_extension = ".lab";
};

// Pairs files by stem. Throws IoError for unreadable directories.
QcReport validate_corpus(const std::filesystem::path& audio_dir, const std::filesystem::path& label_dir,
                         const QcConfig& cfg = {}, const PhoneSet& phones = PhoneSet::arpabet());

// Frame-energy SNR estimate: 90th minus 10th percentile of frame energies in dB.
double estimate_snr_db(const Waveform& wf, const FrameConfig& frame);

std::string format_qc_report(const QcReport& report);

}  // namespace hmmse
