#include "hmmse/enhance.hpp"

#include <cmath>
#include <random>
#include <set>

#include "hmmse/error.hpp"
#include "hmmse/spectral.hpp"

namespace hmmse {
namespace {

double power(std::span<const double> x) {
  if (x.empty()) return 0.0;
  double acc = 0.0;
  for (const double v : x) acc += v * v;
  return acc / static_cast<double>(x.size());
}

// Adds `interferer` scaled so that the clean-to-interferer power ratio is snr_db.
Waveform mix_at_snr(const Waveform& clean, const std::vector<double>& interferer, double snr_db) {
  if (!std::isfinite(snr_db)) throw Error(ErrorCode::ConfigError, "SNR must be finite");
  const double p_clean = power(clean.samples);
  if (p_clean == 0.0) throw Error(ErrorCode::SilentSignal, "cannot set an SNR against a silent signal");
  const double p_int = power(interferer);
  if (p_int == 0.0) throw Error(ErrorCode::SilentSignal, "interfering signal is silent");
  const double gain = std::sqrt(p_clean / (p_int * std::pow(10.0, snr_db / 10.0)));
  Waveform out = clean;
  for (std::size_t i = 0; i < out.samples.size(); ++i) out.samples[i] += gain * interferer[i];
  return out;
}

GvTarget effective_gv(const GvTarget& gv, Eigen::Index width) {
  GvTarget out = gv;
  if (gv.target.size() != 0 && gv.target.size() != width) {
    throw Error(ErrorCode::DimensionMismatch, "GV target does not match the model order");
  }
  return out;
}

MelCepstrumSequence apply_gv(const GeneratedParameters& gen, const GvTarget& gv) {
  MelCepstrumSequence mc = gen.mc;
  const GvTarget g = effective_gv(gv, mc.width());
  if (g.target.size() != 0 && g.weight > 0.0) mc.frames = gv_enhance(gen.mc.frames, g, gen.spectral);
  return mc;
}

}  // namespace

OracleComponents oracle_components(const Waveform& clean, const AnalysisConfig& cfg) {
  return {estimate_f0(clean, cfg), mgc_analysis(clean, cfg)};
}

std::vector<double> reverb_impulse_response(double rt60_seconds, int sample_rate, std::uint64_t seed) {
  if (!(rt60_seconds > 0.0)) throw Error(ErrorCode::ConfigError, "rt60 must be positive");
  const double decay_samples = rt60_seconds * sample_rate;
  const auto length = static_cast<std::size_t>(std::ceil(1.5 * decay_samples));
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<double> h(std::max<std::size_t>(length, 1));
  for (std::size_t n = 0; n < h.size(); ++n) {
    h[n] = normal(rng) * std::pow(10.0, -3.0 * static_cast<double>(n) / decay_samples);
  }
  return h;
}

Waveform add_interference(const Waveform& clean, const InterferenceSpec& spec,
                          const std::optional<Waveform>& competing) {
  if (clean.samples.empty()) throw Error(ErrorCode::EmptySignal, "clean signal is empty");
  switch (spec.kind) {
    case InterferenceKind::additive_noise: {
      std::mt19937_64 rng(spec.seed);
      std::normal_distribution<double> normal(0.0, 1.0);
      std::vector<double> noise(clean.size());
      for (auto& v : noise) v = normal(rng);
      return mix_at_snr(clean, noise, spec.snr_db);
    }
    case InterferenceKind::competing_speaker: {
      if (!competing) throw Error(ErrorCode::MissingCompetingSignal, "competing speaker needs a second waveform");
      if (competing->samples.empty()) throw Error(ErrorCode::LengthMismatch, "competing signal is empty");
      if (competing->sample_rate != clean.sample_rate) {
        throw Error(ErrorCode::ConfigError, "competing signal has a different sample rate");
      }
      std::vector<double> other(clean.size(), 0.0);
      std::copy_n(competing->samples.begin(), std::min(other.size(), competing->samples.size()), other.begin());
      return mix_at_snr(clean, other, spec.snr_db);
    }
    case InterferenceKind::reverberation: {
      const auto h = reverb_impulse_response(spec.rt60_seconds, clean.sample_rate, spec.seed);
      auto wet = fft_convolve(clean.samples, h);
      wet.resize(clean.size());
      Waveform out{std::move(wet), clean.sample_rate};
      const double target = peak(clean.samples);
      const double current = peak(out.samples);
      if (current > 0.0 && target > 0.0) {
        for (auto& v : out.samples) v *= target / current;
      }
      return out;
    }
  }
  throw Error(ErrorCode::ConfigError, "unknown interference kind");
}

double measure_snr(const Waveform& clean, const Waveform& mixture) {
  if (clean.size() != mixture.size()) throw Error(ErrorCode::LengthMismatch, "signals differ in length");
  double signal = 0.0, noise = 0.0;
  for (std::size_t i = 0; i < clean.size(); ++i) {
    signal += clean.samples[i] * clean.samples[i];
    const double d = mixture.samples[i] - clean.samples[i];
    noise += d * d;
  }
  return 10.0 * std::log10(signal / noise);
}

Observations extract_observations(const Waveform& wf, const AnalysisConfig& cfg) {
  const auto oracle = oracle_components(wf, cfg);
  return make_observations(oracle.mc, oracle.f0);
}

TrainingUtterance make_training_utterance(std::string id, const Waveform& wf, std::vector<PhoneLabel> labels,
                                          const AnalysisConfig& cfg) {
  return {std::move(id), std::move(labels), extract_observations(wf, cfg)};
}

RecipeResult train_average_voice(const Corpus& corpus, const PhoneSet& phones, const ModelMetadata& metadata,
                                 const TrainingRecipe& recipe) {
  if (corpus.empty()) throw Error(ErrorCode::EmptyCorpus, "no training utterances");
  RecipeResult out;
  const TrainingResult mono = baum_welch(flat_start(corpus, phones, metadata), corpus, recipe.monophone_iterations,
                                         recipe.config);
  out.log_likelihood = mono.log_likelihood;
  const TrainingResult ctx = baum_welch(add_context_models(mono.model, corpus), corpus, recipe.context_iterations,
                                        recipe.config);
  out.log_likelihood.insert(out.log_likelihood.end(), ctx.log_likelihood.begin(), ctx.log_likelihood.end());
  out.model = tie_backoff(ctx.model, recipe.min_occupancy);

  std::vector<MelCepstrumSequence> statics;
  statics.reserve(corpus.size());
  const int width = metadata.order + 1;
  for (const auto& utt : corpus) {
    MelCepstrumSequence mc;
    mc.order = metadata.order;
    mc.alpha = metadata.alpha;
    mc.frame_shift = metadata.frame_shift;
    mc.frames = utt.observations.spectral.leftCols(width);
    statics.push_back(std::move(mc));
  }
  out.model.metadata.gv_target = model_gv_stats(statics).target;
  return out;
}

PhoneSet corpus_phone_set(const Corpus& corpus) {
  std::set<std::string> phones;
  for (const auto& utt : corpus) {
    for (const auto& l : utt.labels) phones.insert(l.phoneme);
  }
  return PhoneSet(std::move(phones));
}

GvTarget model_gv_target(const VoiceModel& model, double weight) {
  GvTarget gv;
  gv.target = model.metadata.gv_target;
  gv.weight = weight;
  return gv;
}

SynthesisOutput synthesize_from_labels(const VoiceModel& model, const std::vector<PhoneLabel>& labels,
                                       const GvTarget& gv, const ExcitationConfig& ex_cfg, double rate) {
  const auto contexts = expand_context(labels, model.metadata.context_width);
  SynthesisOutput out;
  out.states = predict_durations(model, contexts, rate);
  const GeneratedParameters gen = mlpg(model, out.states);
  out.mc = apply_gv(gen, gv);
  out.f0 = gen.f0;
  out.audio = vocode(out.f0, out.mc, model.metadata.sample_rate, ex_cfg);
  return out;
}

SynthesisOutput synthesize_from_text(const VoiceModel& model, std::string_view text, const Lexicon& lexicon,
                                     const GvTarget& gv, const ExcitationConfig& ex_cfg, double rate) {
  return synthesize_from_labels(model, text_to_phonemes(text, lexicon), gv, ex_cfg, rate);
}

EnhancementOutput enhance_with_side_info(const VoiceModel& model, const std::vector<PhoneLabel>& labels,
                                         const Waveform& observed, const F0Track& side_f0, const GvTarget& gv,
                                         const ExcitationConfig& ex_cfg, const AnalysisConfig& analysis) {
  const Observations obs = extract_observations(observed, analysis);
  const std::size_t observed_frames = obs.frames();
  const std::size_t target_frames = side_f0.size();
  const std::size_t gap = observed_frames > target_frames ? observed_frames - target_frames
                                                          : target_frames - observed_frames;
  if (gap > kFrameCountTolerance) {
    throw Error(ErrorCode::FrameCountMismatch, "side F0 has " + std::to_string(target_frames) +
                                                   " frames, observed signal " + std::to_string(observed_frames));
  }

  EnhancementOutput out;
  out.alignment = viterbi_align(model, labels, obs);
  out.log_likelihood_per_frame = out.alignment.log_likelihood / static_cast<double>(observed_frames);

  StateSequence seq = aligned_state_sequence(model, labels, out.alignment);
  if (target_frames > observed_frames) {
    seq.durations.back() += target_frames - observed_frames;
  } else if (target_frames < observed_frames) {
    std::size_t s = seq.durations.size();
    while (s-- > 0 && seq.durations[s] < 2) {
    }
    if (s >= seq.durations.size()) throw Error(ErrorCode::FrameCountMismatch, "no state can absorb the frame difference");
    seq.durations[s] -= observed_frames - target_frames;
  }

  const GeneratedParameters gen = mlpg(model, seq);
  out.mc = apply_gv(gen, gv);
  out.audio = vocode(side_f0, out.mc, observed.sample_rate, ex_cfg);
  return out;
}

}  // namespace hmmse
