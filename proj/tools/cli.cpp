#include "cli.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <algorithm>
#include <charconv>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>

#include "hmmse/align.hpp"
#include "hmmse/error.hpp"
#include "hmmse/eval.hpp"
#include "hmmse/features.hpp"
#include "hmmse/hmm.hpp"
#include "hmmse/signal.hpp"
#include "hmmse/toy_corpus.hpp"

namespace hmmse::cli {
namespace {

namespace fs = std::filesystem;
using json = nlohmann::json;

[[noreturn]] void bad_value(const std::string& key, const std::string& reason) {
  throw Error(ErrorCode::ConfigError, key + ": " + reason);
}

template <typename T>
T parse_number(const std::string& key, const std::string& value) {
  T out{};
  const char* first = value.data();
  const char* last = first + value.size();
  const auto [ptr, ec] = std::from_chars(first, last, out);
  if (ec != std::errc() || ptr != last) bad_value(key, "not a number: '" + value + "'");
  return out;
}

int parse_positive_int(const std::string& key, const std::string& value) {
  const int v = parse_number<int>(key, value);
  if (v <= 0) bad_value(key, "must be positive");
  return v;
}

std::string trim(std::string s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string::npos) return {};
  const auto last = s.find_last_not_of(" \t\r\n");
  return s.substr(first, last - first + 1);
}

struct Setting {
  std::string key;
  void (*apply)(RunConfig&, const std::string& key, const std::string& value);
};

const std::vector<Setting>& settings() {
  static const std::vector<Setting> table = {
      {"frame_length", [](RunConfig& c, const auto& k, const auto& v) { c.analysis.frame.frame_length = parse_positive_int(k, v); }},
      {"frame_shift", [](RunConfig& c, const auto& k, const auto& v) { c.analysis.frame.frame_shift = parse_positive_int(k, v); }},
      {"window",
       [](RunConfig& c, const auto& k, const auto& v) {
         if (v == "hamming") c.analysis.frame.window = WindowKind::hamming;
         else if (v == "hann") c.analysis.frame.window = WindowKind::hann;
         else if (v == "rectangular") c.analysis.frame.window = WindowKind::rectangular;
         else bad_value(k, "expected hamming, hann or rectangular");
       }},
      {"fft_size", [](RunConfig& c, const auto& k, const auto& v) { c.analysis.fft_size = parse_positive_int(k, v); }},
      {"f0_min", [](RunConfig& c, const auto& k, const auto& v) { c.analysis.f0_min = parse_number<double>(k, v); }},
      {"f0_max", [](RunConfig& c, const auto& k, const auto& v) { c.analysis.f0_max = parse_number<double>(k, v); }},
      {"vuv_threshold", [](RunConfig& c, const auto& k, const auto& v) { c.analysis.vuv_threshold = parse_number<double>(k, v); }},
      {"median_width", [](RunConfig& c, const auto& k, const auto& v) { c.analysis.median_width = parse_positive_int(k, v); }},
      {"order", [](RunConfig& c, const auto& k, const auto& v) { c.analysis.order = parse_positive_int(k, v); }},
      {"alpha",
       [](RunConfig& c, const auto& k, const auto& v) {
         const double a = parse_number<double>(k, v);
         if (!(a > -1.0 && a < 1.0)) bad_value(k, "out of (-1, 1)");
         c.analysis.alpha = a;
       }},
      {"sample_rate", [](RunConfig& c, const auto& k, const auto& v) { c.sample_rate = parse_positive_int(k, v); }},
      {"seed",
       [](RunConfig& c, const auto& k, const auto& v) {
         c.excitation.seed = parse_number<std::uint64_t>(k, v);
         c.interference.seed = c.excitation.seed;
       }},
      {"noise_gain",
       [](RunConfig& c, const auto& k, const auto& v) {
         const double g = parse_number<double>(k, v);
         if (!(g >= 0.0)) bad_value(k, "must be non-negative");
         c.excitation.noise_gain = g;
       }},
      {"pulse_gain",
       [](RunConfig& c, const auto& k, const auto& v) {
         if (v == "energy") c.excitation.pulse_gain = PulseGain::unit_energy_per_period;
         else if (v == "amplitude") c.excitation.pulse_gain = PulseGain::unit_amplitude;
         else bad_value(k, "expected energy or amplitude");
       }},
      {"gv_weight",
       [](RunConfig& c, const auto& k, const auto& v) {
         const double w = parse_number<double>(k, v);
         if (!(w >= 0.0 && w <= 1.0)) bad_value(k, "out of [0, 1]");
         c.gv.weight = w;
       }},
      {"gv_iterations",
       [](RunConfig& c, const auto& k, const auto& v) {
         const int n = parse_number<int>(k, v);
         if (n < 0) bad_value(k, "must be non-negative");
         c.gv.iterations = n;
       }},
      {"gv_step",
       [](RunConfig& c, const auto& k, const auto& v) {
         const double s = parse_number<double>(k, v);
         if (!(s > 0.0)) bad_value(k, "must be positive");
         c.gv.step = s;
       }},
      {"interference",
       [](RunConfig& c, const auto& k, const auto& v) {
         if (v == "noise") c.interference.kind = InterferenceKind::additive_noise;
         else if (v == "reverb") c.interference.kind = InterferenceKind::reverberation;
         else if (v == "speaker") c.interference.kind = InterferenceKind::competing_speaker;
         else bad_value(k, "expected noise, reverb or speaker");
       }},
      {"snr_db", [](RunConfig& c, const auto& k, const auto& v) { c.interference.snr_db = parse_number<double>(k, v); }},
      {"rt60",
       [](RunConfig& c, const auto& k, const auto& v) {
         const double r = parse_number<double>(k, v);
         if (!(r > 0.0)) bad_value(k, "must be positive");
         c.interference.rt60_seconds = r;
       }},
      {"context",
       [](RunConfig& c, const auto& k, const auto& v) {
         if (v == "triphone") c.context = ContextWidth::triphone;
         else if (v == "quinphone") c.context = ContextWidth::quinphone;
         else bad_value(k, "expected triphone or quinphone");
       }},
      {"iterations",
       [](RunConfig& c, const auto& k, const auto& v) { c.recipe.monophone_iterations = parse_positive_int(k, v); }},
      {"context_iterations",
       [](RunConfig& c, const auto& k, const auto& v) {
         const int n = parse_number<int>(k, v);
         if (n < 0) bad_value(k, "must be non-negative");
         c.recipe.context_iterations = n;
       }},
      {"min_occupancy",
       [](RunConfig& c, const auto& k, const auto& v) {
         const double o = parse_number<double>(k, v);
         if (!(o >= 0.0)) bad_value(k, "must be non-negative");
         c.recipe.min_occupancy = o;
       }},
      {"workers", [](RunConfig& c, const auto& k, const auto& v) { c.recipe.config.workers = parse_positive_int(k, v); }},
      {"adapt_iterations", [](RunConfig& c, const auto& k, const auto& v) { c.adapt_iterations = parse_positive_int(k, v); }},
      {"rate",
       [](RunConfig& c, const auto& k, const auto& v) {
         const double r = parse_number<double>(k, v);
         if (!(r > 0.0)) bad_value(k, "must be positive");
         c.rate = r;
       }},
  };
  return table;
}

// ---------------------------------------------------------------- helpers

Overrides parse_assignments(const std::vector<std::string>& items) {
  Overrides out;
  for (const auto& item : items) {
    const auto eq = item.find('=');
    if (eq == std::string::npos) throw Error(ErrorCode::ConfigError, "expected key=value, got '" + item + "'");
    out.emplace_back(trim(item.substr(0, eq)), trim(item.substr(eq + 1)));
  }
  return out;
}

struct CommonOptions {
  std::string config_path;
  std::vector<std::string> sets;
  std::optional<std::uint64_t> seed;
  std::optional<int> workers;

  RunConfig resolve() const {
    Overrides overrides = parse_assignments(sets);
    if (seed) overrides.emplace_back("seed", std::to_string(*seed));
    if (workers) overrides.emplace_back("workers", std::to_string(*workers));
    return load_config(config_path, overrides);
  }
};

void add_common(CLI::App* app, CommonOptions& common) {
  app->add_option("--config", common.config_path, "key = value configuration file");
  app->add_option("--set", common.sets, "override one setting, key=value")->allow_extra_args(false);
  app->add_option("--seed", common.seed, "seed for every stochastic step");
  app->add_option("--workers", common.workers, "worker threads for training and adaptation");
}

// Analysis settings must match the model the features feed.
AnalysisConfig analysis_for(const RunConfig& cfg, const VoiceModel& model) {
  AnalysisConfig a = cfg.analysis;
  a.order = model.metadata.order;
  a.alpha = model.metadata.alpha;
  a.frame.frame_shift = model.metadata.frame_shift;
  return a;
}

GvTarget gv_for(const RunConfig& cfg, const VoiceModel& model) {
  GvTarget gv = cfg.gv;
  gv.target = model.metadata.gv_target;
  return gv;
}

std::map<std::string, fs::path> files_by_stem(const fs::path& dir, const std::string& extension) {
  if (!fs::is_directory(dir)) throw Error(ErrorCode::IoError, "not a directory: " + dir.string());
  std::map<std::string, fs::path> out;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (entry.is_regular_file() && entry.path().extension() == extension) out[entry.path().stem().string()] = entry.path();
  }
  return out;
}

Corpus load_corpus(const fs::path& audio_dir, const fs::path& label_dir, const AnalysisConfig& analysis,
                   std::ostream& err) {
  const auto audio = files_by_stem(audio_dir, ".wav");
  const auto labels = files_by_stem(label_dir, ".lab");
  Corpus corpus;
  for (const auto& [stem, lab] : labels) {
    const auto it = audio.find(stem);
    if (it == audio.end()) {
      err << "warning: no audio for " << stem << ", skipped\n";
      continue;
    }
    corpus.push_back(make_training_utterance(stem, read_wav(it->second), parse_label_file(lab), analysis));
  }
  for (const auto& [stem, wav] : audio) {
    if (!labels.contains(stem)) err << "warning: no labels for " << stem << ", skipped\n";
  }
  if (corpus.empty()) throw Error(ErrorCode::EmptyCorpus, "no audio/label pairs found");
  return corpus;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::IoError, "cannot open " + path.string() + " for writing");
  out << text;
  if (!out) throw Error(ErrorCode::IoError, "write failed for " + path.string());
}

void save_wav(const Waveform& wf, const fs::path& path, std::ostream& err) {
  const auto report = write_wav(wf, path);
  if (report.clipped_samples > 0) err << "warning: " << report.clipped_samples << " samples clipped in " << path.string() << '\n';
}

// ------------------------------------------------------------ subcommands

struct Paths {
  std::string in, out, f0, mgc, model, labels, observed, side_f0, audio_dir, label_dir, text, lexicon, ref, test,
      competing, clean;
  int fft_size = 512;
  bool normalize = false;
  bool side_from_observed = false;
  std::size_t lag = 0;
  std::size_t utterances = 60;
  double min_seconds = 2.0, max_seconds = 4.0;
};

void cmd_analyze(const RunConfig& cfg, const Paths& p, std::ostream& out) {
  if (p.f0.empty() && p.mgc.empty()) throw Error(ErrorCode::ConfigError, "analyze needs --f0 and/or --mgc");
  const Waveform wf = read_wav(p.in);
  const auto oracle = oracle_components(wf, cfg.analysis);
  if (!p.f0.empty()) write_feature_file(to_feature_file(oracle.f0), p.f0);
  if (!p.mgc.empty()) write_feature_file(to_feature_file(oracle.mc), p.mgc);
  out << json{{"frames", oracle.f0.size()}, {"voiced", oracle.f0.voiced_count()}}.dump() << '\n';
}

void cmd_resynth(const RunConfig& cfg, const Paths& p, std::ostream& err) {
  save_wav(resynthesize(read_wav(p.in), cfg.analysis, cfg.excitation), p.out, err);
}

void cmd_degrade(const RunConfig& cfg, const Paths& p, std::ostream& out, std::ostream& err) {
  const Waveform clean = read_wav(p.in);
  std::optional<Waveform> competing;
  if (!p.competing.empty()) competing = read_wav(p.competing);
  const Waveform mixed = add_interference(clean, cfg.interference, competing);
  save_wav(mixed, p.out, err);
  out << json{{"snr_db", measure_snr(clean, mixed)}}.dump() << '\n';
}

void cmd_train(const RunConfig& cfg, const Paths& p, std::ostream& out, std::ostream& err) {
  const Corpus corpus = load_corpus(p.audio_dir, p.label_dir, cfg.analysis, err);
  ModelMetadata md;
  md.alpha = cfg.analysis.alpha;
  md.order = cfg.analysis.order;
  md.frame_shift = cfg.analysis.frame.frame_shift;
  md.sample_rate = cfg.sample_rate;
  md.context_width = cfg.context;
  const RecipeResult result = train_average_voice(corpus, corpus_phone_set(corpus), md, cfg.recipe);
  write_model(result.model, p.out);
  out << json{{"utterances", corpus.size()},
              {"context_models", result.model.models.size()},
              {"monophones", result.model.backoff.size()},
              {"log_likelihood", result.log_likelihood}}
             .dump(2)
      << '\n';
}

void cmd_adapt(const RunConfig& cfg, const Paths& p, std::ostream& out, std::ostream& err) {
  const VoiceModel model = read_model(p.model);
  const Corpus corpus = load_corpus(p.audio_dir, p.label_dir, analysis_for(cfg, model), err);
  AdaptationConfig ac;
  ac.iterations = cfg.adapt_iterations;
  ac.workers = cfg.recipe.config.workers;
  const VoiceModel adapted = adapt_mllr(model, corpus, ac);
  write_model(adapted, p.out);
  out << json{{"utterances", corpus.size()}, {"log", adapted.metadata.training_log}}.dump(2) << '\n';
}

void cmd_align(const RunConfig& cfg, const Paths& p, std::ostream& out) {
  const VoiceModel model = read_model(p.model);
  const auto labels = parse_label_file(p.labels);
  const Observations obs = extract_observations(read_wav(p.in), analysis_for(cfg, model));
  const AlignmentResult result = viterbi_align(model, labels, obs);
  write_label_file(alignment_to_labels(result, model.metadata.frame_shift, model.metadata.sample_rate), p.out);
  out << json{{"frames", result.frames}, {"log_likelihood", result.log_likelihood}}.dump() << '\n';
}

void cmd_synth(const RunConfig& cfg, const Paths& p, std::ostream& err) {
  const VoiceModel model = read_model(p.model);
  std::vector<PhoneLabel> labels;
  if (!p.labels.empty()) {
    labels = parse_label_file(p.labels);
  } else if (!p.text.empty() && !p.lexicon.empty()) {
    labels = text_to_phonemes(p.text, load_lexicon(p.lexicon));
  } else {
    throw Error(ErrorCode::ConfigError, "synth needs --labels or --text with --lexicon");
  }
  const SynthesisOutput syn = synthesize_from_labels(model, labels, gv_for(cfg, model), cfg.excitation, cfg.rate);
  save_wav(syn.audio, p.out, err);
  if (!p.mgc.empty()) write_feature_file(to_feature_file(syn.mc), p.mgc);
  if (!p.f0.empty()) write_feature_file(to_feature_file(syn.f0), p.f0);
}

void cmd_enhance(const RunConfig& cfg, const Paths& p, std::ostream& out, std::ostream& err) {
  const VoiceModel model = read_model(p.model);
  const AnalysisConfig analysis = analysis_for(cfg, model);
  const auto labels = parse_label_file(p.labels);
  const Waveform observed = read_wav(p.observed);
  F0Track side;
  if (p.side_from_observed) {
    side = estimate_f0(observed, analysis);
  } else if (!p.side_f0.empty()) {
    side = f0_from_feature_file(read_feature_file(p.side_f0));
  } else {
    throw Error(ErrorCode::ConfigError, "enhance needs --side-f0 or --side-from-observed");
  }
  // The alignment sees the clean signal when one is given (oracle mode).
  const Waveform align_on = p.clean.empty() ? observed : read_wav(p.clean);
  const EnhancementOutput enh =
      enhance_with_side_info(model, labels, align_on, side, gv_for(cfg, model), cfg.excitation, analysis);
  save_wav(enh.audio, p.out, err);
  if (!p.mgc.empty()) write_feature_file(to_feature_file(enh.mc), p.mgc);
  out << json{{"frames", enh.mc.size()},
              {"aligned_on", p.clean.empty() ? "observed" : "clean"},
              {"log_likelihood_per_frame", enh.log_likelihood_per_frame}}
             .dump()
      << '\n';
}

void cmd_corpus_check(const RunConfig& cfg, const Paths& p, std::ostream& out) {
  QcConfig qc;
  qc.frame = cfg.analysis.frame;
  const QcReport report = validate_corpus(p.audio_dir, p.label_dir, qc);
  if (p.out.empty()) {
    out << format_qc_report(report) << '\n';
  } else {
    write_text(p.out, format_qc_report(report) + "\n");
  }
}

void cmd_metrics(const RunConfig& cfg, const Paths& p, std::ostream& out) {
  const Waveform ref = read_wav(p.ref);
  const Waveform test = read_wav(p.test);
  const auto a = oracle_components(ref, cfg.analysis);
  const auto b = oracle_components(test, cfg.analysis);
  if (p.lag >= a.mc.size()) throw Error(ErrorCode::ConfigError, "lag exceeds the reference length");
  const std::size_t n = std::min(a.mc.size() - p.lag, b.mc.size());

  MetricReport report;
  if (a.mc.size() - p.lag == b.mc.size()) {
    report.mcd_db = mcd(slice_frames(a.mc, p.lag, n), slice_frames(b.mc, 0, n));
  } else {
    report.mcd_db = mcd_dtw(slice_frames(a.mc, p.lag, a.mc.size() - p.lag), b.mc);
  }
  report.f0 = f0_metrics(slice_frames(a.f0, p.lag, n), slice_frames(b.f0, 0, n));
  const TriptychReport tri = triptych(spectrogram(test, cfg.analysis.frame, cfg.analysis.fft_size));
  report.band_energies.push_back(tri.low_band);
  for (const auto& band : tri.formant_bands) report.band_energies.push_back(band);
  report.spikes = detect_spikes(test);
  if (p.out.empty()) {
    out << format_metric_report(report) << '\n';
  } else {
    write_text(p.out, format_metric_report(report) + "\n");
  }
}

void cmd_spectrogram(const RunConfig& cfg, const Paths& p) {
  export_spectrogram(spectrogram(read_wav(p.in), cfg.analysis.frame, p.fft_size, p.normalize), p.out);
}

void cmd_toy_corpus(const RunConfig& cfg, const Paths& p, std::ostream& out, std::ostream& err) {
  ToyCorpusConfig tc;
  tc.utterances = p.utterances;
  tc.seed = cfg.excitation.seed;
  tc.min_seconds = p.min_seconds;
  tc.max_seconds = p.max_seconds;
  tc.sample_rate = cfg.sample_rate;
  tc.frame_shift = cfg.analysis.frame.frame_shift;
  const ToyCorpus corpus = make_toy_corpus(tc);
  const fs::path root(p.out);
  fs::create_directories(root / "wav");
  fs::create_directories(root / "lab");
  std::string texts, lexicon;
  for (const auto& utt : corpus.utterances) {
    save_wav(utt.audio, root / "wav" / (utt.id + ".wav"), err);
    write_label_file(utt.labels, root / "lab" / (utt.id + ".lab"));
    texts += utt.id + ' ' + utt.text + '\n';
  }
  for (const auto& [word, phones] : corpus.lexicon.entries()) {
    lexicon += word;
    for (const auto& ph : phones) lexicon += ' ' + ph;
    lexicon += '\n';
  }
  write_text(root / "text.txt", texts);
  write_text(root / "lexicon.txt", lexicon);
  out << json{{"utterances", corpus.utterances.size()}}.dump() << '\n';
}

const std::vector<std::string>& subcommand_names() {
  static const std::vector<std::string> names = {"analyze", "resynth", "degrade",     "train",   "adapt",
                                                 "align",   "synth",   "enhance",     "corpus-check",
                                                 "metrics", "spectrogram", "toy-corpus"};
  return names;
}

bool is_validation(ErrorCode code) { return code == ErrorCode::ConfigError || code == ErrorCode::UnknownSubcommand; }

}  // namespace

// ------------------------------------------------------------ config

Overrides parse_config_text(const std::string& text) {
  Overrides out;
  std::istringstream in(text);
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw Error(ErrorCode::ConfigError, "line " + std::to_string(line_no) + ": expected key = value");
    }
    std::string key = trim(line.substr(0, eq));
    if (key.empty()) throw Error(ErrorCode::ConfigError, "line " + std::to_string(line_no) + ": empty key");
    out.emplace_back(std::move(key), trim(line.substr(eq + 1)));
  }
  return out;
}

void apply_setting(RunConfig& cfg, const std::string& key, const std::string& value) {
  for (const auto& s : settings()) {
    if (s.key == key) {
      s.apply(cfg, key, value);
      return;
    }
  }
  throw Error(ErrorCode::ConfigError, key + ": unknown key");
}

const std::vector<std::string>& config_keys() {
  static const std::vector<std::string> keys = [] {
    std::vector<std::string> out;
    for (const auto& s : settings()) out.push_back(s.key);
    return out;
  }();
  return keys;
}

void validate(const RunConfig& cfg) {
  try {
    validate(cfg.analysis, cfg.sample_rate);
  } catch (const Error& e) {
    throw Error(ErrorCode::ConfigError, std::string("analysis: ") + e.what());
  }
}

RunConfig load_config(const fs::path& path, const Overrides& overrides) {
  RunConfig cfg;
  if (!path.empty()) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorCode::ConfigError, "cannot read config file " + path.string());
    std::ostringstream text;
    text << in.rdbuf();
    for (const auto& [key, value] : parse_config_text(text.str())) apply_setting(cfg, key, value);
  }
  for (const auto& [key, value] : overrides) apply_setting(cfg, key, value);
  validate(cfg);
  return cfg;
}

// ------------------------------------------------------------ entry point

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"HMM-based speech synthesis and side-information enhancement toolkit", "hmmse"};
  app.require_subcommand(1);
  app.set_help_all_flag("--help-all", "help for every subcommand");

  CommonOptions common;
  Paths p;
  std::map<std::string, CLI::App*> subs;
  const auto sub = [&](const std::string& name, const std::string& description) {
    CLI::App* s = app.add_subcommand(name, description);
    add_common(s, common);
    subs[name] = s;
    return s;
  };

  auto* analyze = sub("analyze", "extract log-F0 and mel-cepstrum feature files");
  analyze->add_option("--in", p.in, "input wav")->required();
  analyze->add_option("--f0", p.f0, "output F0 feature file");
  analyze->add_option("--mgc", p.mgc, "output mel-cepstrum feature file");

  auto* resynth = sub("resynth", "analysis followed by vocoder resynthesis");
  resynth->add_option("--in", p.in, "input wav")->required();
  resynth->add_option("--out", p.out, "output wav")->required();

  auto* degrade = sub("degrade", "add noise, reverberation or a competing speaker");
  degrade->add_option("--in", p.in, "clean wav")->required();
  degrade->add_option("--out", p.out, "degraded wav")->required();
  degrade->add_option("--competing", p.competing, "competing speaker wav");

  auto* train = sub("train", "train an average voice model");
  train->add_option("--audio-dir", p.audio_dir, "directory of .wav files")->required();
  train->add_option("--label-dir", p.label_dir, "directory of .lab files")->required();
  train->add_option("--out", p.out, "output model")->required();

  auto* adapt = sub("adapt", "MLLR adaptation of a model");
  adapt->add_option("--model", p.model, "input model")->required();
  adapt->add_option("--audio-dir", p.audio_dir, "directory of .wav files")->required();
  adapt->add_option("--label-dir", p.label_dir, "directory of .lab files")->required();
  adapt->add_option("--out", p.out, "output model")->required();

  auto* align = sub("align", "forced alignment of a label sequence");
  align->add_option("--model", p.model, "model")->required();
  align->add_option("--labels", p.labels, "label file")->required();
  align->add_option("--in", p.in, "wav")->required();
  align->add_option("--out", p.out, "timed label file")->required();

  auto* synth = sub("synth", "synthesis from labels or text");
  synth->add_option("--model", p.model, "model")->required();
  synth->add_option("--labels", p.labels, "label file");
  synth->add_option("--text", p.text, "text to synthesize");
  synth->add_option("--lexicon", p.lexicon, "lexicon for --text");
  synth->add_option("--out", p.out, "output wav")->required();
  synth->add_option("--mgc", p.mgc, "also write the generated mel-cepstrum");
  synth->add_option("--f0", p.f0, "also write the generated F0");

  auto* enhance = sub("enhance", "synthesis with alignment and pitch side information");
  enhance->add_option("--model", p.model, "model")->required();
  enhance->add_option("--labels", p.labels, "label file")->required();
  enhance->add_option("--observed", p.observed, "observed (degraded) wav")->required();
  enhance->add_option("--side-f0", p.side_f0, "F0 feature file of the clean signal");
  enhance->add_flag("--side-from-observed", p.side_from_observed, "take the pitch from the observed signal");
  enhance->add_option("--clean", p.clean, "clean wav to align on instead of the observed one");
  enhance->add_option("--out", p.out, "output wav")->required();
  enhance->add_option("--mgc", p.mgc, "also write the generated mel-cepstrum");

  auto* check = sub("corpus-check", "quality control of a wav/lab corpus");
  check->add_option("--audio-dir", p.audio_dir, "directory of .wav files")->required();
  check->add_option("--label-dir", p.label_dir, "directory of .lab files")->required();
  check->add_option("--out", p.out, "JSON report (default: standard output)");

  auto* metrics = sub("metrics", "objective comparison of two recordings");
  metrics->add_option("--ref", p.ref, "reference wav")->required();
  metrics->add_option("--test", p.test, "test wav")->required();
  metrics->add_option("--lag", p.lag, "reference frames to skip");
  metrics->add_option("--out", p.out, "JSON report (default: standard output)");

  auto* spec = sub("spectrogram", "write a spectrogram as .csv and .pgm");
  spec->add_option("--in", p.in, "input wav")->required();
  spec->add_option("--out", p.out, "output path without extension")->required();
  spec->add_option("--fft", p.fft_size, "FFT size");
  spec->add_flag("--normalize", p.normalize, "0 dB at the loudest bin");

  auto* toy = sub("toy-corpus", "generate the synthetic evaluation corpus");
  toy->add_option("--out", p.out, "output directory")->required();
  toy->add_option("--utterances", p.utterances, "number of utterances");
  toy->add_option("--min-seconds", p.min_seconds, "shortest utterance");
  toy->add_option("--max-seconds", p.max_seconds, "longest utterance");

  if (!args.empty() && !args.front().starts_with('-') &&
      std::find(subcommand_names().begin(), subcommand_names().end(), args.front()) == subcommand_names().end()) {
    err << "UnknownSubcommand: " << args.front() << "\n\n" << app.help();
    return kExitValidation;
  }

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    // Subcommand help is raised as a parse error carrying success.
    if (e.get_exit_code() == 0) {
      for (const auto* s : app.get_subcommands()) {
        out << s->help();
        return kExitOk;
      }
      out << app.help();
      return kExitOk;
    }
    err << e.what() << "\n\n";
    const auto chosen = app.get_subcommands();
    err << (chosen.empty() ? app.help() : chosen.front()->help());
    return kExitValidation;
  }

  const std::string name = app.get_subcommands().front()->get_name();
  try {
    const RunConfig cfg = common.resolve();
    if (name == "analyze") cmd_analyze(cfg, p, out);
    else if (name == "resynth") cmd_resynth(cfg, p, err);
    else if (name == "degrade") cmd_degrade(cfg, p, out, err);
    else if (name == "train") cmd_train(cfg, p, out, err);
    else if (name == "adapt") cmd_adapt(cfg, p, out, err);
    else if (name == "align") cmd_align(cfg, p, out);
    else if (name == "synth") cmd_synth(cfg, p, err);
    else if (name == "enhance") cmd_enhance(cfg, p, out, err);
    else if (name == "corpus-check") cmd_corpus_check(cfg, p, out);
    else if (name == "metrics") cmd_metrics(cfg, p, out);
    else if (name == "spectrogram") cmd_spectrogram(cfg, p);
    else if (name == "toy-corpus") cmd_toy_corpus(cfg, p, out, err);
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return is_validation(e.code()) ? kExitValidation : kExitProcessing;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitProcessing;
  }
  return kExitOk;
}

int run(int argc, char** argv) {
  std::vector<std::string> args;
  for (int i = 1; i < argc; ++i) args.emplace_back(argv[i]);
  return run(args, std::cout, std::cerr);
}

}  // namespace hmmse::cli
