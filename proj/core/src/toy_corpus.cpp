#include "hmmse/toy_corpus.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numbers>
#include <random>

#include "hmmse/error.hpp"
#include "hmmse/vocoder.hpp"

namespace hmmse {
namespace {

struct Formant {
  double hz;
  double width;  // Gaussian width of the dB bump
  double gain_db;
};

struct PhoneSpec {
  bool voiced;
  double base_db;
  double tilt_db_per_khz;
  std::vector<Formant> formants;
  int min_frames;
  int max_frames;
};

constexpr int kToyOrder = 24;
constexpr double kToyAlpha = 0.42;
constexpr int kToyFftSize = 512;
constexpr double kToySampleRate = 16000.0;
constexpr double kLevelDb = 20.0;

const std::map<std::string, PhoneSpec>& phone_specs() {
  static const std::map<std::string, PhoneSpec> specs = {
      {"aa", {true, -42.0, -2.0, {{730, 90, 26}, {1090, 110, 22}, {2440, 160, 16}}, 18, 30}},
      {"iy", {true, -42.0, -2.0, {{270, 60, 24}, {2290, 120, 20}, {3010, 160, 18}}, 18, 30}},
      {"uw", {true, -42.0, -2.0, {{300, 70, 26}, {870, 90, 18}, {2240, 150, 10}}, 18, 30}},
      {"eh", {true, -42.0, -2.0, {{530, 80, 26}, {1840, 110, 20}, {2480, 150, 16}}, 18, 30}},
      {"m", {true, -48.0, -3.0, {{250, 60, 22}, {1000, 150, 8}, {2200, 200, 6}}, 12, 18}},
      {"n", {true, -48.0, -3.0, {{250, 60, 22}, {1400, 150, 10}, {2500, 200, 8}}, 12, 18}},
      {"s", {false, -62.0, 0.0, {{5500, 1000, 26}}, 16, 24}},
      {"f", {false, -56.0, 0.0, {{3500, 2500, 6}}, 16, 24}},
      {"sil", {false, -70.0, 0.0, {}, 30, 50}},
  };
  return specs;
}

const PhoneSpec& spec_of(const std::string& phoneme) {
  const auto& specs = phone_specs();
  const auto it = specs.find(phoneme);
  if (it == specs.end()) throw Error(ErrorCode::OutOfVocabulary, "not a toy phoneme: " + phoneme);
  return it->second;
}

Vector fit_target(const PhoneSpec& spec) {
  static const MelCepstrumFitter fitter(kToyOrder, kToyAlpha, kToyFftSize);
  const int bins = kToyFftSize / 2 + 1;
  std::vector<double> log_mag(static_cast<std::size_t>(bins));
  for (int k = 0; k < bins; ++k) {
    const double hz = k * kToySampleRate / kToyFftSize;
    double db = kLevelDb + spec.base_db + spec.tilt_db_per_khz * hz / 1000.0;
    for (const auto& f : spec.formants) {
      const double z = (hz - f.hz) / f.width;
      db += f.gain_db * std::exp(-0.5 * z * z);
    }
    log_mag[static_cast<std::size_t>(k)] = db / 20.0 * std::numbers::ln10;
  }
  return fitter.fit(log_mag);
}

const std::vector<std::pair<std::string, std::vector<std::string>>>& toy_words() {
  static const std::vector<std::pair<std::string, std::vector<std::string>>> words = {
      {"a", {"aa"}},          {"ma", {"m", "aa"}},        {"me", {"m", "iy"}},        {"moo", {"m", "uw"}},
      {"knee", {"n", "iy"}},  {"new", {"n", "uw"}},       {"see", {"s", "iy"}},       {"sue", {"s", "uw"}},
      {"fee", {"f", "iy"}},   {"foo", {"f", "uw"}},       {"men", {"m", "eh", "n"}},  {"fen", {"f", "eh", "n"}},
      {"mess", {"m", "eh", "s"}}, {"neff", {"n", "eh", "f"}}, {"saw", {"s", "aa"}},   {"fa", {"f", "aa"}},
      {"nah", {"n", "aa"}},   {"mama", {"m", "aa", "m", "aa"}},
  };
  return words;
}

std::int64_t frames_to_units(std::size_t frames, const ToyCorpusConfig& cfg) {
  return static_cast<std::int64_t>(frames) * cfg.frame_shift * kLabelUnitsPerSecond / cfg.sample_rate;
}

}  // namespace

const PhoneSet& toy_phone_set() {
  static const PhoneSet set({"aa", "iy", "uw", "eh", "m", "n", "s", "f", "sil"});
  return set;
}

Lexicon toy_lexicon() {
  Lexicon lex;
  for (const auto& [word, phones] : toy_words()) lex.add(word, phones);
  return lex;
}

Vector toy_phone_target(const std::string& phoneme) {
  static const std::map<std::string, Vector> targets = [] {
    std::map<std::string, Vector> out;
    for (const auto& [name, spec] : phone_specs()) out.emplace(name, fit_target(spec));
    return out;
  }();
  spec_of(phoneme);
  return targets.at(phoneme);
}

bool toy_phone_voiced(const std::string& phoneme) { return spec_of(phoneme).voiced; }

ToyUtterance render_toy_utterance(const std::string& id, const std::vector<PhoneLabel>& labels,
                                  const ToyCorpusConfig& cfg, std::uint64_t seed) {
  if (labels.empty()) throw Error(ErrorCode::EmptySequence, "no labels to render");
  const double units_per_frame =
      static_cast<double>(cfg.frame_shift) * static_cast<double>(kLabelUnitsPerSecond) / cfg.sample_rate;
  const auto frame_at = [&](std::int64_t units) {
    return static_cast<std::size_t>(std::llround(static_cast<double>(units) / units_per_frame));
  };
  const std::size_t total = frame_at(*labels.back().end);

  std::vector<const std::string*> phone_of(total, nullptr);
  for (const auto& l : labels) {
    if (!l.timed()) throw Error(ErrorCode::MalformedLine, "toy rendering needs timed labels");
    for (std::size_t t = frame_at(*l.start); t < frame_at(*l.end) && t < total; ++t) phone_of[t] = &l.phoneme;
  }

  ToyUtterance utt;
  utt.id = id;
  utt.labels = labels;
  utt.mc.order = kToyOrder;
  utt.mc.alpha = kToyAlpha;
  utt.mc.frame_shift = cfg.frame_shift;
  utt.mc.frames = FrameMatrix::Zero(static_cast<Eigen::Index>(total), kToyOrder + 1);
  const auto frames = static_cast<std::ptrdiff_t>(total);
  for (std::ptrdiff_t t = 0; t < frames; ++t) {
    Vector acc = Vector::Zero(kToyOrder + 1);
    for (std::ptrdiff_t k = -cfg.smoothing_frames; k <= cfg.smoothing_frames; ++k) {
      const auto i = std::clamp<std::ptrdiff_t>(t + k, 0, frames - 1);
      acc += toy_phone_target(*phone_of[static_cast<std::size_t>(i)]);
    }
    utt.mc.frames.row(t) = acc.transpose() / static_cast<double>(2 * cfg.smoothing_frames + 1);
  }

  // Declining pitch with a slow wobble; the endpoints vary per seed.
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> start_hz(130.0, 150.0), end_hz(95.0, 105.0), phase(0.0, 6.283);
  const double f_start = start_hz(rng), f_end = end_hz(rng), ph = phase(rng);
  utt.f0.frame_shift = cfg.frame_shift;
  utt.f0.log_f0.assign(total, std::nullopt);
  for (std::size_t t = 0; t < total; ++t) {
    if (!toy_phone_voiced(*phone_of[t])) continue;
    const double x = total > 1 ? static_cast<double>(t) / static_cast<double>(total - 1) : 0.0;
    const double hz = f_start + (f_end - f_start) * x + 4.0 * std::sin(2.0 * std::numbers::pi * 1.5 * x + ph);
    utt.f0.log_f0[t] = std::log(hz);
  }

  ExcitationConfig ex;
  ex.seed = seed;
  utt.audio = vocode(utt.f0, utt.mc, cfg.sample_rate, ex);
  return utt;
}

ToyCorpus make_toy_corpus(const ToyCorpusConfig& cfg) {
  if (!(cfg.min_seconds > 0.0) || cfg.max_seconds < cfg.min_seconds) {
    throw Error(ErrorCode::ConfigError, "invalid toy utterance duration range");
  }
  ToyCorpus corpus;
  corpus.lexicon = toy_lexicon();
  const auto& words = toy_words();
  const double frames_per_second = static_cast<double>(cfg.sample_rate) / cfg.frame_shift;
  const auto min_frames = static_cast<std::size_t>(std::ceil(cfg.min_seconds * frames_per_second));
  const auto max_frames = static_cast<std::size_t>(std::floor(cfg.max_seconds * frames_per_second));

  std::mt19937_64 rng(cfg.seed);
  for (std::size_t u = 0; u < cfg.utterances; ++u) {
    std::vector<PhoneLabel> labels;
    std::string text;
    std::vector<std::size_t> durations;
    for (int attempt = 0;; ++attempt) {
      if (attempt > 1000) throw Error(ErrorCode::ConfigError, "cannot fit utterances into the duration range");
      text.clear();
      std::size_t total = 0;
      std::uniform_int_distribution<std::size_t> pick(0, words.size() - 1);
      std::uniform_real_distribution<double> unit(0.0, 1.0);
      const auto goal = min_frames + static_cast<std::size_t>(unit(rng) * static_cast<double>(max_frames - min_frames));
      while (true) {
        if (!text.empty()) text += ' ';
        text += words[pick(rng)].first;
        labels = text_to_phonemes(text, corpus.lexicon);
        durations.clear();
        total = 0;
        for (const auto& l : labels) {
          const auto& spec = spec_of(l.phoneme);
          std::uniform_int_distribution<int> len(spec.min_frames, spec.max_frames);
          durations.push_back(static_cast<std::size_t>(len(rng)));
          total += durations.back();
        }
        if (total >= goal) break;
      }
      if (total >= min_frames && total <= max_frames) break;
    }
    std::size_t t = 0;
    for (std::size_t i = 0; i < labels.size(); ++i) {
      labels[i].start = frames_to_units(t, cfg);
      t += durations[i];
      labels[i].end = frames_to_units(t, cfg);
    }
    char id[16];
    std::snprintf(id, sizeof(id), "toy%03zu", u);
    auto utt = render_toy_utterance(id, labels, cfg, cfg.seed ^ static_cast<std::uint64_t>(u));
    utt.text = text;
    corpus.utterances.push_back(std::move(utt));
  }
  return corpus;
}

}  // namespace hmmse
