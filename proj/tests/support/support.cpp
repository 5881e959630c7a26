#include "support.hpp"

#include <Eigen/Dense>

#include <atomic>
#include <cmath>
#include <fstream>
#include <limits>
#include <numbers>
#include <random>
#include <sstream>

#include <unistd.h>

#include "hmmse/dynamics.hpp"

namespace hmmse::testing {

namespace fs = std::filesystem;

TempDir::TempDir() {
  static std::atomic<int> counter{0};
  path_ = fs::temp_directory_path() /
          ("hmmse-test-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
  fs::remove_all(path_);
  fs::create_directories(path_);
}

TempDir::~TempDir() {
  std::error_code ec;
  fs::remove_all(path_, ec);
}

Waveform sine(double hz, double seconds, int sample_rate, double amplitude, double phase) {
  Waveform wf;
  wf.sample_rate = sample_rate;
  wf.samples.resize(static_cast<std::size_t>(std::llround(seconds * sample_rate)));
  for (std::size_t n = 0; n < wf.samples.size(); ++n) {
    wf.samples[n] = amplitude * std::sin(2.0 * std::numbers::pi * hz * static_cast<double>(n) / sample_rate + phase);
  }
  return wf;
}

Waveform pulse_train(double hz, double seconds, int sample_rate, double amplitude) {
  Waveform wf;
  wf.sample_rate = sample_rate;
  wf.samples.assign(static_cast<std::size_t>(std::llround(seconds * sample_rate)), 0.0);
  const double period = sample_rate / hz;
  for (double pos = 0.0; pos < static_cast<double>(wf.samples.size()); pos += period) {
    wf.samples[static_cast<std::size_t>(pos)] = amplitude;
  }
  return wf;
}

Waveform white_noise(std::size_t samples, std::uint64_t seed, double stddev, int sample_rate) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, stddev);
  Waveform wf;
  wf.sample_rate = sample_rate;
  wf.samples.resize(samples);
  for (auto& v : wf.samples) v = normal(rng);
  return wf;
}

Waveform constant(double value, std::size_t samples, int sample_rate) {
  return Waveform{std::vector<double>(samples, value), sample_rate};
}

std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  out << text;
}

std::vector<unsigned char> read_bytes(const fs::path& path) {
  const std::string s = read_text(path);
  return {s.begin(), s.end()};
}

VoiceModel random_model(const RandomModelSpec& spec) {
  std::mt19937_64 rng(spec.seed);
  std::uniform_real_distribution<double> mean(-spec.mean_spread, spec.mean_spread);
  std::uniform_real_distribution<double> var(0.5, 1.5);
  VoiceModel model;
  model.metadata.order = spec.order;
  const Eigen::Index dim = model.spectral_dim();
  model.metadata.spectral_floor = Vector::Constant(dim, 1e-6);
  model.metadata.pitch_floor = Vector::Constant(kPitchWidth, 1e-6);
  for (const auto& phone : spec.phones) {
    PhoneHmm hmm;
    hmm.phoneme = phone;
    for (auto& s : hmm.states) {
      s.spectral.mean = Vector::NullaryExpr(dim, [&] { return mean(rng); });
      s.spectral.variance = Vector::NullaryExpr(dim, [&] { return var(rng); });
      s.pitch.mean = Vector::NullaryExpr(kPitchWidth, [&] { return mean(rng); });
      s.pitch.mean(0) = 4.8 + 0.1 * mean(rng);
      s.pitch.variance = Vector::NullaryExpr(kPitchWidth, [&] { return 0.01 * var(rng); });
      s.pitch.voiced_weight = spec.voiced_weight;
      s.duration_mean = spec.duration_mean;
      // Variance of the geometric law with this mean.
      s.duration_variance = spec.duration_mean * (spec.duration_mean - 1.0);
    }
    model.backoff.emplace(phone, std::move(hmm));
  }
  return model;
}

Corpus sample_corpus(const VoiceModel& model, std::size_t utterances, std::size_t labels_per_utterance,
                     std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::vector<std::string> phones;
  for (const auto& [name, hmm] : model.backoff) phones.push_back(name);
  std::uniform_int_distribution<std::size_t> pick(0, phones.size() - 1);
  const Eigen::Index dim = model.spectral_dim();

  Corpus corpus;
  corpus.reserve(utterances);
  for (std::size_t u = 0; u < utterances; ++u) {
    TrainingUtterance utt;
    utt.id = "s" + std::to_string(u);
    std::vector<const HmmState*> states;
    std::vector<std::size_t> durations;
    for (std::size_t l = 0; l < labels_per_utterance; ++l) {
      const std::string& phone = phones[pick(rng)];
      utt.labels.push_back({phone, std::nullopt, std::nullopt, 0, 0});
      for (const auto& s : model.backoff.at(phone).states) {
        std::geometric_distribution<std::size_t> geo(1.0 / s.duration_mean);
        states.push_back(&s);
        durations.push_back(geo(rng) + 1);
      }
    }
    std::size_t total = 0;
    for (const auto d : durations) total += d;
    auto& obs = utt.observations;
    obs.spectral.resize(static_cast<Eigen::Index>(total), dim);
    obs.pitch = FrameMatrix::Zero(static_cast<Eigen::Index>(total), kPitchWidth);
    obs.voiced.assign(total, false);
    Eigen::Index t = 0;
    for (std::size_t i = 0; i < states.size(); ++i) {
      const HmmState& s = *states[i];
      for (std::size_t k = 0; k < durations[i]; ++k, ++t) {
        for (Eigen::Index d = 0; d < dim; ++d) {
          obs.spectral(t, d) = s.spectral.mean(d) + std::sqrt(s.spectral.variance(d)) * normal(rng);
        }
        if (unit(rng) < s.pitch.voiced_weight) {
          obs.voiced[static_cast<std::size_t>(t)] = true;
          for (Eigen::Index d = 0; d < kPitchWidth; ++d) {
            obs.pitch(t, d) = s.pitch.mean(d) + std::sqrt(s.pitch.variance(d)) * normal(rng);
          }
        }
      }
    }
    corpus.push_back(std::move(utt));
  }
  return corpus;
}

double ParameterChange::max() const {
  return std::max({spectral_mean, spectral_variance, pitch_mean, pitch_variance, duration_mean});
}

ParameterChange parameter_change(const VoiceModel& before, const VoiceModel& after) {
  struct Group {
    double diff = 0.0, base = 0.0;
    void add(const Vector& a, const Vector& b) {
      diff += (b - a).squaredNorm();
      base += a.squaredNorm();
    }
    void add(double a, double b) {
      diff += (b - a) * (b - a);
      base += a * a;
    }
    double value() const { return std::sqrt(diff / base); }
  };
  Group sm, sv, pm, pv, dm;
  auto visit = [&](const std::map<std::string, PhoneHmm>& a, const std::map<std::string, PhoneHmm>& b) {
    for (const auto& [key, hmm] : a) {
      const PhoneHmm& other = b.at(key);
      for (int j = 0; j < kStatesPerPhone; ++j) {
        const auto& x = hmm.states[static_cast<std::size_t>(j)];
        const auto& y = other.states[static_cast<std::size_t>(j)];
        sm.add(x.spectral.mean, y.spectral.mean);
        sv.add(x.spectral.variance, y.spectral.variance);
        pm.add(x.pitch.mean, y.pitch.mean);
        pv.add(x.pitch.variance, y.pitch.variance);
        dm.add(x.duration_mean, y.duration_mean);
      }
    }
  };
  visit(before.models, after.models);
  visit(before.backoff, after.backoff);
  return {sm.value(), sv.value(), pm.value(), pv.value(), dm.value()};
}

Vector dense_mlpg(const FrameMatrix& means, const FrameMatrix& variances) {
  const auto T = means.rows();
  Eigen::MatrixXd W = Eigen::MatrixXd::Zero(3 * T, T);
  Vector mu(3 * T), prec(3 * T);
  for (Eigen::Index t = 0; t < T; ++t) {
    for (Eigen::Index w = 0; w < 3; ++w) {
      const Eigen::Index row = 3 * t + w;
      for (std::ptrdiff_t k = -1; k <= 1; ++k) {
        W(row, window_index(t, k, T)) += kDeltaWindows[static_cast<std::size_t>(w)][static_cast<std::size_t>(k + 1)];
      }
      mu(row) = means(t, w);
      prec(row) = std::isinf(variances(t, w)) ? 0.0 : 1.0 / variances(t, w);
    }
  }
  const Eigen::MatrixXd A = W.transpose() * prec.asDiagonal() * W;
  const Vector r = W.transpose() * prec.asDiagonal() * mu;
  return A.fullPivLu().solve(r);
}

namespace {

struct Search {
  const FrameMatrix* prefix;  // (T + 1) x S cumulative emissions
  FrameMatrix duration;       // S x (T + 1) Gaussian duration log-densities
  std::size_t frames = 0, states = 0;
  std::vector<std::size_t> current;
  BruteForceAlignment best{-std::numeric_limits<double>::infinity(), {}};

  double span(std::size_t s, std::size_t t, std::size_t d) const {
    const auto col = static_cast<Eigen::Index>(s);
    return (*prefix)(static_cast<Eigen::Index>(t + d), col) - (*prefix)(static_cast<Eigen::Index>(t), col) +
           duration(col, static_cast<Eigen::Index>(d));
  }

  void run(std::size_t s, std::size_t t, double score) {
    if (s + 1 == states) {
      // The last state takes whatever is left.
      const std::size_t d = frames - t;
      const double total = score + span(s, t, d);
      if (total > best.score) {
        current[s] = d;
        best = {total, current};
      }
      return;
    }
    const std::size_t max_d = frames - t - (states - s - 1);
    for (std::size_t d = 1; d <= max_d; ++d) {
      current[s] = d;
      run(s + 1, t + d, score + span(s, t, d));
    }
  }
};

}  // namespace

BruteForceAlignment brute_force_align(const VoiceModel& model, const std::vector<PhoneLabel>& labels,
                                      const Observations& obs) {
  const auto contexts = expand_context(labels, model.metadata.context_width);
  const UtteranceModel um = build_utterance_model(model, contexts);
  const std::size_t S = um.states.size();
  const std::size_t T = obs.frames();
  FrameMatrix prefix = FrameMatrix::Zero(static_cast<Eigen::Index>(T + 1), static_cast<Eigen::Index>(S));
  for (std::size_t t = 0; t < T; ++t) {
    for (std::size_t s = 0; s < S; ++s) {
      prefix(static_cast<Eigen::Index>(t + 1), static_cast<Eigen::Index>(s)) =
          prefix(static_cast<Eigen::Index>(t), static_cast<Eigen::Index>(s)) + state_log_likelihood(*um.states[s], obs, t);
    }
  }
  Search search;
  search.prefix = &prefix;
  search.frames = T;
  search.states = S;
  search.current.assign(S, 0);
  search.duration.resize(static_cast<Eigen::Index>(S), static_cast<Eigen::Index>(T + 1));
  for (std::size_t s = 0; s < S; ++s) {
    const double mean = um.states[s]->duration_mean;
    const double var = um.states[s]->duration_variance;
    for (std::size_t d = 0; d <= T; ++d) {
      const double z = static_cast<double>(d) - mean;
      search.duration(static_cast<Eigen::Index>(s), static_cast<Eigen::Index>(d)) =
          -0.5 * std::log(2.0 * std::numbers::pi * var) - 0.5 * z * z / var;
    }
  }
  search.run(0, 0, 0.0);
  return search.best;
}

std::vector<PhoneLabel> untimed(const std::vector<std::string>& phones) {
  std::vector<PhoneLabel> out;
  for (const auto& p : phones) out.push_back({p, std::nullopt, std::nullopt, 0, 0});
  return out;
}

}  // namespace hmmse::testing
