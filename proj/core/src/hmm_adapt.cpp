#include <Eigen/Dense>

#include <cmath>
#include <sstream>

#include "hmm_internal.hpp"
#include "hmmse/error.hpp"
#include "hmmse/hmm.hpp"

namespace hmmse {
namespace {

// Relative ridge pulling each transform row toward the identity row; only
// matters in directions the adaptation data leaves unconstrained.
constexpr double kTransformRidge = 1e-6;

struct MeanAccum {
  double occ = 0.0;
  Vector sum;
  double p_occ = 0.0;
  Vector p_sum;
};

using ModelMeanAccum = std::array<MeanAccum, kStatesPerPhone>;

struct UtteranceStats {
  std::map<std::string, ModelMeanAccum> models;
  bool skipped = false;
};

UtteranceStats accumulate_means(const VoiceModel& model, const TrainingUtterance& utt) {
  UtteranceStats stats;
  const auto& obs = utt.observations;
  if (obs.spectral.cols() != model.spectral_dim()) {
    throw Error(ErrorCode::DimensionMismatch, "utterance " + utt.id + " does not match the model dimensions");
  }
  const auto contexts = expand_context(utt.labels, model.metadata.context_width);
  const UtteranceModel um = build_utterance_model(model, contexts);
  const ForwardBackwardResult fb = forward_backward(um, obs);
  if (!std::isfinite(fb.log_likelihood)) {
    stats.skipped = true;
    return stats;
  }
  const auto frames = static_cast<Eigen::Index>(obs.frames());
  for (std::size_t label = 0; label < contexts.size(); ++label) {
    ModelMeanAccum& ma = stats.models[um.model_keys[label]];
    for (int j = 0; j < kStatesPerPhone; ++j) {
      MeanAccum& a = ma[static_cast<std::size_t>(j)];
      if (a.sum.size() == 0) {
        a.sum = Vector::Zero(obs.spectral.cols());
        a.p_sum = Vector::Zero(kPitchWidth);
      }
      const auto s = static_cast<Eigen::Index>(label * kStatesPerPhone + static_cast<std::size_t>(j));
      for (Eigen::Index t = 0; t < frames; ++t) {
        const double g = fb.posteriors(t, s);
        if (g == 0.0) continue;
        a.occ += g;
        a.sum += g * obs.spectral.row(t).transpose();
        if (obs.voiced[static_cast<std::size_t>(t)]) {
          a.p_occ += g;
          a.p_sum += g * obs.pitch.row(t).transpose();
        }
      }
    }
  }
  return stats;
}

// One (mean, variance, occupancy, first-order sum) tuple per occupied state.
struct StreamStats {
  std::vector<const StreamGaussian*> gaussians;
  std::vector<double> occ;
  std::vector<Vector> sum;
};

AffineTransform solve_transform(const StreamStats& st, Eigen::Index dim) {
  AffineTransform xf;
  xf.A = Eigen::MatrixXd::Identity(dim, dim);
  xf.b = Vector::Zero(dim);
  const Eigen::Index ext = dim + 1;
  for (Eigen::Index i = 0; i < dim; ++i) {
    Eigen::MatrixXd g = Eigen::MatrixXd::Zero(ext, ext);
    Vector k = Vector::Zero(ext);
    Vector xi(ext);
    for (std::size_t s = 0; s < st.gaussians.size(); ++s) {
      const StreamGaussian& gs = *st.gaussians[s];
      xi(0) = 1.0;
      xi.tail(dim) = gs.mean;
      const double w = 1.0 / gs.variance(i);
      g.noalias() += (w * st.occ[s]) * xi * xi.transpose();
      k.noalias() += (w * st.sum[s](i)) * xi;
    }
    Vector prior = Vector::Zero(ext);
    prior(i + 1) = 1.0;
    const double tau = kTransformRidge * std::max(g.trace(), 1e-300) / static_cast<double>(ext);
    g.diagonal().array() += tau;
    k += tau * prior;
    const Vector row = g.ldlt().solve(k);
    xf.b(i) = row(0);
    xf.A.row(i) = row.tail(dim).transpose();
  }
  return xf;
}

void transform_all(VoiceModel& target, const VoiceModel& source, const AffineTransform& spectral,
                   const AffineTransform& pitch) {
  auto apply = [&](std::map<std::string, PhoneHmm>& dst, const std::map<std::string, PhoneHmm>& src) {
    for (auto& [key, hmm] : dst) {
      const PhoneHmm& orig = src.at(key);
      for (int j = 0; j < kStatesPerPhone; ++j) {
        auto& s = hmm.states[static_cast<std::size_t>(j)];
        const auto& o = orig.states[static_cast<std::size_t>(j)];
        s.spectral.mean = spectral.A * o.spectral.mean + spectral.b;
        s.pitch.mean = pitch.A * o.pitch.mean + pitch.b;
      }
    }
  };
  apply(target.models, source.models);
  apply(target.backoff, source.backoff);
}

}  // namespace

VoiceModel adapt_mllr(const VoiceModel& model, const Corpus& adaptation, const AdaptationConfig& config) {
  if (adaptation.empty()) throw Error(ErrorCode::InsufficientData, "adaptation set is empty");
  const Eigen::Index dim = model.spectral_dim();
  AffineTransform spectral{Eigen::MatrixXd::Identity(dim, dim), Vector::Zero(dim)};
  AffineTransform pitch{Eigen::MatrixXd::Identity(kPitchWidth, kPitchWidth), Vector::Zero(kPitchWidth)};
  VoiceModel current = model;
  std::vector<std::string> log;

  for (int iter = 0; iter < std::max(1, config.iterations); ++iter) {
    std::vector<UtteranceStats> per_utt(adaptation.size());
    detail::parallel_for(adaptation.size(), config.workers,
                         [&](std::size_t i) { per_utt[i] = accumulate_means(current, adaptation[i]); });
    std::map<std::string, ModelMeanAccum> total;
    for (auto& u : per_utt) {
      if (u.skipped) continue;
      for (auto& [key, ma] : u.models) {
        auto it = total.find(key);
        if (it == total.end()) {
          total.emplace(key, std::move(ma));
          continue;
        }
        for (int j = 0; j < kStatesPerPhone; ++j) {
          auto& dst = it->second[static_cast<std::size_t>(j)];
          const auto& src = ma[static_cast<std::size_t>(j)];
          dst.occ += src.occ;
          dst.sum += src.sum;
          dst.p_occ += src.p_occ;
          dst.p_sum += src.p_sum;
        }
      }
    }

    // Statistics pair with the unadapted Gaussians: the transform always maps
    // the original means.
    StreamStats s_stats, p_stats;
    double frames = 0.0, voiced = 0.0;
    VoiceModel& orig = const_cast<VoiceModel&>(model);
    for (const auto& [key, ma] : total) {
      const PhoneHmm* hmm = detail::find_mutable(orig, key);
      if (!hmm) continue;
      for (int j = 0; j < kStatesPerPhone; ++j) {
        const auto& a = ma[static_cast<std::size_t>(j)];
        const auto& st = hmm->states[static_cast<std::size_t>(j)];
        if (a.occ > 0.0) {
          s_stats.gaussians.push_back(&st.spectral);
          s_stats.occ.push_back(a.occ);
          s_stats.sum.push_back(a.sum);
          frames += a.occ;
        }
        if (a.p_occ > 0.0) {
          p_stats.gaussians.push_back(&st.pitch);
          p_stats.occ.push_back(a.p_occ);
          p_stats.sum.push_back(a.p_sum);
          voiced += a.p_occ;
        }
      }
    }
    const double spectral_params = static_cast<double>(dim * (dim + 1));
    if (frames < spectral_params) {
      throw Error(ErrorCode::InsufficientData, std::to_string(static_cast<long long>(frames)) +
                                                   " occupied frames for " +
                                                   std::to_string(static_cast<long long>(spectral_params)) +
                                                   " transform parameters");
    }
    spectral = solve_transform(s_stats, dim);
    if (voiced >= static_cast<double>(kPitchWidth * (kPitchWidth + 1))) {
      pitch = solve_transform(p_stats, kPitchWidth);
    }
    transform_all(current, model, spectral, pitch);
    std::ostringstream line;
    line << "adapt_mllr iteration " << iter + 1 << ": " << static_cast<long long>(frames) << " frames, "
         << static_cast<long long>(voiced) << " voiced";
    log.push_back(line.str());
  }

  current.kind = ModelKind::adapted;
  current.metadata.spectral_transform = spectral;
  current.metadata.pitch_transform = pitch;
  for (auto& l : log) current.metadata.training_log.push_back(std::move(l));
  return current;
}

}  // namespace hmmse
