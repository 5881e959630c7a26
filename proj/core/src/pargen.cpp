#include "hmmse/pargen.hpp"

#include <algorithm>
#include <array>
#include <cmath>

#include "hmmse/dynamics.hpp"
#include "hmmse/error.hpp"

namespace hmmse {
namespace {

// Symmetric pentadiagonal system: diag, first and second super-diagonals.
struct BandSystem {
  Vector d0, d1, d2;
  Vector rhs;

  Eigen::Index size() const { return d0.size(); }

  Vector multiply(const Vector& x) const {
    const Eigen::Index n = size();
    Vector y = d0.cwiseProduct(x);
    for (Eigen::Index i = 0; i + 1 < n; ++i) {
      y(i) += d1(i) * x(i + 1);
      y(i + 1) += d1(i) * x(i);
    }
    for (Eigen::Index i = 0; i + 2 < n; ++i) {
      y(i) += d2(i) * x(i + 2);
      y(i + 2) += d2(i) * x(i);
    }
    return y;
  }
};

BandSystem build_system(const FrameMatrix& means, const FrameMatrix& variances) {
  const Eigen::Index frames = means.rows();
  BandSystem sys{Vector::Zero(frames), Vector::Zero(frames), Vector::Zero(frames), Vector::Zero(frames)};
  for (Eigen::Index t = 0; t < frames; ++t) {
    for (std::size_t w = 0; w < kNumWindows; ++w) {
      const double var = variances(t, static_cast<Eigen::Index>(w));
      if (std::isinf(var)) continue;
      const double precision = 1.0 / var;
      // Clamped indices may coincide at the edges; merge them first.
      std::array<Eigen::Index, 3> idx{};
      std::array<double, 3> coef{};
      std::size_t n = 0;
      for (std::ptrdiff_t k = -1; k <= 1; ++k) {
        const double c = kDeltaWindows[w][static_cast<std::size_t>(k + 1)];
        if (c == 0.0) continue;
        const Eigen::Index i = window_index(t, k, frames);
        std::size_t slot = 0;
        while (slot < n && idx[slot] != i) ++slot;
        if (slot == n) {
          idx[n] = i;
          coef[n] = 0.0;
          ++n;
        }
        coef[slot] += c;
      }
      const double mu = means(t, static_cast<Eigen::Index>(w));
      for (std::size_t a = 0; a < n; ++a) {
        sys.rhs(idx[a]) += precision * coef[a] * mu;
        for (std::size_t b = 0; b < n; ++b) {
          const Eigen::Index i = idx[a], j = idx[b];
          if (j < i) continue;
          const double v = precision * coef[a] * coef[b];
          if (j == i) {
            sys.d0(i) += v;
          } else if (j == i + 1) {
            sys.d1(i) += v;
          } else {
            sys.d2(i) += v;
          }
        }
      }
    }
  }
  return sys;
}

// Banded LDL' factorisation and solve.
Vector band_solve(const BandSystem& sys, const Vector& rhs) {
  const Eigen::Index n = sys.size();
  Vector d(n), l1 = Vector::Zero(n), l2 = Vector::Zero(n);
  const double scale = sys.d0.cwiseAbs().maxCoeff();
  for (Eigen::Index i = 0; i < n; ++i) {
    if (i >= 2) l2(i) = sys.d2(i - 2) / d(i - 2);
    if (i >= 1) {
      double v = sys.d1(i - 1);
      if (i >= 2) v -= l2(i) * l1(i - 1) * d(i - 2);
      l1(i) = v / d(i - 1);
    }
    double di = sys.d0(i);
    if (i >= 1) di -= l1(i) * l1(i) * d(i - 1);
    if (i >= 2) di -= l2(i) * l2(i) * d(i - 2);
    if (!(di > 1e-14 * scale)) {
      throw Error(ErrorCode::SingularSystem, "parameter generation system is not positive definite");
    }
    d(i) = di;
  }
  Vector y(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    double v = rhs(i);
    if (i >= 1) v -= l1(i) * y(i - 1);
    if (i >= 2) v -= l2(i) * y(i - 2);
    y(i) = v;
  }
  Vector x(n);
  for (Eigen::Index i = n; i-- > 0;) {
    double v = y(i) / d(i);
    if (i + 1 < n) v -= l1(i + 1) * x(i + 1);
    if (i + 2 < n) v -= l2(i + 2) * x(i + 2);
    x(i) = v;
  }
  return x;
}

FrameMatrix dimension_columns(const FrameMatrix& m, Eigen::Index dim, Eigen::Index width) {
  FrameMatrix out(m.rows(), 3);
  for (Eigen::Index w = 0; w < 3; ++w) out.col(w) = m.col(w * width + dim);
  return out;
}

double population_variance(const Eigen::Ref<const Vector>& x) {
  const double mean = x.mean();
  return (x.array() - mean).square().mean();
}

// Shared iteration. `hmm_gradient(c)` returns the gradient of the HMM term
// and `hmm_curvature` its diagonal curvature, both already divided by T.
template <typename Gradient>
Vector gv_dimension(const Vector& input, double target, const GvTarget& gv, Gradient hmm_gradient,
                    const Vector& hmm_curvature) {
  Vector c = input;
  const double frames = static_cast<double>(c.size());
  const double w = gv.weight;
  const double norm = target * target;
  for (int it = 0; it < gv.iterations; ++it) {
    const double mean = c.mean();
    const double var = population_variance(c);
    const Vector centred = c.array() - mean;
    Vector grad = (-4.0 * w * (var - target) / (frames * norm)) * centred;
    if (w < 1.0) grad += (1.0 - w) * hmm_gradient(c);
    const double gv_curv = w * 4.0 * std::max(var, target) / (frames * norm);
    const Vector precond = ((1.0 - w) * hmm_curvature.array() + gv_curv).inverse();
    c += gv.step * precond.cwiseProduct(grad);
  }
  return c;
}

void check_gv(const FrameMatrix& traj, const GvTarget& gv) {
  if (gv.target.size() != traj.cols()) {
    throw Error(ErrorCode::DimensionMismatch, "GV target has " + std::to_string(gv.target.size()) +
                                                  " dimensions, trajectory " + std::to_string(traj.cols()));
  }
}

}  // namespace

std::size_t StateSequence::frames() const {
  std::size_t total = 0;
  for (const auto d : durations) total += d;
  return total;
}

StateSequence predict_durations(const VoiceModel& model, const std::vector<ContextLabel>& contexts, double rate) {
  if (!(rate > 0.0)) throw Error(ErrorCode::ConfigError, "speaking rate must be positive");
  const UtteranceModel um = build_utterance_model(model, contexts);
  StateSequence seq;
  seq.states = um.states;
  for (const HmmState* s : um.states) {
    const auto frames = std::llround(rate * s->duration_mean);
    seq.durations.push_back(static_cast<std::size_t>(std::max<long long>(1, frames)));
  }
  return seq;
}

StateSequence aligned_state_sequence(const VoiceModel& model, const std::vector<PhoneLabel>& labels,
                                     const AlignmentResult& alignment) {
  const UtteranceModel um = build_utterance_model(model, expand_context(labels, model.metadata.context_width));
  StateSequence seq;
  seq.states = um.states;
  seq.durations = state_durations(alignment);
  if (seq.durations.size() != seq.states.size()) {
    throw Error(ErrorCode::LengthMismatch, "alignment does not match the label sequence");
  }
  return seq;
}

StreamStatistics spectral_statistics(const StateSequence& seq) {
  if (seq.states.empty()) throw Error(ErrorCode::EmptySequence, "empty state sequence");
  const auto frames = static_cast<Eigen::Index>(seq.frames());
  const Eigen::Index dim = seq.states.front()->spectral.mean.size();
  StreamStatistics stats{FrameMatrix(frames, dim), FrameMatrix(frames, dim)};
  Eigen::Index t = 0;
  for (std::size_t s = 0; s < seq.states.size(); ++s) {
    for (std::size_t k = 0; k < seq.durations[s]; ++k, ++t) {
      stats.mean.row(t) = seq.states[s]->spectral.mean.transpose();
      stats.variance.row(t) = seq.states[s]->spectral.variance.transpose();
    }
  }
  return stats;
}

MlpgSolution mlpg_solve(const FrameMatrix& means, const FrameMatrix& variances) {
  if (means.rows() == 0) throw Error(ErrorCode::EmptySequence, "empty trajectory");
  if (means.cols() != 3 || variances.cols() != 3 || variances.rows() != means.rows()) {
    throw Error(ErrorCode::DimensionMismatch, "MLPG expects T x 3 means and variances");
  }
  MlpgSolution sol;
  // Without dynamic constraints the solution is the static means; skip the
  // division round trip so it is exact.
  if (variances.rightCols(2).array().isInf().all() && variances.col(0).array().isFinite().all()) {
    sol.trajectory = means.col(0);
    return sol;
  }
  const BandSystem sys = build_system(means, variances);
  sol.trajectory = band_solve(sys, sys.rhs);
  // One refinement step against rounding in the factorisation.
  Vector residual = sys.rhs - sys.multiply(sol.trajectory);
  sol.trajectory += band_solve(sys, residual);
  residual = sys.rhs - sys.multiply(sol.trajectory);
  const double rhs_norm = sys.rhs.norm();
  sol.relative_residual = rhs_norm > 0.0 ? residual.norm() / rhs_norm : residual.norm();
  if (!(sol.relative_residual < kMlpgResidualLimit)) {
    throw Error(ErrorCode::SingularSystem, "MLPG residual " + std::to_string(sol.relative_residual));
  }
  return sol;
}

FrameMatrix mlpg_stream(const StreamStatistics& stats) {
  const Eigen::Index width = stats.width();
  FrameMatrix out(stats.mean.rows(), width);
  for (Eigen::Index d = 0; d < width; ++d) {
    out.col(d) = mlpg_solve(dimension_columns(stats.mean, d, width), dimension_columns(stats.variance, d, width))
                     .trajectory;
  }
  return out;
}

GeneratedParameters mlpg(const VoiceModel& model, const StateSequence& seq) {
  GeneratedParameters gen;
  gen.spectral = spectral_statistics(seq);
  gen.mc.order = model.metadata.order;
  gen.mc.alpha = model.metadata.alpha;
  gen.mc.frame_shift = model.metadata.frame_shift;
  gen.mc.frames = mlpg_stream(gen.spectral);

  const std::size_t frames = seq.frames();
  std::vector<const HmmState*> per_frame;
  per_frame.reserve(frames);
  for (std::size_t s = 0; s < seq.states.size(); ++s) {
    per_frame.insert(per_frame.end(), seq.durations[s], seq.states[s]);
  }
  gen.f0.frame_shift = model.metadata.frame_shift;
  gen.f0.log_f0.assign(frames, std::nullopt);
  std::size_t t = 0;
  while (t < frames) {
    if (per_frame[t]->pitch.voiced_weight <= 0.5) {
      ++t;
      continue;
    }
    std::size_t end = t;
    while (end < frames && per_frame[end]->pitch.voiced_weight > 0.5) ++end;
    const auto len = static_cast<Eigen::Index>(end - t);
    FrameMatrix mean(len, 3), var(len, 3);
    for (Eigen::Index i = 0; i < len; ++i) {
      const auto& g = per_frame[t + static_cast<std::size_t>(i)]->pitch;
      mean.row(i) = g.mean.transpose();
      var.row(i) = g.variance.transpose();
    }
    const Vector lf0 = mlpg_solve(mean, var).trajectory;
    for (Eigen::Index i = 0; i < len; ++i) gen.f0.log_f0[t + static_cast<std::size_t>(i)] = lf0(i);
    t = end;
  }
  return gen;
}

Vector trajectory_variance(const FrameMatrix& traj) {
  Vector v(traj.cols());
  for (Eigen::Index d = 0; d < traj.cols(); ++d) v(d) = traj.rows() ? population_variance(traj.col(d)) : 0.0;
  return v;
}

FrameMatrix gv_enhance(const FrameMatrix& traj, const GvTarget& gv) {
  if (gv.weight == 0.0 || traj.rows() < 2) return traj;
  check_gv(traj, gv);
  FrameMatrix out = traj;
  const double frames = static_cast<double>(traj.rows());
  for (Eigen::Index d = 0; d < traj.cols(); ++d) {
    const double target = gv.target(d);
    if (!(target > 0.0)) continue;
    const Vector input = traj.col(d);
    const double anchor = 1.0 / (frames * target);
    const Vector curvature = Vector::Constant(input.size(), anchor);
    out.col(d) = gv_dimension(input, target, gv, [&](const Vector& c) { return Vector(-anchor * (c - input)); },
                              curvature);
  }
  return out;
}

FrameMatrix gv_enhance(const FrameMatrix& traj, const GvTarget& gv, const StreamStatistics& stats) {
  if (gv.weight == 0.0 || traj.rows() < 2) return traj;
  check_gv(traj, gv);
  const Eigen::Index width = stats.width();
  if (width != traj.cols() || static_cast<Eigen::Index>(stats.frames()) != traj.rows()) {
    throw Error(ErrorCode::DimensionMismatch, "statistics do not match the trajectory");
  }
  FrameMatrix out = traj;
  const double frames = static_cast<double>(traj.rows());
  for (Eigen::Index d = 0; d < width; ++d) {
    const double target = gv.target(d);
    if (!(target > 0.0)) continue;
    const BandSystem sys =
        build_system(dimension_columns(stats.mean, d, width), dimension_columns(stats.variance, d, width));
    const Vector curvature = sys.d0 / frames;
    out.col(d) = gv_dimension(
        traj.col(d), target, gv, [&](const Vector& c) { return Vector((sys.rhs - sys.multiply(c)) / frames); },
        curvature);
  }
  return out;
}

GvTarget model_gv_stats(const std::vector<MelCepstrumSequence>& corpus) {
  if (corpus.empty()) throw Error(ErrorCode::EmptyCorpus, "GV statistics need at least one utterance");
  GvTarget gv;
  gv.target = Vector::Zero(corpus.front().width());
  for (const auto& mc : corpus) {
    if (mc.width() != gv.target.size()) throw Error(ErrorCode::DimensionMismatch, "mixed cepstral orders");
    gv.target += trajectory_variance(mc.frames);
  }
  gv.target /= static_cast<double>(corpus.size());
  return gv;
}

}  // namespace hmmse
