#include <benchmark/benchmark.h>

#include <random>

#include "hmmse/align.hpp"
#include "hmmse/analysis.hpp"
#include "hmmse/enhance.hpp"
#include "hmmse/hmm.hpp"
#include "hmmse/pargen.hpp"
#include "hmmse/toy_corpus.hpp"
#include "hmmse/vocoder.hpp"

namespace {

using namespace hmmse;

struct Fixture {
  ToyCorpus toy;
  Corpus corpus;
  VoiceModel model;
};

// A few toy utterances and a monophone voice trained on them.
const Fixture& fixture() {
  static const Fixture f = [] {
    Fixture f;
    ToyCorpusConfig cfg;
    cfg.utterances = 8;
    f.toy = make_toy_corpus(cfg);
    const AnalysisConfig analysis;
    for (const auto& u : f.toy.utterances) f.corpus.push_back(make_training_utterance(u.id, u.audio, u.labels, analysis));
    f.model = baum_welch(flat_start(f.corpus, toy_phone_set(), ModelMetadata{}), f.corpus, 3).model;
    return f;
  }();
  return f;
}

Waveform one_second_noise() {
  std::mt19937_64 rng(1);
  std::normal_distribution<double> normal(0.0, 0.1);
  Waveform wf;
  wf.samples.resize(16000);
  for (auto& x : wf.samples) x = normal(rng);
  return wf;
}

void BM_MlsaFilter(benchmark::State& state) {
  const auto& u = fixture().toy.utterances.front();
  const Waveform ex = make_excitation(u.f0, 16000, {});
  for (auto _ : state) benchmark::DoNotOptimize(mlsa_filter(u.mc, ex));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(ex.samples.size()));
}
BENCHMARK(BM_MlsaFilter)->Unit(benchmark::kMillisecond);

void BM_EstimateF0(benchmark::State& state) {
  const Waveform wf = one_second_noise();
  for (auto _ : state) benchmark::DoNotOptimize(estimate_f0(wf, {}));
}
BENCHMARK(BM_EstimateF0)->Unit(benchmark::kMillisecond);

void BM_MgcAnalysis(benchmark::State& state) {
  const Waveform wf = one_second_noise();
  for (auto _ : state) benchmark::DoNotOptimize(mgc_analysis(wf, {}));
}
BENCHMARK(BM_MgcAnalysis)->Unit(benchmark::kMillisecond);

void BM_ForwardBackward(benchmark::State& state) {
  const Fixture& f = fixture();
  const auto& u = f.corpus.front();
  const UtteranceModel um = build_utterance_model(f.model, expand_context(u.labels, f.model.metadata.context_width));
  for (auto _ : state) benchmark::DoNotOptimize(forward_backward(um, u.observations));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(u.observations.frames()));
}
BENCHMARK(BM_ForwardBackward)->Unit(benchmark::kMillisecond);

void BM_ViterbiAlign(benchmark::State& state) {
  const Fixture& f = fixture();
  const auto& u = f.corpus.front();
  for (auto _ : state) benchmark::DoNotOptimize(viterbi_align(f.model, u.labels, u.observations));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(u.observations.frames()));
}
BENCHMARK(BM_ViterbiAlign)->Unit(benchmark::kMillisecond);

void BM_MlpgSolve(benchmark::State& state) {
  const auto frames = static_cast<Eigen::Index>(state.range(0));
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> u(0.1, 2.0);
  const FrameMatrix mean = FrameMatrix::NullaryExpr(frames, 3, [&] { return u(rng); });
  const FrameMatrix var = FrameMatrix::NullaryExpr(frames, 3, [&] { return u(rng); });
  for (auto _ : state) benchmark::DoNotOptimize(mlpg_solve(mean, var));
  state.SetComplexityN(state.range(0));
}
BENCHMARK(BM_MlpgSolve)->RangeMultiplier(4)->Range(64, 16384)->Complexity(benchmark::oN);

void BM_GenerateUtterance(benchmark::State& state) {
  const Fixture& f = fixture();
  const auto contexts = expand_context(f.toy.utterances.front().labels, f.model.metadata.context_width);
  const GvTarget gv = model_gv_target(f.model, 0.7);
  for (auto _ : state) {
    const GeneratedParameters gen = mlpg(f.model, predict_durations(f.model, contexts));
    benchmark::DoNotOptimize(gv.target.size() ? gv_enhance(gen.mc.frames, gv, gen.spectral) : gen.mc.frames);
  }
}
BENCHMARK(BM_GenerateUtterance)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
