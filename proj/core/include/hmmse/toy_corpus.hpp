#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "hmmse/analysis.hpp"
#include "hmmse/features.hpp"
#include "hmmse/labels.hpp"
#include "hmmse/signal.hpp"

namespace hmmse {

// Synthetic corpus with known source-filter parameters: eight phonemes
// (aa iy uw eh m n voiced, s f unvoiced) plus low-level "sil", rendered
// through the toolkit's own vocoder.
struct ToyCorpusConfig {
  std::size_t utterances = 60;
  std::uint64_t seed = 1;
  double min_seconds = 2.0;
  double max_seconds = 4.0;
  int sample_rate = 16000;
  int frame_shift = 80;
  int smoothing_frames = 4;  // half-width of the moving average over phone targets
};

struct ToyUtterance {
  std::string id;
  std::string text;
  std::vector<PhoneLabel> labels;  // true timing
  Waveform audio;
  F0Track f0;              // generating pitch, one frame per frame_shift samples
  MelCepstrumSequence mc;  // generating envelope
};

struct ToyCorpus {
  std::vector<ToyUtterance> utterances;
  Lexicon lexicon;
};

const PhoneSet& toy_phone_set();
Lexicon toy_lexicon();

// Mel-cepstral target of one phoneme (order 24, alpha 0.42). Throws
// OutOfVocabulary for phonemes outside toy_phone_set().
Vector toy_phone_target(const std::string& phoneme);
bool toy_phone_voiced(const std::string& phoneme);

ToyCorpus make_toy_corpus(const ToyCorpusConfig& cfg = {});

// Renders a timed label sequence of toy phonemes (times must be multiples of
// the frame shift after rounding).
ToyUtterance render_toy_utterance(const std::string& id, const std::vector<PhoneLabel>& labels,
                                  const ToyCorpusConfig& cfg, std::uint64_t seed);

}  // namespace hmmse
