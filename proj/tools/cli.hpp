#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <utility>
#include <vector>

#include "hmmse/analysis.hpp"
#include "hmmse/enhance.hpp"
#include "hmmse/labels.hpp"
#include "hmmse/pargen.hpp"
#include "hmmse/vocoder.hpp"

namespace hmmse::cli {

// Every tunable of the pipeline, loaded from "key = value" text.
struct RunConfig {
  AnalysisConfig analysis;
  ExcitationConfig excitation;
  GvTarget gv;  // target comes from the model; weight, iterations and step from here
  InterferenceSpec interference;
  ContextWidth context = ContextWidth::triphone;
  TrainingRecipe recipe;
  int adapt_iterations = 3;
  double rate = 1.0;
  int sample_rate = 16000;
};

using Overrides = std::vector<std::pair<std::string, std::string>>;

// Defaults, then the file (when `path` is non-empty), then `overrides`.
// Throws ConfigError naming the offending key.
RunConfig load_config(const std::filesystem::path& path, const Overrides& overrides = {});

// Parses "key = value" lines with "#" comments into (key, value) pairs.
Overrides parse_config_text(const std::string& text);

// Applies one setting; throws ConfigError for unknown keys or bad values.
void apply_setting(RunConfig& cfg, const std::string& key, const std::string& value);

// Validates cross-field constraints through the owning modules.
void validate(const RunConfig& cfg);

// Keys accepted by apply_setting, in documentation order.
const std::vector<std::string>& config_keys();

inline constexpr int kExitOk = 0;
inline constexpr int kExitValidation = 1;
inline constexpr int kExitProcessing = 2;

// args excludes the program name.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);
int run(int argc, char** argv);

}  // namespace hmmse::cli
