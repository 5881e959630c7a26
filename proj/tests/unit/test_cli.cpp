#include <gtest/gtest.h>

#include <sstream>

#include "cli.hpp"
#include "hmmse/hmm.hpp"
#include "json.hpp"
#include "support.hpp"

namespace hmmse {
namespace {

using cli::kExitOk;
using cli::kExitProcessing;
using cli::kExitValidation;
using testing::error_code;
namespace fs = std::filesystem;

struct Outcome {
  int code;
  std::string out;
  std::string err;
};

Outcome invoke(const std::vector<std::string>& args) {
  std::ostringstream out, err;
  const int code = cli::run(args, out, err);
  return {code, out.str(), err.str()};
}

std::string str(const fs::path& p) { return p.string(); }

TEST(Config, EmptyFileGivesDefaults) {
  testing::TempDir dir;
  testing::write_text(dir / "empty.cfg", "");
  const cli::RunConfig cfg = cli::load_config(dir / "empty.cfg");
  const cli::RunConfig defaults;
  EXPECT_EQ(cfg.analysis.order, defaults.analysis.order);
  EXPECT_EQ(cfg.analysis.alpha, defaults.analysis.alpha);
  EXPECT_EQ(cfg.excitation.seed, defaults.excitation.seed);
  EXPECT_EQ(cfg.gv.weight, defaults.gv.weight);
  EXPECT_EQ(cfg.rate, defaults.rate);
}

TEST(Config, CommandLineWins) {
  testing::TempDir dir;
  testing::write_text(dir / "a.cfg", "# comment\nseed = 1\nalpha = 0.3  # trailing\n");
  EXPECT_EQ(cli::load_config(dir / "a.cfg").excitation.seed, 1u);
  const cli::RunConfig cfg = cli::load_config(dir / "a.cfg", {{"seed", "2"}});
  EXPECT_EQ(cfg.excitation.seed, 2u);
  EXPECT_DOUBLE_EQ(cfg.analysis.alpha, 0.3);
}

TEST(Config, RejectsBadValuesAndKeys) {
  EXPECT_EQ(error_code([] { cli::load_config({}, {{"alpha", "1.5"}}); }), ErrorCode::ConfigError);
  EXPECT_EQ(error_code([] { cli::load_config({}, {{"colour", "blue"}}); }), ErrorCode::ConfigError);
  EXPECT_EQ(error_code([] { cli::load_config({}, {{"order", "-3"}}); }), ErrorCode::ConfigError);
  EXPECT_EQ(error_code([] { cli::parse_config_text("seed 3\n"); }), ErrorCode::ConfigError);
  try {
    cli::load_config({}, {{"alpha", "1.5"}});
  } catch (const Error& e) {
    EXPECT_NE(std::string(e.what()).find("alpha"), std::string::npos);
  }
}

TEST(Config, EveryKeyIsKnown) {
  EXPECT_FALSE(cli::config_keys().empty());
  for (const auto& key : cli::config_keys()) {
    cli::RunConfig cfg;
    // A bad value must be reported against the key, never as unknown.
    try {
      cli::apply_setting(cfg, key, "not-a-value");
    } catch (const Error& e) {
      EXPECT_EQ(std::string(e.what()).find("unknown key"), std::string::npos) << key;
    }
  }
}

TEST(Cli, HelpExitsZeroWithoutTouchingFiles) {
  testing::TempDir dir;
  const Outcome top = invoke({"--help"});
  EXPECT_EQ(top.code, kExitOk);
  EXPECT_NE(top.out.find("resynth"), std::string::npos);
  const Outcome sub = invoke({"resynth", "--in", str(dir / "a.wav"), "--out", str(dir / "b.wav"), "--help"});
  EXPECT_EQ(sub.code, kExitOk);
  EXPECT_TRUE(fs::is_empty(dir.path()));
}

TEST(Cli, UnknownFlagAndSubcommand) {
  const Outcome flag = invoke({"resynth", "--bogus"});
  EXPECT_EQ(flag.code, kExitValidation);
  EXPECT_NE(flag.err.find("--in"), std::string::npos);  // usage text
  EXPECT_EQ(invoke({"dance"}).code, kExitValidation);
  EXPECT_EQ(invoke({}).code, kExitValidation);
}

TEST(Cli, ConfigErrorsAreValidationFailures) {
  testing::TempDir dir;
  write_wav(testing::sine(150.0, 0.3), dir / "a.wav");
  const Outcome r = invoke({"resynth", "--in", str(dir / "a.wav"), "--out", str(dir / "b.wav"), "--set", "alpha=1.5"});
  EXPECT_EQ(r.code, kExitValidation);
  EXPECT_FALSE(fs::exists(dir / "b.wav"));
}

TEST(Cli, MissingInputIsProcessingFailure) {
  testing::TempDir dir;
  const Outcome r = invoke({"resynth", "--in", str(dir / "none.wav"), "--out", str(dir / "b.wav")});
  EXPECT_EQ(r.code, kExitProcessing);
  EXPECT_FALSE(r.err.empty());
}

TEST(Cli, ResynthIsReproducible) {
  testing::TempDir dir;
  write_wav(testing::pulse_train(130.0, 0.5), dir / "a.wav");
  ASSERT_EQ(invoke({"resynth", "--in", str(dir / "a.wav"), "--out", str(dir / "b.wav"), "--seed", "7"}).code, kExitOk);
  ASSERT_EQ(invoke({"resynth", "--in", str(dir / "a.wav"), "--out", str(dir / "c.wav"), "--seed", "7"}).code, kExitOk);
  EXPECT_EQ(testing::read_bytes(dir / "b.wav"), testing::read_bytes(dir / "c.wav"));
  EXPECT_EQ(read_wav(dir / "b.wav").size(), frame_count(8000, FrameConfig{}) * 80);
}

TEST(Cli, DegradeReportsSnr) {
  testing::TempDir dir;
  write_wav(testing::sine(150.0, 0.5), dir / "a.wav");
  const Outcome r = invoke({"degrade", "--in", str(dir / "a.wav"), "--out", str(dir / "n.wav"), "--set",
                            "interference=noise", "--set", "snr_db=5", "--seed", "3"});
  ASSERT_EQ(r.code, kExitOk) << r.err;
  EXPECT_NEAR(nlohmann::json::parse(r.out).at("snr_db").get<double>(), 5.0, 0.1);
}

TEST(Cli, SpectrogramWritesBothFiles) {
  testing::TempDir dir;
  write_wav(testing::sine(1000.0, 0.2), dir / "a.wav");
  ASSERT_EQ(invoke({"spectrogram", "--in", str(dir / "a.wav"), "--out", str(dir / "s")}).code, kExitOk);
  EXPECT_TRUE(fs::exists(dir / "s.csv"));
  EXPECT_TRUE(fs::exists(dir / "s.pgm"));
}

// Toy corpus and model built once through the command line.
class Pipeline : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    dir_ = new testing::TempDir();
    const Outcome toy = invoke({"toy-corpus", "--out", str(root()), "--utterances", "12", "--min-seconds", "2.5",
                                "--max-seconds", "3.0", "--seed", "4"});
    ASSERT_EQ(toy.code, kExitOk) << toy.err;
    const Outcome train = invoke({"train", "--audio-dir", str(root() / "wav"), "--label-dir", str(root() / "lab"),
                                  "--out", str(model()), "--set", "iterations=3", "--set", "context_iterations=1"});
    ASSERT_EQ(train.code, kExitOk) << train.err;
  }

  static void TearDownTestSuite() {
    delete dir_;
    dir_ = nullptr;
  }

  static fs::path root() { return dir_->path() / "toy"; }
  static fs::path model() { return dir_->path() / "voice.mdl"; }
  static fs::path wav(const std::string& stem) { return root() / "wav" / (stem + ".wav"); }
  static fs::path lab(const std::string& stem) { return root() / "lab" / (stem + ".lab"); }
  static std::string first_stem() { return fs::directory_iterator(root() / "wav")->path().stem().string(); }

  testing::TempDir scratch_;
  static testing::TempDir* dir_;
};

testing::TempDir* Pipeline::dir_ = nullptr;

TEST_F(Pipeline, CorpusAndModelExist) {
  EXPECT_TRUE(fs::exists(root() / "text.txt"));
  EXPECT_TRUE(fs::exists(root() / "lexicon.txt"));
  const VoiceModel m = read_model(model());
  EXPECT_FALSE(m.backoff.empty());
  EXPECT_EQ(m.metadata.gv_target.size(), m.metadata.order + 1);
}

TEST_F(Pipeline, CorpusCheckIsClean) {
  const Outcome r = invoke({"corpus-check", "--audio-dir", str(root() / "wav"), "--label-dir", str(root() / "lab")});
  ASSERT_EQ(r.code, kExitOk) << r.err;
  const auto report = nlohmann::json::parse(r.out);
  EXPECT_EQ(report.at("total"), 12);
  EXPECT_EQ(report.at("flagged"), 0);
}

TEST_F(Pipeline, AlignWritesCoveringLabels) {
  const std::string stem = first_stem();
  const fs::path out = scratch_ / "aligned.lab";
  const Outcome r = invoke({"align", "--model", str(model()), "--labels", str(lab(stem)), "--in", str(wav(stem)),
                            "--out", str(out)});
  ASSERT_EQ(r.code, kExitOk) << r.err;
  const auto truth = parse_label_file(lab(stem));
  const auto aligned = parse_label_file(out);
  ASSERT_EQ(aligned.size(), truth.size());
  const auto frames = nlohmann::json::parse(r.out).at("frames").get<std::int64_t>();
  EXPECT_EQ(*aligned.back().end, frames * 80 * kLabelUnitsPerSecond / 16000);
}

TEST_F(Pipeline, SynthFromTextAndLabels) {
  const Outcome text = invoke({"synth", "--model", str(model()), "--text", "ma me", "--lexicon",
                               str(root() / "lexicon.txt"), "--out", str(scratch_ / "t.wav"), "--seed", "2"});
  ASSERT_EQ(text.code, kExitOk) << text.err;
  EXPECT_GT(read_wav(scratch_ / "t.wav").size(), 0u);
  const Outcome labels = invoke({"synth", "--model", str(model()), "--labels", str(lab(first_stem())), "--out",
                                 str(scratch_ / "l.wav"), "--mgc", str(scratch_ / "l.mgc")});
  ASSERT_EQ(labels.code, kExitOk) << labels.err;
  EXPECT_TRUE(fs::exists(scratch_ / "l.mgc"));
  EXPECT_EQ(invoke({"synth", "--model", str(model()), "--out", str(scratch_ / "x.wav")}).code, kExitValidation);
}

TEST_F(Pipeline, EnhanceWiring) {
  const std::string stem = first_stem();
  const fs::path f0 = scratch_ / "clean.f0";
  ASSERT_EQ(invoke({"analyze", "--in", str(wav(stem)), "--f0", str(f0)}).code, kExitOk);
  const fs::path noisy = scratch_ / "noisy.wav";
  ASSERT_EQ(invoke({"degrade", "--in", str(wav(stem)), "--out", str(noisy), "--set", "snr_db=10"}).code, kExitOk);

  const Outcome r = invoke({"enhance", "--model", str(model()), "--labels", str(lab(stem)), "--observed", str(noisy),
                            "--side-f0", str(f0), "--out", str(scratch_ / "e.wav")});
  ASSERT_EQ(r.code, kExitOk) << r.err;
  const auto report = nlohmann::json::parse(r.out);
  EXPECT_EQ(report.at("aligned_on"), "observed");
  const auto frames = report.at("frames").get<std::size_t>();
  EXPECT_EQ(read_wav(scratch_ / "e.wav").size(), frames * 80);
  EXPECT_EQ(static_cast<Eigen::Index>(frames), read_feature_file(f0).data.rows());

  const Outcome clean = invoke({"enhance", "--model", str(model()), "--labels", str(lab(stem)), "--observed",
                                str(noisy), "--side-f0", str(f0), "--clean", str(wav(stem)), "--out",
                                str(scratch_ / "c.wav")});
  ASSERT_EQ(clean.code, kExitOk) << clean.err;
  EXPECT_EQ(nlohmann::json::parse(clean.out).at("aligned_on"), "clean");

  const Outcome own = invoke({"enhance", "--model", str(model()), "--labels", str(lab(stem)), "--observed",
                              str(noisy), "--side-from-observed", "--out", str(scratch_ / "o.wav")});
  EXPECT_EQ(own.code, kExitOk) << own.err;

  const Outcome neither = invoke({"enhance", "--model", str(model()), "--labels", str(lab(stem)), "--observed",
                                  str(noisy), "--out", str(scratch_ / "n.wav")});
  EXPECT_EQ(neither.code, kExitValidation);
}

TEST_F(Pipeline, MetricsReport) {
  const std::string stem = first_stem();
  ASSERT_EQ(invoke({"resynth", "--in", str(wav(stem)), "--out", str(scratch_ / "r.wav")}).code, kExitOk);
  const Outcome r = invoke({"metrics", "--ref", str(wav(stem)), "--test", str(scratch_ / "r.wav"), "--lag", "2"});
  ASSERT_EQ(r.code, kExitOk) << r.err;
  const auto report = nlohmann::json::parse(r.out);
  EXPECT_LT(report.at("mcd_db").get<double>(), 2.0);
  EXPECT_LT(report.at("f0_rmse_hz").get<double>(), 5.0);
}

TEST_F(Pipeline, AdaptWritesAdaptedModel) {
  const Outcome r = invoke({"adapt", "--model", str(model()), "--audio-dir", str(root() / "wav"), "--label-dir",
                            str(root() / "lab"), "--out", str(scratch_ / "a.mdl"), "--set", "adapt_iterations=1"});
  ASSERT_EQ(r.code, kExitOk) << r.err;
  const VoiceModel adapted = read_model(scratch_ / "a.mdl");
  EXPECT_EQ(adapted.kind, ModelKind::adapted);
  EXPECT_TRUE(adapted.metadata.spectral_transform.has_value());
}

TEST_F(Pipeline, RepeatedRunsAreBitIdentical) {
  const std::string stem = first_stem();
  for (const char* name : {"s1.wav", "s2.wav"}) {
    ASSERT_EQ(invoke({"synth", "--model", str(model()), "--labels", str(lab(stem)), "--out", str(scratch_ / std::string(name)),
                      "--seed", "11"})
                  .code,
              kExitOk);
  }
  EXPECT_EQ(testing::read_bytes(scratch_ / "s1.wav"), testing::read_bytes(scratch_ / "s2.wav"));
}

}  // namespace
}  // namespace hmmse
