#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace hmmse {

enum class ErrorCode {
  NotFound,
  UnsupportedFormat,
  CorruptHeader,
  IoError,
  InvalidFftSize,
  InvalidCutoff,
  SilentSignal,
  ConfigError,
  EmptySignal,
  LengthMismatch,
  UnstableCoefficients,
  EmptyLabelFile,
  MalformedLine,
  NonMonotonicTimes,
  OutOfVocabulary,
  EmptySequence,
  TooShort,
  EmptyCorpus,
  DimensionMismatch,
  NumericalUnderflow,
  InsufficientData,
  TooFewFrames,
  UnalignableLabel,
  SingularSystem,
  MissingCompetingSignal,
  FrameCountMismatch,
  EmptyBand,
  UnknownSubcommand,
};

std::string_view to_string(ErrorCode code) noexcept;

// Every failure raised by the library carries one of the codes above so
// callers (and the CLI exit-code mapping) can dispatch without parsing text.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

inline std::string_view to_string(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::NotFound: return "NotFound";
    case ErrorCode::UnsupportedFormat: return "UnsupportedFormat";
    case ErrorCode::CorruptHeader: return "CorruptHeader";
    case ErrorCode::IoError: return "IoError";
    case ErrorCode::InvalidFftSize: return "InvalidFftSize";
    case ErrorCode::InvalidCutoff: return "InvalidCutoff";
    case ErrorCode::SilentSignal: return "SilentSignal";
    case ErrorCode::ConfigError: return "ConfigError";
    case ErrorCode::EmptySignal: return "EmptySignal";
    case ErrorCode::LengthMismatch: return "LengthMismatch";
    case ErrorCode::UnstableCoefficients: return "UnstableCoefficients";
    case ErrorCode::EmptyLabelFile: return "EmptyLabelFile";
    case ErrorCode::MalformedLine: return "MalformedLine";
    case ErrorCode::NonMonotonicTimes: return "NonMonotonicTimes";
    case ErrorCode::OutOfVocabulary: return "OutOfVocabulary";
    case ErrorCode::EmptySequence: return "EmptySequence";
    case ErrorCode::TooShort: return "TooShort";
    case ErrorCode::EmptyCorpus: return "EmptyCorpus";
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::NumericalUnderflow: return "NumericalUnderflow";
    case ErrorCode::InsufficientData: return "InsufficientData";
    case ErrorCode::TooFewFrames: return "TooFewFrames";
    case ErrorCode::UnalignableLabel: return "UnalignableLabel";
    case ErrorCode::SingularSystem: return "SingularSystem";
    case ErrorCode::MissingCompetingSignal: return "MissingCompetingSignal";
    case ErrorCode::FrameCountMismatch: return "FrameCountMismatch";
    case ErrorCode::EmptyBand: return "EmptyBand";
    case ErrorCode::UnknownSubcommand: return "UnknownSubcommand";
  }
  return "Unknown";
}

}  // namespace hmmse
