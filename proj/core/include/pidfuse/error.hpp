#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace pidfuse {

enum class ErrorKind {
  kDimensionMismatch,
  kEmptyClip,
  kScoreOutOfRange,
  kNonFiniteInput,
  kEmptyFrameList,
  kLabelOutOfRange,
  kEmptyTrainingSet,
  kInvalidConfig,
  kDuplicateClipWithinList,
  kInvalidRanking,
  kEmptyBand,
  kMissingModality,
  kEmptyModelSet,
  kDuplicateInRanking,
  kMissingLabel,
  kTooShort,
  kWrongSampleRate,
  kEmptyInput,
  kMalformedRecord,
  kVersionMismatch,
  kIoFailure,
};

std::string_view to_string(ErrorKind kind);

// Every library failure surfaces as this exception. The message names the
// offending field, line or file.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(std::string(to_string(kind)) + ": " + what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

}  // namespace pidfuse
