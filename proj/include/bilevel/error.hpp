#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace bilevel {

enum class ErrorCode {
  kOracleDivergence,
  kInvalidIterationIndex,
  kInvalidArgument,
  kDimensionMismatch,
  kTapeMismatch,
  kBadLabel,
  kBadEpisode,
  kTooFewSamples,
  kCannotCorruptSingleClass,
  kSplitTooLarge,
  kEpisodeInfeasible,
  kIdxBadMagic,
  kIdxCountMismatch,
  kIo,
  kOracleDimLimit,
};

// Stable kebab-case identifier, used in messages and serialized reports.
std::string_view to_string(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what);

  ErrorCode code() const noexcept { return code_; }
  // Message without the code prefix.
  const std::string& detail() const noexcept { return detail_; }

 private:
  ErrorCode code_;
  std::string detail_;
};

}  // namespace bilevel
