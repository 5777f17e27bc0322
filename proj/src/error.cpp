#include "bilevel/error.hpp"

namespace bilevel {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::kOracleDivergence: return "oracle-divergence";
    case ErrorCode::kInvalidIterationIndex: return "invalid-iteration-index";
    case ErrorCode::kInvalidArgument: return "invalid-argument";
    case ErrorCode::kDimensionMismatch: return "dimension-mismatch";
    case ErrorCode::kTapeMismatch: return "tape-mismatch";
    case ErrorCode::kBadLabel: return "bad-label";
    case ErrorCode::kBadEpisode: return "bad-episode";
    case ErrorCode::kTooFewSamples: return "too-few-samples";
    case ErrorCode::kCannotCorruptSingleClass: return "cannot-corrupt-single-class";
    case ErrorCode::kSplitTooLarge: return "split-too-large";
    case ErrorCode::kEpisodeInfeasible: return "episode-infeasible";
    case ErrorCode::kIdxBadMagic: return "idx-bad-magic";
    case ErrorCode::kIdxCountMismatch: return "idx-count-mismatch";
    case ErrorCode::kIo: return "io";
    case ErrorCode::kOracleDimLimit: return "oracle-dim-limit";
  }
  return "unknown";
}

Error::Error(ErrorCode code, const std::string& what)
    : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code), detail_(what) {}

}  // namespace bilevel
