#include "sentinel/error.hpp"

namespace sentinel {

std::string_view to_string(ErrorCode code) {
  switch (code) {
  case ErrorCode::invalid_argument: return "InvalidArgument";
  case ErrorCode::invalid_timestamp: return "InvalidTimestamp";
  case ErrorCode::missing_field: return "MissingField";
  case ErrorCode::negative_duration: return "NegativeDuration";
  case ErrorCode::invalid_field: return "InvalidField";
  case ErrorCode::malformed_line: return "MalformedLine";
  case ErrorCode::invalid_header: return "InvalidHeader";
  case ErrorCode::invalid_format: return "InvalidFormat";
  case ErrorCode::io_failure: return "IoFailure";
  case ErrorCode::unknown_level: return "UnknownLevel";
  case ErrorCode::not_time_level: return "NotTimeLevel";
  case ErrorCode::window_too_small: return "WindowTooSmall";
  case ErrorCode::config_error: return "ConfigError";
  case ErrorCode::empty_corpus: return "EmptyCorpus";
  case ErrorCode::empty_vocabulary: return "EmptyVocabulary";
  case ErrorCode::unknown_session_id: return "UnknownSessionId";
  case ErrorCode::dimension_mismatch: return "DimensionMismatch";
  case ErrorCode::wrong_model_kind: return "WrongModelKind";
  case ErrorCode::single_class_dataset: return "SingleClassDataset";
  case ErrorCode::length_mismatch: return "LengthMismatch";
  case ErrorCode::too_few_examples: return "TooFewExamples";
  case ErrorCode::infeasible_profile: return "InfeasibleProfile";
  case ErrorCode::corrupt_state: return "CorruptState";
  case ErrorCode::insufficient_labels: return "InsufficientLabels";
  }
  return "Unknown";
}

Error::Error(ErrorCode code, std::string detail)
    : std::runtime_error(std::string(to_string(code)) + ": " + detail),
      code_(code), detail_(std::move(detail)) {}

} // namespace sentinel
