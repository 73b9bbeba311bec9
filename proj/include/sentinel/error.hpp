#ifndef SENTINEL_ERROR_HPP
#define SENTINEL_ERROR_HPP

#include <stdexcept>
#include <string>
#include <string_view>

namespace sentinel {

enum class ErrorCode {
  invalid_argument,
  invalid_timestamp,
  missing_field,
  negative_duration,
  invalid_field,
  malformed_line,
  invalid_header,
  invalid_format,
  io_failure,
  unknown_level,
  not_time_level,
  window_too_small,
  config_error,
  empty_corpus,
  empty_vocabulary,
  unknown_session_id,
  dimension_mismatch,
  wrong_model_kind,
  single_class_dataset,
  length_mismatch,
  too_few_examples,
  infeasible_profile,
  corrupt_state,
  insufficient_labels,
};

std::string_view to_string(ErrorCode code);

// Every failure surfaced by the library. `detail` names the offending field,
// key, id or class so callers can report it without parsing what().
class Error : public std::runtime_error {
public:
  Error(ErrorCode code, std::string detail);

  ErrorCode code() const noexcept { return code_; }
  const std::string &detail() const noexcept { return detail_; }

private:
  ErrorCode code_;
  std::string detail_;
};

} // namespace sentinel

#endif // SENTINEL_ERROR_HPP
