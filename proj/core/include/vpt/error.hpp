#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace vpt {

enum class ErrorKind {
  invalid_config,
  staircase_finished,
  staircase_incomplete,
  empty_input,
  unattainable_level,
  non_monotone_table,
  too_few_points,
  parse_error,
  out_of_range,
  none_felt,
  responder_disconnected,
  io_error,
  degenerate_sample,
  length_mismatch,
  all_zero_differences,
  empty_sample,
  invalid_spec,
  insufficient_data,
};

std::string_view to_string(ErrorKind kind);

/// Every failure raised by the library carries a machine-readable kind and,
/// where it makes sense, the offending field or row in the message.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(std::string(to_string(kind)) + ": " + message), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

}  // namespace vpt
