#include "vpt/error.hpp"

namespace vpt {

std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::invalid_config: return "invalid-config";
    case ErrorKind::staircase_finished: return "staircase-finished";
    case ErrorKind::staircase_incomplete: return "staircase-incomplete";
    case ErrorKind::empty_input: return "empty-input";
    case ErrorKind::unattainable_level: return "unattainable-level";
    case ErrorKind::non_monotone_table: return "non-monotone-table";
    case ErrorKind::too_few_points: return "too-few-points";
    case ErrorKind::parse_error: return "parse-error";
    case ErrorKind::out_of_range: return "out-of-range";
    case ErrorKind::none_felt: return "none-felt";
    case ErrorKind::responder_disconnected: return "responder-disconnected";
    case ErrorKind::io_error: return "io-error";
    case ErrorKind::degenerate_sample: return "degenerate-sample";
    case ErrorKind::length_mismatch: return "length-mismatch";
    case ErrorKind::all_zero_differences: return "all-zero-differences";
    case ErrorKind::empty_sample: return "empty-sample";
    case ErrorKind::invalid_spec: return "invalid-spec";
    case ErrorKind::insufficient_data: return "insufficient-data";
  }
  return "unknown";
}

}  // namespace vpt
