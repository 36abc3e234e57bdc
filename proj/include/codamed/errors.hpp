#pragma once

#include <stdexcept>
#include <string>

namespace codamed {

enum class errc {
  // SBP validation
  non_binary_entry,
  empty_side,
  not_a_tree,
  incomplete_tree,
  dimension_mismatch,
  // compositions
  all_zero,
  negative_count,
  non_finite,
  // regression / estimation
  underdetermined,
  rank_deficient,
  stratum_too_small,
  missing_exposure_arm,
  weight_mismatch,
  // simulation
  divide_by_zero_beta,
  config_invalid,
  // plumbing
  io_error,
};

const char* errc_name(errc code) noexcept;

class Error : public std::runtime_error {
 public:
  Error(errc code, const std::string& msg)
      : std::runtime_error(std::string(errc_name(code)) + ": " + msg), code_(code) {}

  errc code() const noexcept { return code_; }

 private:
  errc code_;
};

/// Validation failure of a sequential binary partition; carries the
/// offending column (0-based, -1 when the whole matrix is at fault).
class SbpError : public Error {
 public:
  SbpError(errc code, int column, const std::string& msg)
      : Error(code, msg), column_(column) {}

  int column() const noexcept { return column_; }

 private:
  int column_;
};

inline const char* errc_name(errc code) noexcept {
  switch (code) {
    case errc::non_binary_entry: return "NonBinaryEntry";
    case errc::empty_side: return "EmptySide";
    case errc::not_a_tree: return "NotATree";
    case errc::incomplete_tree: return "IncompleteTree";
    case errc::dimension_mismatch: return "DimensionMismatch";
    case errc::all_zero: return "AllZero";
    case errc::negative_count: return "NegativeCount";
    case errc::non_finite: return "NonFinite";
    case errc::underdetermined: return "Underdetermined";
    case errc::rank_deficient: return "RankDeficient";
    case errc::stratum_too_small: return "StratumTooSmall";
    case errc::missing_exposure_arm: return "MissingExposureArm";
    case errc::weight_mismatch: return "WeightMismatch";
    case errc::divide_by_zero_beta: return "DivideByZeroBeta";
    case errc::config_invalid: return "ConfigInvalid";
    case errc::io_error: return "IoError";
  }
  return "UnknownError";
}

}  // namespace codamed
