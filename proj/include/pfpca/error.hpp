#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace pfpca {

enum class ErrorCode {
  // grid and penalty
  GridTooSmall,
  NonIncreasingGrid,
  EigenFailure,
  NegativeAlpha,
  GridMismatch,
  // fitting
  DimensionMismatch,
  ZeroMatrix,
  ZeroScores,
  DegenerateLeverage,
  SingularReducedSystem,
  InvalidAlphaGrid,
  DimensionError,
  TooFewRows,
  // simulation
  AllZeroDiffs,
  InvalidConfig,
  StudyFailed,
  // input
  ParseError,
  RaggedRows,
  GridLengthMismatch,
  NonNumericCell,
  NegativeCount,
  IoError,
};

constexpr std::string_view to_string(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::GridTooSmall: return "GridTooSmall";
    case ErrorCode::NonIncreasingGrid: return "NonIncreasingGrid";
    case ErrorCode::EigenFailure: return "EigenFailure";
    case ErrorCode::NegativeAlpha: return "NegativeAlpha";
    case ErrorCode::GridMismatch: return "GridMismatch";
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::ZeroMatrix: return "ZeroMatrix";
    case ErrorCode::ZeroScores: return "ZeroScores";
    case ErrorCode::DegenerateLeverage: return "DegenerateLeverage";
    case ErrorCode::SingularReducedSystem: return "SingularReducedSystem";
    case ErrorCode::InvalidAlphaGrid: return "InvalidAlphaGrid";
    case ErrorCode::DimensionError: return "DimensionError";
    case ErrorCode::TooFewRows: return "TooFewRows";
    case ErrorCode::AllZeroDiffs: return "AllZeroDiffs";
    case ErrorCode::InvalidConfig: return "InvalidConfig";
    case ErrorCode::StudyFailed: return "StudyFailed";
    case ErrorCode::ParseError: return "ParseError";
    case ErrorCode::RaggedRows: return "RaggedRows";
    case ErrorCode::GridLengthMismatch: return "GridLengthMismatch";
    case ErrorCode::NonNumericCell: return "NonNumericCell";
    case ErrorCode::NegativeCount: return "NegativeCount";
    case ErrorCode::IoError: return "IoError";
  }
  return "Unknown";
}

/// Errors caused by malformed user input rather than numerical trouble.
/// The CLI maps these to exit code 2 and everything else to 3.
constexpr bool is_input_error(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::GridTooSmall:
    case ErrorCode::NonIncreasingGrid:
    case ErrorCode::NegativeAlpha:
    case ErrorCode::GridMismatch:
    case ErrorCode::DimensionMismatch:
    case ErrorCode::InvalidAlphaGrid:
    case ErrorCode::DimensionError:
    case ErrorCode::TooFewRows:
    case ErrorCode::InvalidConfig:
    case ErrorCode::ParseError:
    case ErrorCode::RaggedRows:
    case ErrorCode::GridLengthMismatch:
    case ErrorCode::NonNumericCell:
    case ErrorCode::NegativeCount:
    case ErrorCode::IoError:
      return true;
    default:
      return false;
  }
}

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace pfpca
