#pragma once

#include <stdexcept>
#include <string>

namespace spde2d {

enum class ErrorCode {
  NonPositiveOperator,
  BadNoiseParam,
  MisalignedThinning,
  DegenerateView,
  IndivisibleCoarsening,
  FoldedRequiresUniformGrid,
  NonUniformGrid,
  ToleranceNotMet,
  DegenerateDesign,
  NonPositiveQV,
  InvertedModeOrder,
  BadMagic,
  DimMismatch,
  TruncatedFile,
  TooFewRows,
  BadConfig,
};

inline const char* error_code_name(ErrorCode c) {
  switch (c) {
    case ErrorCode::NonPositiveOperator: return "NonPositiveOperator";
    case ErrorCode::BadNoiseParam: return "BadNoiseParam";
    case ErrorCode::MisalignedThinning: return "MisalignedThinning";
    case ErrorCode::DegenerateView: return "DegenerateView";
    case ErrorCode::IndivisibleCoarsening: return "IndivisibleCoarsening";
    case ErrorCode::FoldedRequiresUniformGrid: return "FoldedRequiresUniformGrid";
    case ErrorCode::NonUniformGrid: return "NonUniformGrid";
    case ErrorCode::ToleranceNotMet: return "ToleranceNotMet";
    case ErrorCode::DegenerateDesign: return "DegenerateDesign";
    case ErrorCode::NonPositiveQV: return "NonPositiveQV";
    case ErrorCode::InvertedModeOrder: return "InvertedModeOrder";
    case ErrorCode::BadMagic: return "BadMagic";
    case ErrorCode::DimMismatch: return "DimMismatch";
    case ErrorCode::TruncatedFile: return "TruncatedFile";
    case ErrorCode::TooFewRows: return "TooFewRows";
    case ErrorCode::BadConfig: return "BadConfig";
  }
  return "Unknown";
}

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(error_code_name(code)) + ": " + what), code_(code) {}

  ErrorCode code() const { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace spde2d
