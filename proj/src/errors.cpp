#include "fewshot/errors.hpp"

namespace fewshot {

const char* to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::BadMagic: return "BadMagic";
    case ErrorCode::TruncatedFile: return "TruncatedFile";
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::NonFiniteValue: return "NonFiniteValue";
    case ErrorCode::InvariantViolation: return "InvariantViolation";
    case ErrorCode::IncompatibleBanks: return "IncompatibleBanks";
    case ErrorCode::IoError: return "IoError";
    case ErrorCode::EmptyViewList: return "EmptyViewList";
    case ErrorCode::EmptyList: return "EmptyList";
    case ErrorCode::EmptyClass: return "EmptyClass";
    case ErrorCode::DegenerateVector: return "DegenerateVector";
    case ErrorCode::NotEnoughClasses: return "NotEnoughClasses";
    case ErrorCode::NotEnoughImages: return "NotEnoughImages";
    case ErrorCode::ConfigError: return "ConfigError";
    case ErrorCode::InvalidSpec: return "InvalidSpec";
    case ErrorCode::UnsupportedSpec: return "UnsupportedSpec";
  }
  return "UnknownError";
}

bool is_config_error(ErrorCode code) {
  switch (code) {
    case ErrorCode::ConfigError:
    case ErrorCode::InvalidSpec:
    case ErrorCode::UnsupportedSpec:
      return true;
    default:
      return false;
  }
}

}  // namespace fewshot
