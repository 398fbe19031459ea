#pragma once

#include <stdexcept>
#include <string>

namespace fewshot {

enum class ErrorCode {
  // feature banks
  BadMagic,
  TruncatedFile,
  DimensionMismatch,
  NonFiniteValue,
  InvariantViolation,
  IncompatibleBanks,
  IoError,
  // numerics
  EmptyViewList,
  EmptyList,
  EmptyClass,
  DegenerateVector,
  // sampling
  NotEnoughClasses,
  NotEnoughImages,
  // configuration
  ConfigError,
  InvalidSpec,
  UnsupportedSpec,
};

const char* to_string(ErrorCode code);

// Config errors are caller mistakes (bad flags, bad spec); everything else is
// a problem with the data.
bool is_config_error(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace fewshot
