#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace reckon {

// CLI exit codes.
enum ExitCode : int {
  kExitOk = 0,
  kExitValidation = 1,
  kExitConfig = 2,
  kExitIo = 3,
};

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct IoError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Malformed input file; carries the byte offset of the offending field.
struct ParseError : IoError {
  ParseError(uint64_t at, const std::string& what)
      : IoError("byte " + std::to_string(at) + ": " + what), offset(at) {}
  uint64_t offset;
};

// Violation of an API precondition.
struct ContractViolation : std::logic_error {
  using std::logic_error::logic_error;
};

}  // namespace reckon
