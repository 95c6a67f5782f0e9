#pragma once

#include <stdexcept>
#include <string>

namespace d2v {

// Raised when a caller breaks an operation's precondition (shape mismatch,
// empty input, double backward). Indicates a programming error.
class ContractError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

// Raised when input data fails domain validation.
class ValidationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Training produced a non-finite loss.
class DivergenceError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Malformed, truncated, or incompatible file on disk.
class FormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

#define D2V_REQUIRE(cond, msg)                              \
  do {                                                      \
    if (!(cond)) throw ::d2v::ContractError(std::string(msg)); \
  } while (0)

}  // namespace d2v
