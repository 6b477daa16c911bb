#pragma once

#include <stdexcept>
#include <string>

namespace mctopo {

enum class ErrorKind {
  InvalidInput,
  InfeasibleTarget,
  DegenerateCell,
  NonOrthotropicCell,
  IllConditionedData,
  FitFailure,
  InvalidStiffness,
  Mechanism,
  RejectedIterate,
  Config,
  Io,
};

const char* to_string(ErrorKind kind);

/// Single exception type for the toolkit; `kind()` distinguishes failure modes.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(std::string(to_string(kind)) + ": " + what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

}  // namespace mctopo
