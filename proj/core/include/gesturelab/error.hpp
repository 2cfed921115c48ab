#pragma once

#include <stdexcept>
#include <string>

namespace gesturelab {

// Error taxonomy used across the library. The CLI maps Numeric to exit code
// 3 and every other kind (configuration/input problems) to exit code 2.
enum class ErrorKind {
  Argument,   // caller violated an operation precondition
  Config,     // invalid configuration file or field
  Io,         // filesystem or serialization failure
  Integrity,  // dataset/checkpoint contents inconsistent
  Numeric,    // non-finite values or degenerate numerical state
};

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(message), kind_(kind) {}

  ErrorKind kind() const { return kind_; }

 private:
  ErrorKind kind_;
};

[[noreturn]] inline void throw_error(ErrorKind kind, const std::string& message) {
  throw Error(kind, message);
}

inline void check(bool condition, ErrorKind kind, const std::string& message) {
  if (!condition) throw_error(kind, message);
}

inline void check_arg(bool condition, const std::string& message) {
  check(condition, ErrorKind::Argument, message);
}

inline void check_config(bool condition, const std::string& message) {
  check(condition, ErrorKind::Config, message);
}

}  // namespace gesturelab
