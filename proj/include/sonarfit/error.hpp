#pragma once

#include <stdexcept>
#include <string>

namespace sonarfit {

/// Failure categories. The CLI maps them onto process exit codes.
enum class ErrorKind {
  InvalidArgument,  // precondition or invariant violated by the caller
  Config,           // configuration could not be validated
  Io,               // file missing, unreadable, malformed or unwritable
  Numeric,          // non-finite values during training or evaluation
};

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& what) {
  throw Error(kind, what);
}

inline void require(bool condition, const std::string& what) {
  if (!condition) fail(ErrorKind::InvalidArgument, what);
}

}  // namespace sonarfit
