#pragma once

#include <stdexcept>
#include <string>

namespace smallarea {

/// Error classes surfaced through the C API as distinct status codes.
enum class ErrorKind {
  invalid_argument,
  schema,
  infeasible,
  missing_prediction,
  io,
};

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& what) { throw Error(kind, what); }

}  // namespace smallarea
