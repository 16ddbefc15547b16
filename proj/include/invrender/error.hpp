#pragma once

#include <stdexcept>
#include <string>

namespace invrender {

enum class ErrorKind {
  InvalidInput,
  NumericalFailure,
  Io,
  Format,
};

// Every failure raised by the library is an Error; the C API maps the kind
// onto its status codes.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

[[noreturn]] inline void fail_invalid(const std::string& what) {
  throw Error(ErrorKind::InvalidInput, what);
}

[[noreturn]] inline void fail_numerical(const std::string& what) {
  throw Error(ErrorKind::NumericalFailure, what);
}

[[noreturn]] inline void fail_io(const std::string& what) { throw Error(ErrorKind::Io, what); }

[[noreturn]] inline void fail_format(const std::string& what) {
  throw Error(ErrorKind::Format, what);
}

}  // namespace invrender
