// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <stdexcept>
#include <string>

namespace mgc {

/// Failure categories surfaced through the C API as status codes.
enum class ErrorKind {
  InvalidArgument = 1,
  Parse = 2,
  Validation = 3,
  Io = 4,
  Runtime = 5,
  ResumeMismatch = 6,
  NonFinite = 7,
  ShapeMismatch = 8,
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

inline void require(bool cond, ErrorKind kind, const std::string& what) {
  if (!cond) fail(kind, what);
}

}  // namespace mgc
