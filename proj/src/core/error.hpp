#pragma once

#include <stdexcept>
#include <string>

namespace omniact {

// Error categories mirror the CLI exit codes and the C API status values:
// 2 = invalid input/config, 3 = file I/O, 4 = numeric failure.
enum class ErrorCode { invalid = 2, io = 3, numeric = 4 };

class Error : public std::runtime_error {
public:
  Error(ErrorCode code, std::string msg)
      : std::runtime_error(std::move(msg)), code_(code) {}
  ErrorCode code() const noexcept { return code_; }

private:
  ErrorCode code_;
};

[[noreturn]] inline void throw_invalid(const std::string& msg) {
  throw Error(ErrorCode::invalid, msg);
}
[[noreturn]] inline void throw_io(const std::string& msg) {
  throw Error(ErrorCode::io, msg);
}
[[noreturn]] inline void throw_numeric(const std::string& msg) {
  throw Error(ErrorCode::numeric, msg);
}

}  // namespace omniact
