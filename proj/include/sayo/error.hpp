#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace sayo {

enum class ErrorCode {
  parameter,
  precondition,
  shape,
  decomposition,
  unsupported_marginal,
  insufficient_data,
  numeric,
  not_found,
  empty,
  degenerate_model,
  parse,
  ordering,
  sequence,
  io,
};

std::string_view to_string(ErrorCode code);
// Wire form: parameter, not_found, degenerate_model, ...
std::string code_name(ErrorCode code);

// Every failure raised by the library carries a machine-readable code; the
// service layer maps codes onto HTTP statuses.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(std::string(to_string(code)) + ": " + message),
        code_(code),
        detail_(message) {}

  ErrorCode code() const noexcept { return code_; }
  // The message without the code prefix.
  const std::string& detail() const noexcept { return detail_; }

 private:
  ErrorCode code_;
  std::string detail_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& message) {
  throw Error(code, message);
}

inline void require(bool condition, ErrorCode code, const std::string& message) {
  if (!condition) fail(code, message);
}

}  // namespace sayo
