#pragma once

#include <stdexcept>
#include <string>

namespace geoemu {

// Error taxonomy mirrors the CLI exit codes: validation errors (bad config,
// bad shapes, contract violations at the API boundary) exit 1, runtime
// errors (I/O failures, numerical breakdown) exit 2.
enum class ErrorKind { validation, runtime };

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& msg)
      : std::runtime_error(msg), kind_(kind) {}
  ErrorKind kind() const { return kind_; }

 private:
  ErrorKind kind_;
};

inline Error validation_error(const std::string& msg) {
  return Error(ErrorKind::validation, msg);
}
inline Error runtime_error(const std::string& msg) {
  return Error(ErrorKind::runtime, msg);
}

}  // namespace geoemu
