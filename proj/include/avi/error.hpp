#pragma once

#include <stdexcept>
#include <string>

namespace avi {

// Bad input: shapes, ranges, unknown tokens, corrupt files. CLI exit code 1.
class ValidationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Non-finite values during training or sampling. CLI exit code 2.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

template <class... Args>
[[noreturn]] void fail(Args&&... parts) {
  std::string msg;
  ((msg += parts), ...);
  throw ValidationError(msg);
}

inline void require(bool cond, const std::string& msg) {
  if (!cond) throw ValidationError(msg);
}

}  // namespace avi
