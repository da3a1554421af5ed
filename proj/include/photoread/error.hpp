#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace photoread {

/// Broad failure categories. The CLI maps each to a distinct exit code.
enum class ErrorKind {
  kDomain,        // parameter or argument outside its mathematical domain
  kDegenerate,    // input is valid but carries no usable information
  kNumerical,     // a computation produced non-finite values
  kInvariant,     // an input object violates its documented invariant
  kArchitecture,  // network shapes do not match
  kConfig,        // configuration file or option is malformed
  kData,          // shot / weight file is malformed, truncated or corrupt
  kCalibration,   // a required calibration is missing
  kTraining,      // optimisation diverged
};

std::string_view to_string(ErrorKind kind);

/// Process exit code for a failure of the given kind (0 is reserved for success).
int exit_code(ErrorKind kind);

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& what) { throw Error(kind, what); }

inline void require(bool condition, ErrorKind kind, const std::string& what) {
  if (!condition) fail(kind, what);
}

}  // namespace photoread
