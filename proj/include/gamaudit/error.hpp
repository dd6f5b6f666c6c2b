#pragma once

#include <stdexcept>
#include <string>

namespace gamaudit {

enum class ErrorKind {
  Config,       // bad flags, config files, unknown keys, missing columns
  Parse,        // malformed CSV/JSON content
  Data,         // empty or inconsistent data
  Degenerate,   // constant columns, zero-variance targets
  Split,        // not enough groups to partition
  Basis,        // spline construction failed
  SingularFit,  // penalized system rank deficient
  Prediction,   // model/data mismatch at predict time
  Rule,         // labeling rule references unknown features
  Generation,   // synthetic generator config inconsistent
  Training,     // stub training diverged
  Detection,    // anything else inside the detection pipeline
};

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

const char* to_string(ErrorKind kind);

// Process exit code for the CLI: 2 config, 3 data, 4 internal.
int exit_code(ErrorKind kind);

}  // namespace gamaudit
