#pragma once

#include <stdexcept>
#include <string>

namespace pecan {

// Thrown on malformed input files (bad magic, ragged CSV rows, truncated
// payloads). The CLI maps this to exit code 3.
struct format_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Thrown when a file cannot be opened/read/written. Exit code 3.
struct io_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Thrown on inconsistent or unusable configuration. Exit code 2.
struct config_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Thrown when a soundness audit observes a certificate violation.
// Exit code 1. This is the one error we hope never fires.
struct audit_violation : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace pecan
