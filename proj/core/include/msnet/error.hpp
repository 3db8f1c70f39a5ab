#pragma once

#include <stdexcept>
#include <string>

namespace msnet {

// One category per failure class; the CLI prints it in a machine-parseable
// "error: <category>: <message>" line and exits nonzero.
enum class ErrorCategory {
    usage,    // bad flags / bad arguments
    io,       // missing or unreadable files, refused writes
    parse,    // malformed file contents
    shape,    // tensor/map shape mismatch
    config,   // inconsistent configuration (incl. checkpoint/config mismatch)
    numeric,  // non-finite values where finite ones are required
    state,    // operation refused in the current state (e.g. non-empty out dir)
};

const char* to_string(ErrorCategory cat);

class Error : public std::runtime_error {
  public:
    Error(ErrorCategory cat, const std::string& msg)
        : std::runtime_error(msg), cat_(cat) {}

    ErrorCategory category() const { return cat_; }

  private:
    ErrorCategory cat_;
};

[[noreturn]] inline void fail(ErrorCategory cat, const std::string& msg) {
    throw Error(cat, msg);
}

}  // namespace msnet
