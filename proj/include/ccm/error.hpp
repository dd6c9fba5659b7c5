#pragma once

#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

namespace ccm {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Raised when caller-supplied data is malformed or violates a precondition
/// (bad files, missing landmarks, degenerate inputs). The CLI maps this to
/// exit code 2.
class InputError : public Error {
public:
    using Error::Error;
};

/// Raised when a numerical stage cannot produce a result for otherwise
/// well-formed input (singular systems, empty level sets).
class NumericError : public Error {
public:
    using Error::Error;
};

using WarningHandler = std::function<void(const std::string&)>;

/// Installs a process-wide sink for non-fatal warnings. Returns the previous
/// handler. The default handler writes to stderr.
WarningHandler set_warning_handler(WarningHandler handler);

void warn(const std::string& message);

/// Records the warnings raised on the current thread while alive (they are
/// still passed to the handler).
class WarningCapture {
public:
    WarningCapture();
    ~WarningCapture();
    WarningCapture(const WarningCapture&) = delete;
    WarningCapture& operator=(const WarningCapture&) = delete;

    const std::vector<std::string>& messages() const { return messages_; }

private:
    friend void warn(const std::string& message);
    std::vector<std::string> messages_;
    WarningCapture* previous_;
};

} // namespace ccm
