#pragma once

#include <stdexcept>
#include <string>

namespace flameforge {

// Malformed or inconsistent configuration, CLI arguments or on-disk inputs.
class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// A file or directory the metrics phase depends on does not exist.
class MissingInputError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Raised by backend clients. Transport failures and overload responses are
// retryable; error payloads returned by the server are not.
class BackendError : public std::runtime_error {
public:
    BackendError(const std::string& what, bool retryable)
        : std::runtime_error(what), retryable_(retryable) {}

    bool retryable() const noexcept { return retryable_; }

private:
    bool retryable_;
};

// A generation run exceeded its allowed failure rate.
class GenerationFailed : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

} // namespace flameforge
