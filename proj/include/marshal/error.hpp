#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace marshal {

enum class Errc {
    EmptyRegistry,
    Timeout,
    RateLimited,
    ServerError,
    ClientError,
    MissingCredential,
    ScriptMiss,
    CacheIoError,
    Unparseable,
    BackendExhausted,
    MissingImage,
    DuplicateKind,
    MalformedRecord,
    DuplicateId,
    InvalidLabel,
    MissingImageFile,
    ExpectationMismatch,
    MissingGold,
    MissingPrediction,
    ConfigError,
    InvalidRequest,
};

std::string_view to_string(Errc code);

class Error : public std::runtime_error {
public:
    Error(Errc code, const std::string& message)
        : std::runtime_error(message), code_(code) {}

    [[nodiscard]] Errc code() const noexcept { return code_; }

private:
    Errc code_;
};

// Raised by a backend call. `attempts` is the number of transport attempts
// consumed before the error surfaced.
class BackendError : public Error {
public:
    BackendError(Errc code, const std::string& message, int attempts = 1, int http_status = 0)
        : Error(code, message), attempts_(attempts), http_status_(http_status) {}

    [[nodiscard]] int attempts() const noexcept { return attempts_; }
    [[nodiscard]] int http_status() const noexcept { return http_status_; }
    [[nodiscard]] bool retryable() const noexcept {
        return code() == Errc::Timeout || code() == Errc::RateLimited || code() == Errc::ServerError;
    }

    void set_attempts(int n) noexcept { attempts_ = n; }

private:
    int attempts_;
    int http_status_;
};

}  // namespace marshal
