#pragma once

#include <atomic>
#include <chrono>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <semaphore>
#include <string>
#include <vector>

#include <json.hpp>

#include "marshal/error.hpp"
#include "marshal/types.hpp"

namespace marshal {

enum class BackendKind { HttpChat, LocalCommand, Mock };

struct RetryPolicy {
    int max_attempts = 3;
    std::int64_t base_delay_ms = 500;
    double backoff_factor = 2.0;

    static constexpr std::int64_t kMaxDelayMs = 30'000;

    /// base_delay_ms * backoff_factor^(attempt-1), capped at 30 s. `attempt` is 1-based.
    [[nodiscard]] std::chrono::milliseconds delay_before_retry(int attempt) const;
    bool operator==(const RetryPolicy&) const = default;
};

/// A scripted reply for Mock backends. The first rule whose pattern matches the
/// flattened request text wins.
struct MockRule {
    std::string match;          // substring, or ECMAScript regex when `regex` is set
    bool regex = false;
    std::string reply;
    std::optional<Errc> fault;  // Timeout, RateLimited, ServerError or ClientError
    int fault_times = -1;       // fault on the first N matches only; -1 means always
    std::int64_t delay_ms = 0;
};

struct BackendSpec {
    std::string id;
    BackendKind kind = BackendKind::Mock;
    std::string endpoint_or_command;
    std::string model_name;
    std::string api_key_ref;    // environment variable holding the credential
    DecodingParams default_decoding;
    RetryPolicy retry;
    std::int64_t timeout_ms = 60'000;
    std::vector<MockRule> script;
};

/// Throws Error(ConfigError) on an invalid spec.
void validate_spec(const BackendSpec& spec);

/// Hooks a backend uses to reach the outside world; tests swap them out.
struct BackendContext {
    std::function<void(std::chrono::milliseconds)> sleep;
    std::function<std::optional<std::string>(const std::string&)> getenv;

    static BackendContext system();
};

class Backend {
public:
    virtual ~Backend() = default;
    /// Throws BackendError.
    virtual ModelResponse invoke(const ModelRequest& request) = 0;
    [[nodiscard]] virtual const BackendSpec& spec() const = 0;
};

using BackendPtr = std::shared_ptr<Backend>;

/// One transport attempt, no retries.
class Transport {
public:
    virtual ~Transport() = default;
    virtual std::string send(const ModelRequest& request) = 0;
};

std::unique_ptr<Transport> make_transport(const BackendSpec& spec, const BackendContext& ctx);

/// Backend that drives a transport under the spec's retry policy. Retryable
/// failures (Timeout, RateLimited, ServerError) are retried with backoff;
/// everything else fails on the first attempt.
class RetryingBackend final : public Backend {
public:
    RetryingBackend(BackendSpec spec, std::unique_ptr<Transport> transport, BackendContext ctx);

    ModelResponse invoke(const ModelRequest& request) override;
    [[nodiscard]] const BackendSpec& spec() const override { return spec_; }
    /// Transport attempts made over the lifetime of this backend.
    [[nodiscard]] std::int64_t attempts() const noexcept { return attempts_.load(); }

private:
    BackendSpec spec_;
    std::unique_ptr<Transport> transport_;
    BackendContext ctx_;
    std::atomic<std::int64_t> attempts_{0};
};

std::shared_ptr<RetryingBackend> make_backend(const BackendSpec& spec, const BackendContext& ctx = BackendContext::system());

/// Validates, builds and invokes in one go.
ModelResponse invoke(const BackendSpec& spec, const ModelRequest& request,
                     const BackendContext& ctx = BackendContext::system());

// ---- serialization ------------------------------------------------------------

/// Chat-completion request body: model, messages, temperature, max_tokens.
nlohmann::json chat_request_body(const std::string& model, const ModelRequest& request);
/// Content of the first choice's message. Throws BackendError(ServerError) on a malformed body.
std::string chat_response_text(const std::string& body);
/// Request document written to a local command's stdin.
nlohmann::json command_request_body(const ModelRequest& request);

// ---- cache --------------------------------------------------------------------

/// SHA-256 over a canonical serialization of (backend id, model, system text,
/// parts with image bytes digested, decoding params).
std::string cache_key(const std::string& backend_id, const std::string& model_name, const ModelRequest& request);
std::string cache_key(const BackendSpec& spec, const ModelRequest& request);

/// Directory of `<hexdigest>.resp` files. Entries are immutable once written;
/// the first writer for a key wins.
class CacheStore {
public:
    /// Creates the directory if needed. Throws Error(CacheIoError).
    explicit CacheStore(std::filesystem::path dir);

    [[nodiscard]] std::optional<ModelResponse> get(const std::string& key) const;
    /// Returns the persisted entry, which is `response` unless another writer got there first.
    ModelResponse put(const std::string& key, const ModelResponse& response) const;
    [[nodiscard]] std::size_t entry_count() const;
    std::size_t clear() const;
    [[nodiscard]] const std::filesystem::path& dir() const noexcept { return dir_; }

private:
    std::filesystem::path path_for(const std::string& key) const;
    std::filesystem::path dir_;
};

BackendPtr with_cache(BackendPtr inner, std::shared_ptr<const CacheStore> store);

/// Counts invocations that reach the wrapped backend.
class CountingBackend final : public Backend {
public:
    explicit CountingBackend(BackendPtr inner) : inner_(std::move(inner)) {}
    ModelResponse invoke(const ModelRequest& request) override {
        calls_.fetch_add(1);
        return inner_->invoke(request);
    }
    [[nodiscard]] const BackendSpec& spec() const override { return inner_->spec(); }
    [[nodiscard]] std::int64_t calls() const noexcept { return calls_.load(); }

private:
    BackendPtr inner_;
    std::atomic<std::int64_t> calls_{0};
};

/// Shared cap on in-flight model calls across every backend of a run.
class ConcurrencyLimit {
public:
    explicit ConcurrencyLimit(int limit) : sem_(limit) {}
    void acquire() { sem_.acquire(); }
    void release() { sem_.release(); }

private:
    std::counting_semaphore<1024> sem_;
};

BackendPtr with_limit(BackendPtr inner, std::shared_ptr<ConcurrencyLimit> limit);

}  // namespace marshal
