#include "marshal/backends.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <regex>
#include <thread>

#include "marshal/digest.hpp"

namespace marshal {

using json = nlohmann::json;

std::chrono::milliseconds RetryPolicy::delay_before_retry(int attempt) const {
    const double raw = static_cast<double>(base_delay_ms) * std::pow(backoff_factor, std::max(0, attempt - 1));
    const double capped = std::min(raw, static_cast<double>(kMaxDelayMs));
    return std::chrono::milliseconds(static_cast<std::int64_t>(capped));
}

void validate_spec(const BackendSpec& spec) {
    auto fail = [&](const std::string& what) {
        throw Error(Errc::ConfigError, "backend '" + spec.id + "': " + what);
    };
    if (spec.id.empty()) throw Error(Errc::ConfigError, "backend with empty id");
    if (spec.retry.max_attempts < 1) fail("retry.max_attempts must be >= 1");
    if (spec.retry.base_delay_ms < 1) fail("retry.base_delay_ms must be >= 1");
    if (spec.retry.backoff_factor < 1.0) fail("retry.backoff_factor must be >= 1");
    if (spec.timeout_ms <= 0) fail("timeout must be positive");
    if (spec.default_decoding.temperature < 0.0) fail("temperature must be >= 0");
    if (spec.default_decoding.max_tokens <= 0) fail("max_tokens must be positive");
    switch (spec.kind) {
        case BackendKind::HttpChat:
            if (spec.endpoint_or_command.empty()) fail("http_chat requires an endpoint");
            if (spec.model_name.empty()) fail("http_chat requires a model name");
            break;
        case BackendKind::LocalCommand:
            if (spec.endpoint_or_command.empty()) fail("local_command requires a command");
            break;
        case BackendKind::Mock:
            for (const auto& rule : spec.script) {
                if (rule.regex) {
                    try {
                        std::regex re(rule.match);
                    } catch (const std::regex_error& e) {
                        fail("invalid mock regex '" + rule.match + "': " + e.what());
                    }
                }
                if (rule.fault && *rule.fault != Errc::Timeout && *rule.fault != Errc::RateLimited &&
                    *rule.fault != Errc::ServerError && *rule.fault != Errc::ClientError) {
                    fail("unsupported mock fault");
                }
            }
            break;
    }
}

BackendContext BackendContext::system() {
    return BackendContext{
        [](std::chrono::milliseconds d) { std::this_thread::sleep_for(d); },
        [](const std::string& name) -> std::optional<std::string> {
            if (const char* v = std::getenv(name.c_str())) return std::string(v);
            return std::nullopt;
        },
    };
}

// ---- serialization ------------------------------------------------------------

json chat_request_body(const std::string& model, const ModelRequest& request) {
    json content = json::array();
    for (const auto& part : request.user_parts) {
        if (const auto* t = std::get_if<TextPart>(&part)) {
            content.push_back({{"type", "text"}, {"text", t->text}});
        } else {
            const auto& img = std::get<ImagePart>(part);
            content.push_back({{"type", "image_url"},
                               {"image_url", {{"url", "data:" + img.media_type + ";base64," + base64_encode(img.bytes)}}}});
        }
    }
    json messages = json::array();
    if (!request.system_text.empty()) {
        messages.push_back({{"role", "system"}, {"content", request.system_text}});
    }
    messages.push_back({{"role", "user"}, {"content", std::move(content)}});
    return json{{"model", model},
                {"messages", std::move(messages)},
                {"temperature", request.decoding.temperature},
                {"max_tokens", request.decoding.max_tokens}};
}

std::string chat_response_text(const std::string& body) {
    try {
        const json doc = json::parse(body);
        const auto& content = doc.at("choices").at(0).at("message").at("content");
        if (content.is_null()) return {};
        if (content.is_string()) return content.get<std::string>();
        // Some servers return content as an array of typed parts.
        std::string out;
        for (const auto& p : content) {
            if (p.value("type", "") == "text") out += p.value("text", "");
        }
        return out;
    } catch (const json::exception& e) {
        throw BackendError(Errc::ServerError, std::string("malformed chat completion body: ") + e.what());
    }
}

json command_request_body(const ModelRequest& request) {
    json parts = json::array();
    for (const auto& part : request.user_parts) {
        if (const auto* t = std::get_if<TextPart>(&part)) {
            parts.push_back({{"type", "text"}, {"text", t->text}});
        } else {
            const auto& img = std::get<ImagePart>(part);
            parts.push_back({{"type", "image"},
                             {"media_type", img.media_type},
                             {"path", img.path},
                             {"data_base64", base64_encode(img.bytes)}});
        }
    }
    return json{{"system", request.system_text},
                {"parts", std::move(parts)},
                {"temperature", request.decoding.temperature},
                {"max_tokens", request.decoding.max_tokens}};
}

// ---- retry ----------------------------------------------------------------------

RetryingBackend::RetryingBackend(BackendSpec spec, std::unique_ptr<Transport> transport, BackendContext ctx)
    : spec_(std::move(spec)), transport_(std::move(transport)), ctx_(std::move(ctx)) {}

ModelResponse RetryingBackend::invoke(const ModelRequest& request) {
    validate_request(request);
    const auto start = std::chrono::steady_clock::now();
    for (int attempt = 1;; ++attempt) {
        attempts_.fetch_add(1);
        try {
            std::string text = transport_->send(request);
            const auto elapsed = std::chrono::steady_clock::now() - start;
            return ModelResponse{std::move(text),
                                 std::chrono::duration_cast<std::chrono::milliseconds>(elapsed).count(), spec_.id,
                                 false};
        } catch (BackendError& e) {
            e.set_attempts(attempt);
            if (!e.retryable() || attempt >= spec_.retry.max_attempts) throw;
            ctx_.sleep(spec_.retry.delay_before_retry(attempt));
        }
    }
}

std::shared_ptr<RetryingBackend> make_backend(const BackendSpec& spec, const BackendContext& ctx) {
    validate_spec(spec);
    return std::make_shared<RetryingBackend>(spec, make_transport(spec, ctx), ctx);
}

ModelResponse invoke(const BackendSpec& spec, const ModelRequest& request, const BackendContext& ctx) {
    return make_backend(spec, ctx)->invoke(request);
}

// ---- wrappers ---------------------------------------------------------------------

namespace {

class CachingBackend final : public Backend {
public:
    CachingBackend(BackendPtr inner, std::shared_ptr<const CacheStore> store)
        : inner_(std::move(inner)), store_(std::move(store)) {}

    ModelResponse invoke(const ModelRequest& request) override {
        const std::string key = cache_key(inner_->spec(), request);
        if (auto hit = store_->get(key)) {
            hit->from_cache = true;
            return *hit;
        }
        ModelResponse fresh = inner_->invoke(request);
        ModelResponse stored = store_->put(key, fresh);
        stored.from_cache = false;
        stored.latency_ms = fresh.latency_ms;
        return stored;
    }

    [[nodiscard]] const BackendSpec& spec() const override { return inner_->spec(); }

private:
    BackendPtr inner_;
    std::shared_ptr<const CacheStore> store_;
};

class LimitedBackend final : public Backend {
public:
    LimitedBackend(BackendPtr inner, std::shared_ptr<ConcurrencyLimit> limit)
        : inner_(std::move(inner)), limit_(std::move(limit)) {}

    ModelResponse invoke(const ModelRequest& request) override {
        limit_->acquire();
        struct Release {
            ConcurrencyLimit& l;
            ~Release() { l.release(); }
        } release{*limit_};
        return inner_->invoke(request);
    }

    [[nodiscard]] const BackendSpec& spec() const override { return inner_->spec(); }

private:
    BackendPtr inner_;
    std::shared_ptr<ConcurrencyLimit> limit_;
};

}  // namespace

BackendPtr with_cache(BackendPtr inner, std::shared_ptr<const CacheStore> store) {
    return std::make_shared<CachingBackend>(std::move(inner), std::move(store));
}

BackendPtr with_limit(BackendPtr inner, std::shared_ptr<ConcurrencyLimit> limit) {
    return std::make_shared<LimitedBackend>(std::move(inner), std::move(limit));
}

}  // namespace marshal
