#include "marshal/config.hpp"

#include <fstream>
#include <set>

#include "marshal/digest.hpp"
#include "marshal/error.hpp"

namespace marshal {

namespace fs = std::filesystem;
using json = nlohmann::json;
using ojson = nlohmann::ordered_json;

const BackendSpec* RunConfig::find_backend(const std::string& id) const noexcept {
    for (const auto& b : backends) {
        if (b.id == id) return &b;
    }
    return nullptr;
}

namespace {

[[noreturn]] void config_error(const std::string& what) { throw Error(Errc::ConfigError, what); }

void check_keys(const json& obj, const std::set<std::string>& allowed, const std::string& where) {
    if (!obj.is_object()) config_error(where + " must be an object");
    for (const auto& [key, _] : obj.items()) {
        if (!allowed.contains(key)) config_error("unknown key '" + key + "' in " + where);
    }
}

SubTaskKind kind_from(const std::string& name, const std::string& where) {
    auto k = parse_kind(name);
    if (!k) config_error("unknown sub-task '" + name + "' in " + where);
    return *k;
}

KindSet kind_set_from(const json& arr, const std::string& where) {
    if (!arr.is_array()) config_error(where + " must be an array of sub-task names");
    KindSet out;
    for (const auto& v : arr) {
        if (!v.is_string()) config_error(where + " must contain strings");
        out.insert(kind_from(v.get<std::string>(), where));
    }
    return out;
}

std::map<SubTaskKind, std::string> kind_map_from(const json& obj, const std::string& where) {
    if (!obj.is_object()) config_error(where + " must be an object");
    std::map<SubTaskKind, std::string> out;
    for (const auto& [key, value] : obj.items()) {
        if (!value.is_string()) config_error(where + "." + key + " must be a string");
        out[kind_from(key, where)] = value.get<std::string>();
    }
    return out;
}

RetryPolicy retry_from(const json& obj, RetryPolicy base, const std::string& where) {
    check_keys(obj, {"max_attempts", "base_delay_ms", "backoff_factor"}, where);
    base.max_attempts = obj.value("max_attempts", base.max_attempts);
    base.base_delay_ms = obj.value("base_delay_ms", base.base_delay_ms);
    base.backoff_factor = obj.value("backoff_factor", base.backoff_factor);
    return base;
}

DecodingParams decoding_from(const json& obj, DecodingParams base, const std::string& where) {
    check_keys(obj, {"temperature", "max_tokens"}, where);
    base.temperature = obj.value("temperature", base.temperature);
    base.max_tokens = obj.value("max_tokens", base.max_tokens);
    return base;
}

std::optional<Errc> fault_from(const std::string& name, const std::string& where) {
    if (name == "timeout") return Errc::Timeout;
    if (name == "rate_limited") return Errc::RateLimited;
    if (name == "server_error") return Errc::ServerError;
    if (name == "client_error") return Errc::ClientError;
    config_error("unknown fault '" + name + "' in " + where);
}

std::string fault_name(Errc code) {
    switch (code) {
        case Errc::Timeout: return "timeout";
        case Errc::RateLimited: return "rate_limited";
        case Errc::ServerError: return "server_error";
        default: return "client_error";
    }
}

std::vector<MockRule> script_from(const json& arr, const std::string& where) {
    if (!arr.is_array()) config_error(where + " must be an array of rules");
    std::vector<MockRule> out;
    for (std::size_t i = 0; i < arr.size(); ++i) {
        const json& r = arr[i];
        const std::string at = where + "[" + std::to_string(i) + "]";
        check_keys(r, {"match", "regex", "reply", "fault", "fault_times", "delay_ms"}, at);
        MockRule rule;
        rule.match = r.value("match", std::string());
        rule.regex = r.value("regex", false);
        rule.reply = r.value("reply", std::string());
        if (r.contains("fault") && !r["fault"].is_null()) rule.fault = fault_from(r["fault"].get<std::string>(), at);
        rule.fault_times = r.value("fault_times", -1);
        rule.delay_ms = r.value("delay_ms", std::int64_t{0});
        out.push_back(std::move(rule));
    }
    return out;
}

BackendSpec backend_from(const json& obj, const RunConfig& run, const fs::path& base_dir, std::size_t index) {
    const std::string where = "backends[" + std::to_string(index) + "]";
    check_keys(obj,
               {"id", "kind", "endpoint", "command", "model", "api_key_env", "decoding", "retry", "timeout_ms", "script",
                "script_file"},
               where);
    BackendSpec spec;
    spec.id = obj.value("id", std::string());
    if (spec.id.empty()) config_error(where + " has no id");
    const std::string kind = obj.value("kind", std::string());
    if (kind == "http_chat") {
        spec.kind = BackendKind::HttpChat;
        spec.endpoint_or_command = obj.value("endpoint", std::string());
    } else if (kind == "local_command") {
        spec.kind = BackendKind::LocalCommand;
        spec.endpoint_or_command = obj.value("command", std::string());
    } else if (kind == "mock") {
        spec.kind = BackendKind::Mock;
    } else {
        config_error(where + " ('" + spec.id + "') has unknown kind '" + kind + "'");
    }
    spec.model_name = obj.value("model", std::string());
    spec.api_key_ref = obj.value("api_key_env", std::string());
    spec.default_decoding = obj.contains("decoding") ? decoding_from(obj["decoding"], run.decoding, where + ".decoding")
                                                     : run.decoding;
    spec.retry = obj.contains("retry") ? retry_from(obj["retry"], run.retry, where + ".retry") : run.retry;
    spec.timeout_ms = obj.value("timeout_ms", run.timeout_ms);
    if (obj.contains("script")) spec.script = script_from(obj["script"], where + ".script");
    if (obj.contains("script_file")) {
        const fs::path p = base_dir / obj["script_file"].get<std::string>();
        std::ifstream in(p);
        if (!in) config_error(where + ": cannot open script_file " + p.string());
        json rules;
        try {
            rules = json::parse(in);
        } catch (const json::exception& e) {
            config_error(where + ": malformed script_file " + p.string() + ": " + e.what());
        }
        auto more = script_from(rules, p.string());
        spec.script.insert(spec.script.end(), more.begin(), more.end());
    }
    return spec;
}

ojson kind_set_json(KindSet s) {
    ojson arr = ojson::array();
    for (auto k : s.to_vector()) arr.push_back(display_name(k));
    return arr;
}

ojson kind_map_json(const std::map<SubTaskKind, std::string>& m) {
    ojson obj = ojson::object();
    for (auto k : kCanonicalKinds) {
        if (auto it = m.find(k); it != m.end()) obj[std::string(display_name(k))] = it->second;
    }
    return obj;
}

}  // namespace

RunConfig parse_run_config(const json& doc, const fs::path& base_dir) {
    check_keys(doc,
               {"backends", "commander", "classifier", "bindings", "descriptions", "templates", "mandatory",
                "forced_plan", "commander_sees_image", "classifier_sees_image", "workers", "timeout_ms", "retry",
                "decoding", "cache_dir", "disabled", "text_only"},
               "config");
    RunConfig cfg;
    try {
        cfg.commander = doc.value("commander", std::string());
        cfg.classifier = doc.value("classifier", std::string());
        if (doc.contains("bindings")) cfg.bindings = kind_map_from(doc["bindings"], "bindings");
        if (doc.contains("descriptions")) cfg.descriptions = kind_map_from(doc["descriptions"], "descriptions");
        if (doc.contains("templates")) cfg.templates = kind_map_from(doc["templates"], "templates");
        if (doc.contains("mandatory") && !doc["mandatory"].is_null())
            cfg.mandatory = kind_set_from(doc["mandatory"], "mandatory");
        if (doc.contains("forced_plan") && !doc["forced_plan"].is_null())
            cfg.forced_plan = kind_set_from(doc["forced_plan"], "forced_plan");
        cfg.commander_sees_image = doc.value("commander_sees_image", true);
        cfg.classifier_sees_image = doc.value("classifier_sees_image", true);
        cfg.workers = doc.value("workers", 4);
        cfg.timeout_ms = doc.value("timeout_ms", std::int64_t{60'000});
        if (doc.contains("retry")) cfg.retry = retry_from(doc["retry"], cfg.retry, "retry");
        if (doc.contains("decoding")) cfg.decoding = decoding_from(doc["decoding"], cfg.decoding, "decoding");
        if (doc.contains("cache_dir") && !doc["cache_dir"].is_null()) {
            const fs::path p = doc["cache_dir"].get<std::string>();
            cfg.cache_dir = p.is_absolute() ? p : base_dir / p;
        }
        if (doc.contains("disabled")) cfg.disabled = kind_set_from(doc["disabled"], "disabled");
        cfg.text_only = doc.value("text_only", false);

        if (!doc.contains("backends") || !doc["backends"].is_array()) config_error("config needs a 'backends' array");
        std::set<std::string> ids;
        for (std::size_t i = 0; i < doc["backends"].size(); ++i) {
            BackendSpec spec = backend_from(doc["backends"][i], cfg, base_dir, i);
            if (!ids.insert(spec.id).second) config_error("duplicate backend id '" + spec.id + "'");
            cfg.backends.push_back(std::move(spec));
        }
    } catch (const json::exception& e) {
        config_error(std::string("config type error: ") + e.what());
    }
    return cfg;
}

RunConfig load_run_config(const fs::path& path) {
    std::ifstream in(path);
    if (!in) config_error("cannot open config " + path.string());
    json doc;
    try {
        doc = json::parse(in);
    } catch (const json::exception& e) {
        config_error("malformed config " + path.string() + ": " + e.what());
    }
    return parse_run_config(doc, path.parent_path());
}

Registry effective_registry(const RunConfig& config) {
    RegistryOverrides o;
    o.descriptions = config.descriptions;
    o.backends = config.bindings;
    o.templates = config.templates;
    o.mandatory = config.mandatory;
    Registry r = apply_ablation(apply_overrides(default_registry(), o), config.disabled);
    return config.text_only ? r.text_only() : r;
}

void validate_run_config(const RunConfig& config) {
    if (config.workers < 1) config_error("workers must be >= 1");
    if (config.timeout_ms <= 0) config_error("timeout_ms must be positive");
    for (const auto& b : config.backends) validate_spec(b);
    auto require = [&](const std::string& id, const std::string& role) {
        if (id.empty()) config_error("no " + role + " backend configured");
        if (!config.find_backend(id)) config_error(role + " references undefined backend '" + id + "'");
    };
    require(config.commander, "commander");
    require(config.classifier, "classifier");
    for (const auto& card : effective_registry(config).cards()) {
        require(card.backend_id, std::string(display_name(card.kind)) + " binding");
    }
    for (const auto& [kind, id] : config.bindings) require(id, std::string(display_name(kind)) + " binding");
}

ojson canonical_config(const RunConfig& config) {
    ojson backends = ojson::array();
    for (const auto& b : config.backends) {
        ojson script = ojson::array();
        for (const auto& r : b.script) {
            script.push_back({{"match", r.match},
                              {"regex", r.regex},
                              {"reply", r.reply},
                              {"fault", r.fault ? ojson(fault_name(*r.fault)) : ojson(nullptr)},
                              {"fault_times", r.fault_times},
                              {"delay_ms", r.delay_ms}});
        }
        backends.push_back({{"id", b.id},
                            {"kind", b.kind == BackendKind::HttpChat       ? "http_chat"
                                     : b.kind == BackendKind::LocalCommand ? "local_command"
                                                                           : "mock"},
                            {"endpoint_or_command", b.endpoint_or_command},
                            {"model", b.model_name},
                            {"api_key_env", b.api_key_ref},
                            {"temperature", b.default_decoding.temperature},
                            {"max_tokens", b.default_decoding.max_tokens},
                            {"max_attempts", b.retry.max_attempts},
                            {"base_delay_ms", b.retry.base_delay_ms},
                            {"backoff_factor", b.retry.backoff_factor},
                            {"timeout_ms", b.timeout_ms},
                            {"script", std::move(script)}});
    }
    return ojson{{"backends", std::move(backends)},
                 {"commander", config.commander},
                 {"classifier", config.classifier},
                 {"bindings", kind_map_json(config.bindings)},
                 {"descriptions", kind_map_json(config.descriptions)},
                 {"templates", kind_map_json(config.templates)},
                 {"mandatory", config.mandatory ? kind_set_json(*config.mandatory) : ojson(nullptr)},
                 {"forced_plan", config.forced_plan ? kind_set_json(*config.forced_plan) : ojson(nullptr)},
                 {"commander_sees_image", config.commander_sees_image},
                 {"classifier_sees_image", config.classifier_sees_image},
                 {"timeout_ms", config.timeout_ms},
                 {"max_attempts", config.retry.max_attempts},
                 {"base_delay_ms", config.retry.base_delay_ms},
                 {"backoff_factor", config.retry.backoff_factor},
                 {"temperature", config.decoding.temperature},
                 {"max_tokens", config.decoding.max_tokens},
                 {"disabled", kind_set_json(config.disabled)},
                 {"text_only", config.text_only}};
}

std::string config_digest(const RunConfig& config) { return sha256_hex(canonical_config(config).dump()); }

}  // namespace marshal
