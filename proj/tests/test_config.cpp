#include <doctest.h>

#include <functional>

#include "marshal/config.hpp"
#include "test_support.hpp"

using namespace marshal;
using namespace marshal::testing;
using json = nlohmann::json;

namespace {

Errc config_errc(const json& doc) {
    try {
        validate_run_config(parse_run_config(doc, "/tmp"));
    } catch (const Error& e) {
        return e.code();
    }
    return Errc::InvalidRequest;  // sentinel: no error
}

std::string config_message(const json& doc) {
    try {
        validate_run_config(parse_run_config(doc, "/tmp"));
    } catch (const Error& e) {
        return e.what();
    }
    return {};
}

}  // namespace

TEST_CASE("scripted config parses and validates") {
    const RunConfig cfg = parse_run_config(scripted_config(), "/tmp");
    CHECK_NOTHROW(validate_run_config(cfg));
    CHECK(cfg.backends.size() == 8);
    CHECK(cfg.workers == 4);
    CHECK(cfg.commander_sees_image);
    CHECK(cfg.classifier_sees_image);
    CHECK(cfg.find_backend("rhetoric") != nullptr);
    CHECK(cfg.find_backend("oracle") == nullptr);
}

TEST_CASE("backends inherit run-level settings unless overridden") {
    json doc = scripted_config();
    doc["timeout_ms"] = 1234;
    doc["decoding"] = {{"temperature", 0.2}, {"max_tokens", 64}};
    doc["retry"] = {{"max_attempts", 5}, {"base_delay_ms", 10}};
    doc["backends"][1]["timeout_ms"] = 99;
    doc["backends"][1]["decoding"] = {{"max_tokens", 32}};
    doc["backends"][1]["retry"] = {{"max_attempts", 1}};
    const RunConfig cfg = parse_run_config(doc, "/tmp");

    const BackendSpec& commander = *cfg.find_backend("commander");
    CHECK(commander.timeout_ms == 1234);
    CHECK(commander.default_decoding.temperature == doctest::Approx(0.2));
    CHECK(commander.default_decoding.max_tokens == 64);
    CHECK(commander.retry.max_attempts == 5);
    CHECK(commander.retry.base_delay_ms == 10);

    const BackendSpec& keyword = *cfg.find_backend("keyword");
    CHECK(keyword.timeout_ms == 99);
    CHECK(keyword.default_decoding.temperature == doctest::Approx(0.2));
    CHECK(keyword.default_decoding.max_tokens == 32);
    CHECK(keyword.retry.max_attempts == 1);
    CHECK(keyword.retry.base_delay_ms == 10);
}

TEST_CASE("unknown keys and bad values are config errors") {
    json doc = scripted_config();
    doc["wokers"] = 2;
    CHECK(config_errc(doc) == Errc::ConfigError);
    CHECK(config_message(doc).find("wokers") != std::string::npos);

    doc = scripted_config();
    doc["backends"][0]["endpoint_url"] = "x";
    CHECK(config_errc(doc) == Errc::ConfigError);

    doc = scripted_config();
    doc["backends"][0]["script"][0]["respond"] = "x";
    CHECK(config_errc(doc) == Errc::ConfigError);

    doc = scripted_config();
    doc["backends"][0]["kind"] = "grpc";
    CHECK(config_errc(doc) == Errc::ConfigError);

    doc = scripted_config();
    doc["disabled"] = {"Oracle"};
    CHECK(config_errc(doc) == Errc::ConfigError);

    doc = scripted_config();
    doc["workers"] = 0;
    CHECK(config_errc(doc) == Errc::ConfigError);

    doc = scripted_config();
    doc["workers"] = "four";
    CHECK(config_errc(doc) == Errc::ConfigError);

    doc = scripted_config();
    doc["backends"].push_back(doc["backends"][0]);
    CHECK(config_message(doc).find("duplicate backend id 'commander'") != std::string::npos);

    doc = scripted_config();
    doc["backends"][0]["script"][0]["fault"] = "meltdown";
    CHECK(config_errc(doc) == Errc::ConfigError);
}

TEST_CASE("undefined backend references are named") {
    json doc = scripted_config();
    doc["commander"] = "gpt-commander";
    CHECK(config_message(doc).find("'gpt-commander'") != std::string::npos);

    doc = scripted_config();
    doc["bindings"] = {{"Rhetoric", "rhetoric-v2"}};
    CHECK(config_message(doc).find("'rhetoric-v2'") != std::string::npos);

    // A kind without a backend is fine once it is disabled.
    doc = scripted_config();
    doc["backends"].erase(6);  // tex-ext
    CHECK(config_message(doc).find("'tex-ext'") != std::string::npos);
    doc["disabled"] = {"Tex-ext"};
    CHECK(config_errc(doc) == Errc::InvalidRequest);
}

TEST_CASE("script files resolve against the config directory") {
    TempDir dir;
    spit(dir / "scripts" / "kw.json", R"([{"match":"","reply":"from file"}])");
    json doc = scripted_config();
    doc["backends"][1].erase("script");
    doc["backends"][1]["script_file"] = "scripts/kw.json";
    doc["cache_dir"] = "cache";
    const RunConfig cfg = load_run_config(write_config(dir / "run.json", doc));
    CHECK(cfg.find_backend("keyword")->script.at(0).reply == "from file");
    CHECK(*cfg.cache_dir == dir / "cache");

    doc["backends"][1]["script_file"] = "scripts/missing.json";
    CHECK_THROWS_AS(load_run_config(write_config(dir / "run.json", doc)), Error);
    spit(dir / "broken.json", "{");
    CHECK_THROWS_AS(load_run_config(dir / "broken.json"), Error);
}

TEST_CASE("effective registry applies overrides, ablation and text-only") {
    json doc = scripted_config();
    doc["descriptions"] = {{"Keyword", "List the salient words."}};
    doc["templates"] = {{"Sentiment", "Polarity only. {description}"}};
    doc["mandatory"] = {"Keyword"};
    doc["disabled"] = {"Rhetoric"};
    RunConfig cfg = parse_run_config(doc, "/tmp");
    Registry reg = effective_registry(cfg);
    CHECK(reg.card(SubTaskKind::Keyword).description == "List the salient words.");
    CHECK(reg.card(SubTaskKind::Sentiment).prompt_template == "Polarity only. {description}");
    CHECK(reg.mandatory_kinds() == KindSet{SubTaskKind::Keyword});
    CHECK_FALSE(reg.contains(SubTaskKind::Rhetoric));
    CHECK(reg.size() == 5);

    cfg.text_only = true;
    reg = effective_registry(cfg);
    CHECK(reg.kinds() == KindSet{SubTaskKind::Keyword, SubTaskKind::Sentiment});
}

TEST_CASE("config digest changes iff a result-affecting field changes") {
    const json base = scripted_config();
    const std::string base_digest = config_digest(parse_run_config(base, "/tmp"));
    CHECK(base_digest.size() == 64);
    CHECK(config_digest(parse_run_config(base, "/tmp")) == base_digest);

    const std::vector<std::pair<std::string, std::function<void(json&)>>> affecting{
        {"commander", [](json& d) { d["commander"] = "classifier"; }},
        {"classifier", [](json& d) { d["classifier"] = "commander"; }},
        {"bindings", [](json& d) { d["bindings"] = {{"Keyword", "sentiment"}}; }},
        {"descriptions", [](json& d) { d["descriptions"] = {{"Keyword", "x"}}; }},
        {"templates", [](json& d) { d["templates"] = {{"Keyword", "{description}"}}; }},
        {"mandatory", [](json& d) { d["mandatory"] = json::array(); }},
        {"forced_plan", [](json& d) { d["forced_plan"] = {"Rhetoric"}; }},
        {"commander_sees_image", [](json& d) { d["commander_sees_image"] = false; }},
        {"classifier_sees_image", [](json& d) { d["classifier_sees_image"] = false; }},
        {"timeout_ms", [](json& d) { d["timeout_ms"] = 5; }},
        {"retry", [](json& d) { d["retry"]["max_attempts"] = 4; }},
        {"temperature", [](json& d) { d["decoding"] = {{"temperature", 0.7}}; }},
        {"max_tokens", [](json& d) { d["decoding"] = {{"max_tokens", 100}}; }},
        {"disabled", [](json& d) { d["disabled"] = {"Fac-exp"}; }},
        {"text_only", [](json& d) { d["text_only"] = true; }},
        {"backend model", [](json& d) { d["backends"][2]["model"] = "other"; }},
        {"backend script", [](json& d) { d["backends"][3]["script"][0]["reply"] = "litotes"; }},
        {"backend timeout", [](json& d) { d["backends"][3]["timeout_ms"] = 7; }},
    };
    for (const auto& [name, mutate] : affecting) {
        CAPTURE(name);
        json doc = base;
        mutate(doc);
        CHECK(config_digest(parse_run_config(doc, "/tmp")) != base_digest);
    }

    const std::vector<std::pair<std::string, std::function<void(json&)>>> neutral{
        {"workers", [](json& d) { d["workers"] = 16; }},
        {"cache_dir", [](json& d) { d["cache_dir"] = "/var/cache/x"; }},
        {"key order", [](json& d) {
             json reordered = json::object();
             for (auto it = d.rbegin(); it != d.rend(); ++it) reordered[it.key()] = it.value();
             d = reordered;
         }},
    };
    for (const auto& [name, mutate] : neutral) {
        CAPTURE(name);
        json doc = base;
        mutate(doc);
        CHECK(config_digest(parse_run_config(doc, "/tmp")) == base_digest);
    }
}
