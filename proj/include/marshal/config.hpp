#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "marshal/backends.hpp"
#include "marshal/registry.hpp"
#include "marshal/types.hpp"

namespace marshal {

struct RunConfig {
    std::vector<BackendSpec> backends;
    std::string commander;
    std::string classifier;
    /// Per-kind backend ids; kinds not listed use the registry default.
    std::map<SubTaskKind, std::string> bindings;
    std::map<SubTaskKind, std::string> descriptions;
    std::map<SubTaskKind, std::string> templates;
    std::optional<KindSet> mandatory;
    std::optional<KindSet> forced_plan;
    bool commander_sees_image = true;
    bool classifier_sees_image = true;
    int workers = 4;
    std::int64_t timeout_ms = 60'000;
    RetryPolicy retry;
    DecodingParams decoding;
    std::optional<std::filesystem::path> cache_dir;
    KindSet disabled;
    bool text_only = false;

    [[nodiscard]] const BackendSpec* find_backend(const std::string& id) const noexcept;
};

/// Parses the structured config document. Relative paths (cache_dir,
/// script_file) resolve against `base_dir`. Throws Error(ConfigError).
RunConfig parse_run_config(const nlohmann::json& doc, const std::filesystem::path& base_dir);
RunConfig load_run_config(const std::filesystem::path& path);

/// Registry after description/binding/template/mandatory overrides, the
/// ablation set and text-only filtering.
Registry effective_registry(const RunConfig& config);

/// Throws Error(ConfigError) naming the first undefined backend id or invalid field.
void validate_run_config(const RunConfig& config);

/// Canonical form of every result-affecting field. Execution-only settings
/// (worker count, cache directory) are left out so reports stay comparable
/// across them.
nlohmann::ordered_json canonical_config(const RunConfig& config);
std::string config_digest(const RunConfig& config);

}  // namespace marshal
