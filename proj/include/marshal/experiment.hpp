#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include <json.hpp>

#include "marshal/backends.hpp"
#include "marshal/commander.hpp"
#include "marshal/config.hpp"
#include "marshal/datasets.hpp"
#include "marshal/dispatch.hpp"
#include "marshal/evaluation.hpp"
#include "marshal/evidence.hpp"

namespace marshal {

/// Every configured backend, stacked as cache -> concurrency limit -> counter -> retry -> transport.
class BackendSet {
public:
    BackendSet(const RunConfig& config, const BackendContext& ctx = BackendContext::system());

    /// Throws Error(ConfigError) for an unknown id.
    Backend& get(const std::string& id) const;
    /// Invocations that missed the cache and reached a transport.
    [[nodiscard]] std::int64_t underlying_calls() const noexcept;

private:
    std::map<std::string, BackendPtr> stacks_;
    std::vector<std::shared_ptr<CountingBackend>> counters_;
};

struct AblationConfig {
    KindSet disabled;

    /// "Ours" when nothing is disabled, else "w/o <display name>[, ...]".
    [[nodiscard]] std::string label() const;
    /// File-system friendly label: "ours", "wo-rhetoric", "wo-img-sum", ...
    [[nodiscard]] std::string slug() const;
};

struct ExperimentReport {
    std::string config_digest;
    std::string dataset_name;
    std::string split;
    std::string ablation_label;
    std::size_t n_samples = 0;
    std::size_t n_scored = 0;
    std::string predictions_file = "predictions.jsonl";
    std::string predictions_sha256;
    ConfusionCounts confusion;
    MetricsReport metrics;
    CallCounts call_counts;
    std::size_t routing_model = 0;
    std::size_t routing_fallback = 0;
    std::size_t routing_forced = 0;
    std::size_t parse_clean = 0;
    std::size_t parse_heuristic = 0;
    std::size_t parse_defaulted = 0;
    std::vector<std::string> routing_failed;
    std::vector<std::string> classification_failed;
    /// Not serialized into report.json; see run stats.
    std::int64_t wall_clock_ms = 0;

    [[nodiscard]] bool has_backend_failures() const noexcept {
        return !routing_failed.empty() || !classification_failed.empty();
    }
};

nlohmann::ordered_json report_json(const ExperimentReport& report);
/// report.md body: summary table plus call counts.
std::string report_markdown(const ExperimentReport& report);

struct ExperimentResult {
    ExperimentReport report;
    std::vector<Prediction> predictions;      // manifest order
    std::vector<RoutingPlan> plans;           // manifest order, routed samples only
    std::vector<InvocationRecord> calls;      // manifest order, then canonical kind order
};

/// Routes, dispatches and classifies every sample, then scores. Per-sample
/// backend failures are recorded in the report; configuration errors throw.
ExperimentResult run_experiment(const DatasetManifest& manifest, const RunConfig& config, const BackendSet& backends);

/// Builds a fresh BackendSet from `config`.
ExperimentResult run_experiment(const DatasetManifest& manifest, const RunConfig& config);

struct AblationEntry {
    AblationConfig ablation;
    ExperimentResult result;
};

/// "Ours" followed by one "w/o X" entry per kind (Rhetoric, Keyword, Sentiment,
/// Img-sum, Tex-ext, Fac-exp). Each entry replaces the base config's disabled set.
std::vector<AblationEntry> run_ablation_suite(const DatasetManifest& manifest, const RunConfig& base,
                                              const BackendSet& backends);

/// Kind order of the "w/o X" rows.
inline constexpr std::array<SubTaskKind, kSubTaskCount> kAblationOrder{
    SubTaskKind::Rhetoric, SubTaskKind::Keyword, SubTaskKind::Sentiment,
    SubTaskKind::ImgSum,   SubTaskKind::TexExt,  SubTaskKind::FacExp,
};

std::string calls_jsonl(const std::vector<InvocationRecord>& calls);
/// Throws Error(MalformedRecord).
std::vector<InvocationRecord> parse_calls_jsonl(std::string_view content);

}  // namespace marshal
