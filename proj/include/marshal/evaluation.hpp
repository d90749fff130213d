#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "marshal/evidence.hpp"
#include "marshal/types.hpp"

namespace marshal {

/// Sarcastic is the positive class.
struct ConfusionCounts {
    std::uint64_t tp = 0;
    std::uint64_t fp = 0;
    std::uint64_t fn = 0;
    std::uint64_t tn = 0;

    [[nodiscard]] std::uint64_t total() const noexcept { return tp + fp + fn + tn; }
    bool operator==(const ConfusionCounts&) const = default;
};

/// Percentages in [0, 100], full precision. Degenerate denominators give 0.
struct MetricsReport {
    double f1 = 0.0;
    double acc = 0.0;
    double precision = 0.0;
    double recall = 0.0;
    bool operator==(const MetricsReport&) const = default;
};

/// Throws Error(MissingGold) listing every prediction id without a gold label.
ConfusionCounts score(const std::vector<Prediction>& predictions, const std::map<std::string, Label>& golds);

MetricsReport metrics(const ConfusionCounts& counts);

/// 2PR/(P+R), 0 when P+R is 0. Inputs and output share units.
double harmonic_f1(double precision, double recall) noexcept;

/// Round half away from zero to one decimal.
double round1(double value) noexcept;
/// round1 rendered with exactly one decimal.
std::string format_percent(double value);

/// Throws Error(MalformedRecord) with the offending line number.
std::vector<Prediction> import_predictions(const std::filesystem::path& path);
std::vector<Prediction> parse_predictions(std::string_view content);
std::string serialize_predictions(const std::vector<Prediction>& predictions);

struct NamedMetrics {
    std::string group;
    std::string name;
    MetricsReport metrics;
};

/// Aligned markdown table with f1./acc./pre./rec. columns at one decimal. The
/// best f1 in each group is shown in bold.
std::string render_results_table(const std::vector<NamedMetrics>& rows);

struct NamedPredictions {
    std::string name;
    std::map<std::string, Label> labels;
};

/// One row per id with the gold label and a ✓/✗ per run. Throws
/// Error(MissingPrediction) when a run or the gold map lacks an id.
std::string render_case_table(const std::vector<NamedPredictions>& runs, const std::map<std::string, Label>& golds,
                              const std::vector<std::string>& ids);

std::map<std::string, Label> to_label_map(const std::vector<Prediction>& predictions);

}  // namespace marshal
