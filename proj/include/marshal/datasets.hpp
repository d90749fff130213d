#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "marshal/types.hpp"

namespace marshal {

enum class Split { Train, Validation, Test };

std::string_view to_string(Split split) noexcept;
std::optional<Split> parse_split(std::string_view text) noexcept;

struct DatasetManifest {
    std::string name;
    Split split = Split::Test;
    std::vector<Sample> samples;
    std::optional<std::filesystem::path> image_root;
};

struct LoadOptions {
    /// Directory image references resolve against; defaults to the manifest's directory.
    std::optional<std::filesystem::path> image_root;
    /// Skip the existence check on image files.
    bool lazy_images = false;
    Split split = Split::Test;
};

/// Reads a line-delimited manifest of {"id", "text", "image", "label"} records.
/// Throws Error with MalformedRecord, DuplicateId, InvalidLabel or
/// MissingImageFile; messages carry the 1-based line number.
DatasetManifest load_samples(const std::filesystem::path& path, const LoadOptions& options = {});

/// Parses manifest text directly; `source` only labels diagnostics.
DatasetManifest parse_samples(std::string_view content, const std::string& source, const LoadOptions& options = {});

/// Writes `manifest` in the format load_samples reads.
std::string serialize_samples(const DatasetManifest& manifest);

struct SplitStats {
    std::uint64_t n_train = 0;
    std::uint64_t n_validation = 0;
    std::uint64_t n_test = 0;
    std::uint64_t n_sarcastic = 0;
    std::uint64_t n_non_sarcastic = 0;
    bool operator==(const SplitStats&) const = default;
};

/// Counts over the three splits. Class totals are whole-dataset figures.
SplitStats split_stats(const DatasetManifest& train, const DatasetManifest& validation, const DatasetManifest& test);

struct SplitExpectation {
    std::string name;
    SplitStats stats;
};

/// Throws Error(ExpectationMismatch) listing every differing field with both values.
void check_expectation(const SplitStats& actual, const SplitExpectation& expected);

/// Reads an expectation table: {"name", "train", "validation", "test", "sarcastic", "non_sarcastic"}.
SplitExpectation load_expectation(const std::filesystem::path& path);

/// Every sample's image removed; everything else unchanged.
DatasetManifest strip_images(DatasetManifest manifest);

/// First `n` samples in manifest order.
DatasetManifest truncate(DatasetManifest manifest, std::size_t n);

}  // namespace marshal
