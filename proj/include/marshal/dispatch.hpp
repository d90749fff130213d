#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <mutex>
#include <string>
#include <vector>

#include "marshal/backends.hpp"
#include "marshal/commander.hpp"
#include "marshal/registry.hpp"

namespace marshal {

enum class ClueStatus { Ok, Failed };

struct Clue {
    SubTaskKind kind{};
    std::string content;
    ClueStatus status = ClueStatus::Ok;
    std::string failure_reason;
    std::int64_t latency_ms = 0;
    std::string backend_id;

    [[nodiscard]] bool ok() const noexcept { return status == ClueStatus::Ok; }
    bool operator==(const Clue&) const = default;
};

/// Default sub-task template. `{description}` is replaced by the card description.
inline constexpr std::string_view kDefaultSubtaskTemplate =
    "You are a specialist. Task: {description} Respond with only the result. "
    "Do not judge whether the input is sarcastic.";

/// Prompt for one specialist. Text-class prompts embed the sample text,
/// Image-class prompts attach the image. Throws Error(MissingImage) for an
/// Image-class kind on an imageless sample.
ModelRequest subtask_prompt(const CapabilityCard& card, const Sample& sample, const DecodingParams& decoding = {});
ModelRequest subtask_prompt(SubTaskKind kind, const Sample& sample);

/// One executed sub-task invocation.
struct InvocationRecord {
    std::string sample_id;
    SubTaskKind kind{};
    std::string backend_id;
    ClueStatus status = ClueStatus::Ok;
    std::int64_t latency_ms = 0;
    bool cache_hit = false;
};

/// Append-only, thread-safe sink.
class InvocationLog {
public:
    void append(InvocationRecord record);
    [[nodiscard]] std::vector<InvocationRecord> snapshot() const;

private:
    mutable std::mutex mu_;
    std::vector<InvocationRecord> records_;
};

struct CallCounts {
    std::array<std::uint64_t, kSubTaskCount> counts{};

    [[nodiscard]] std::uint64_t operator[](SubTaskKind k) const noexcept { return counts[index_of(k)]; }
    std::uint64_t& operator[](SubTaskKind k) noexcept { return counts[index_of(k)]; }
    CallCounts& operator+=(const CallCounts& o) noexcept;
    friend CallCounts operator+(CallCounts a, const CallCounts& b) noexcept { return a += b; }
    bool operator==(const CallCounts&) const = default;
};

CallCounts call_stats(const std::vector<InvocationRecord>& log);

/// Resolves the backend bound to a sub-task kind.
using BackendLookup = std::function<Backend&(SubTaskKind)>;

/// Runs every selected sub-task, concurrently, and returns one clue per
/// selected kind in canonical order. A failing sub-task becomes a Failed clue.
/// Requests use the bound backend's default decoding parameters.
std::vector<Clue> execute_plan(const Sample& sample, const RoutingPlan& plan, const Registry& registry,
                               const BackendLookup& backends, InvocationLog* log = nullptr);

}  // namespace marshal
