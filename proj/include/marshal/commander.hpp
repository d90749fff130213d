#pragma once

#include <optional>
#include <string>

#include "marshal/backends.hpp"
#include "marshal/registry.hpp"
#include "marshal/types.hpp"

namespace marshal {

enum class RoutingSource { Model, Fallback, Forced };

std::string_view to_string(RoutingSource source) noexcept;

struct RoutingPlan {
    std::string sample_id;
    KindSet selected;
    std::string rationale;
    RoutingSource source = RoutingSource::Model;
    bool operator==(const RoutingPlan&) const = default;
};

struct RoutingDecision {
    KindSet selected;
    std::string rationale;
};

struct RouteOptions {
    bool commander_sees_image = true;
    /// When set the commander is not consulted.
    std::optional<KindSet> forced_plan;
    DecodingParams decoding;
};

/// Role-assignment prompt listing `registry`'s capabilities. Throws
/// Error(EmptyRegistry).
ModelRequest build_routing_prompt(const Sample& sample, const Registry& registry, const RouteOptions& options = {});

/// Extracts `{"selected": [...], "rationale": "..."}` from a reply, tolerating
/// prose and code fences around it. Names outside the registry are dropped.
/// Throws Error(Unparseable) when no object is found or every name is unknown.
RoutingDecision parse_routing_response(std::string_view text, const Registry& registry);

/// Enforces the plan invariants: adds the registry's mandatory kinds, keeps
/// only registry kinds, and drops Image-class kinds when the sample has no image.
KindSet enforce_plan(KindSet proposed, const Sample& sample, const Registry& registry);

/// Routes one sample. A reply that cannot be parsed is re-asked once with a
/// format reminder, then falls back to the mandatory set.
/// Throws BackendError(BackendExhausted) when the commander cannot be reached.
RoutingPlan route(const Sample& sample, const Registry& registry, Backend& commander, const RouteOptions& options = {});

}  // namespace marshal
