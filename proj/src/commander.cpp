#include "marshal/commander.hpp"

#include <json.hpp>

#include "marshal/error.hpp"

namespace marshal {

using json = nlohmann::json;

namespace {

constexpr std::string_view kRoleAssignment =
    "You are the 'commander' of a sarcasm detection task, and your mission is to select the most appropriate "
    "'C&W' based on the input multimodal content. The C&W are text specialists and image specialists; "
    "you do not decide whether the input is sarcastic yourself.";

constexpr std::string_view kSelectionInstruction =
    "Based on the input text and image, select the most appropriate sub-models and provide a rationale.";

constexpr std::string_view kFormatInstruction =
    "Reply with a JSON object of the form {\"selected\": [<sub-model names>], \"rationale\": \"<text>\"}. "
    "Use the sub-model names exactly as listed.";

constexpr std::string_view kReminder =
    "Respond only with the structured object {\"selected\": [...], \"rationale\": \"...\"} and nothing else.";

constexpr std::string_view kImageNotViewable = "An image is attached but not viewable.";

}  // namespace

std::string_view to_string(RoutingSource source) noexcept {
    switch (source) {
        case RoutingSource::Model: return "Model";
        case RoutingSource::Fallback: return "Fallback";
        case RoutingSource::Forced: return "Forced";
    }
    return "?";
}

ModelRequest build_routing_prompt(const Sample& sample, const Registry& registry, const RouteOptions& options) {
    ModelRequest req;
    req.system_text = std::string(kRoleAssignment) + "\n\nAvailable C&W:\n" + render_capability_brief(registry) +
                      "\n" + std::string(kSelectionInstruction) + "\n" + std::string(kFormatInstruction);
    req.user_parts.emplace_back(TextPart{"Text: " + sample.text});
    if (sample.image) {
        if (options.commander_sees_image) {
            req.user_parts.emplace_back(make_image_part(*sample.image));
        } else {
            req.user_parts.emplace_back(TextPart{std::string(kImageNotViewable)});
        }
    }
    req.decoding = options.decoding;
    return req;
}

RoutingDecision parse_routing_response(std::string_view text, const Registry& registry) {
    const auto open = text.find('{');
    const auto close = text.rfind('}');
    if (open == std::string_view::npos || close == std::string_view::npos || close < open) {
        throw Error(Errc::Unparseable, "no structured routing object in commander reply");
    }
    json doc;
    try {
        doc = json::parse(text.substr(open, close - open + 1));
    } catch (const json::exception& e) {
        throw Error(Errc::Unparseable, std::string("routing object is not valid JSON: ") + e.what());
    }
    if (!doc.is_object() || !doc.contains("selected") || !doc["selected"].is_array()) {
        throw Error(Errc::Unparseable, "routing object lacks a 'selected' array");
    }

    RoutingDecision out;
    std::size_t named = 0;
    for (const auto& item : doc["selected"]) {
        if (!item.is_string()) continue;
        ++named;
        if (auto kind = parse_kind(item.get<std::string>()); kind && registry.contains(*kind)) {
            out.selected.insert(*kind);
        }
    }
    if (named > 0 && out.selected.empty()) {
        throw Error(Errc::Unparseable, "routing object names no known sub-model");
    }
    if (auto it = doc.find("rationale"); it != doc.end() && it->is_string()) {
        out.rationale = it->get<std::string>();
    }
    return out;
}

KindSet enforce_plan(KindSet proposed, const Sample& sample, const Registry& registry) {
    KindSet plan = (proposed | registry.mandatory_kinds()) & registry.kinds();
    if (!sample.has_image()) plan = plan.without(image_kinds());
    return plan;
}

RoutingPlan route(const Sample& sample, const Registry& registry, Backend& commander, const RouteOptions& options) {
    RoutingPlan plan;
    plan.sample_id = sample.id;

    if (options.forced_plan) {
        plan.selected = enforce_plan(*options.forced_plan, sample, registry);
        plan.source = RoutingSource::Forced;
        return plan;
    }

    // Image specialists are pointless for an imageless sample, so the
    // commander is only shown what it may actually pick.
    const Registry offered = sample.has_image() ? registry : registry.text_only();
    if (offered.empty()) {
        plan.selected = enforce_plan({}, sample, registry);
        plan.source = RoutingSource::Fallback;
        return plan;
    }

    ModelRequest request = build_routing_prompt(sample, offered, options);
    auto ask = [&](const ModelRequest& req) -> std::string {
        try {
            return commander.invoke(req).text;
        } catch (const BackendError& e) {
            throw BackendError(Errc::BackendExhausted,
                               "commander unreachable for sample '" + sample.id + "': " + e.what(), e.attempts(),
                               e.http_status());
        }
    };

    for (int round = 0; round < 2; ++round) {
        const std::string reply = ask(request);
        try {
            RoutingDecision decision = parse_routing_response(reply, offered);
            plan.selected = enforce_plan(decision.selected, sample, registry);
            plan.rationale = std::move(decision.rationale);
            plan.source = RoutingSource::Model;
            return plan;
        } catch (const Error& e) {
            if (e.code() != Errc::Unparseable) throw;
        }
        request.user_parts.emplace_back(TextPart{std::string(kReminder)});
    }

    plan.selected = enforce_plan({}, sample, registry);
    plan.source = RoutingSource::Fallback;
    return plan;
}

}  // namespace marshal
