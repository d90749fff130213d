#include "marshal/dispatch.hpp"

#include <future>

#include "marshal/error.hpp"

namespace marshal {

namespace {

std::string substitute(std::string text, std::string_view placeholder, std::string_view value) {
    for (auto pos = text.find(placeholder); pos != std::string::npos; pos = text.find(placeholder, pos + value.size())) {
        text.replace(pos, placeholder.size(), value);
    }
    return text;
}

}  // namespace

ModelRequest subtask_prompt(const CapabilityCard& card, const Sample& sample, const DecodingParams& decoding) {
    const std::string_view tmpl =
        card.prompt_template.empty() ? kDefaultSubtaskTemplate : std::string_view(card.prompt_template);
    ModelRequest req;
    req.system_text = substitute(std::string(tmpl), "{description}", card.description);
    req.decoding = decoding;
    if (card.role_class == RoleClass::Image) {
        if (!sample.image) {
            throw Error(Errc::MissingImage, std::string(display_name(card.kind)) + " requires an image but sample '" +
                                                sample.id + "' has none");
        }
        req.user_parts.emplace_back(TextPart{"Input: the attached image."});
        req.user_parts.emplace_back(make_image_part(*sample.image));
    } else {
        req.user_parts.emplace_back(TextPart{"Input: " + sample.text});
    }
    return req;
}

ModelRequest subtask_prompt(SubTaskKind kind, const Sample& sample) {
    return subtask_prompt(default_registry().card(kind), sample);
}

void InvocationLog::append(InvocationRecord record) {
    std::lock_guard lock(mu_);
    records_.push_back(std::move(record));
}

std::vector<InvocationRecord> InvocationLog::snapshot() const {
    std::lock_guard lock(mu_);
    return records_;
}

CallCounts& CallCounts::operator+=(const CallCounts& o) noexcept {
    for (std::size_t i = 0; i < kSubTaskCount; ++i) counts[i] += o.counts[i];
    return *this;
}

CallCounts call_stats(const std::vector<InvocationRecord>& log) {
    CallCounts out;
    for (const auto& r : log) ++out[r.kind];
    return out;
}

std::vector<Clue> execute_plan(const Sample& sample, const RoutingPlan& plan, const Registry& registry,
                               const BackendLookup& backends, InvocationLog* log) {
    const std::vector<SubTaskKind> kinds = plan.selected.to_vector();

    auto run_one = [&](SubTaskKind kind) -> Clue {
        Clue clue;
        clue.kind = kind;
        bool cache_hit = false;
        try {
            const CapabilityCard& card = registry.card(kind);
            Backend& backend = backends(kind);
            clue.backend_id = backend.spec().id;
            ModelResponse resp = backend.invoke(subtask_prompt(card, sample, backend.spec().default_decoding));
            clue.latency_ms = resp.latency_ms;
            cache_hit = resp.from_cache;
            if (resp.text.empty()) {
                clue.status = ClueStatus::Failed;
                clue.failure_reason = "empty completion";
            } else {
                clue.content = std::move(resp.text);
            }
        } catch (const Error& e) {
            clue.status = ClueStatus::Failed;
            clue.failure_reason = std::string(to_string(e.code())) + ": " + e.what();
        } catch (const std::exception& e) {
            clue.status = ClueStatus::Failed;
            clue.failure_reason = e.what();
            if (clue.failure_reason.empty()) clue.failure_reason = "sub-task failed";
        }
        if (log) {
            log->append({sample.id, kind, clue.backend_id, clue.status, clue.latency_ms, cache_hit});
        }
        return clue;
    };

    // Results are collected in submission order, which is canonical.
    std::vector<std::future<Clue>> pending;
    pending.reserve(kinds.size());
    for (auto kind : kinds) {
        pending.push_back(std::async(std::launch::async, run_one, kind));
    }
    std::vector<Clue> clues;
    clues.reserve(kinds.size());
    for (auto& f : pending) clues.push_back(f.get());
    return clues;
}

}  // namespace marshal
