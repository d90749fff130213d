#include "marshal/registry.hpp"

#include <algorithm>
#include <cctype>
#include <stdexcept>

#include "marshal/error.hpp"

namespace marshal {

Registry::Registry(std::vector<CapabilityCard> cards) : cards_(std::move(cards)) {
    for (const auto& c : cards_) {
        if (kinds_.contains(c.kind)) {
            throw Error(Errc::DuplicateKind, "duplicate capability card: " + std::string(display_name(c.kind)));
        }
        if (c.role_class != role_class_of(c.kind)) {
            throw Error(Errc::ConfigError, "role class mismatch for " + std::string(display_name(c.kind)));
        }
        if (c.description.empty()) {
            throw Error(Errc::ConfigError, "empty description for " + std::string(display_name(c.kind)));
        }
        kinds_.insert(c.kind);
    }
    std::sort(cards_.begin(), cards_.end(),
              [](const CapabilityCard& a, const CapabilityCard& b) { return index_of(a.kind) < index_of(b.kind); });
}

const CapabilityCard* Registry::find(SubTaskKind kind) const noexcept {
    for (const auto& c : cards_) {
        if (c.kind == kind) return &c;
    }
    return nullptr;
}

const CapabilityCard& Registry::card(SubTaskKind kind) const {
    if (const auto* c = find(kind)) return *c;
    throw std::out_of_range("registry has no card for " + std::string(display_name(kind)));
}

KindSet Registry::mandatory_kinds() const noexcept {
    KindSet out;
    for (const auto& c : cards_) {
        if (c.mandatory) out.insert(c.kind);
    }
    return out;
}

Registry Registry::text_only() const {
    std::vector<CapabilityCard> kept;
    std::copy_if(cards_.begin(), cards_.end(), std::back_inserter(kept),
                 [](const CapabilityCard& c) { return c.role_class == RoleClass::Text; });
    return Registry(std::move(kept));
}

Registry default_registry() {
    auto make = [](SubTaskKind kind, std::string description, bool mandatory) {
        std::string backend(display_name(kind));
        std::transform(backend.begin(), backend.end(), backend.begin(),
                       [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
        return CapabilityCard{kind, role_class_of(kind), std::move(description), mandatory, std::move(backend), {}};
    };
    return Registry({
        make(SubTaskKind::Keyword, "Extract keywords from the text.", true),
        make(SubTaskKind::Sentiment, "Analyze the sentiment expressed in the sentence.", true),
        make(SubTaskKind::Rhetoric, "Identify the rhetorical devices used in the text.", false),
        make(SubTaskKind::FacExp, "Recognize the facial expressions of individuals in the image.", false),
        make(SubTaskKind::ImgSum, "Describe the content of the image.", true),
        make(SubTaskKind::TexExt, "Identify the subtitles in the image.", false),
    });
}

std::string render_capability_brief(const Registry& registry) {
    if (registry.empty()) {
        throw Error(Errc::EmptyRegistry, "capability brief requested for an empty registry");
    }
    std::string out;
    for (const auto& c : registry.cards()) {
        out += display_name(c.kind);
        out += ": ";
        out += c.description;
        out += '\n';
    }
    return out;
}

Registry apply_ablation(const Registry& registry, KindSet disabled) {
    std::vector<CapabilityCard> kept;
    for (const auto& c : registry.cards()) {
        if (!disabled.contains(c.kind)) kept.push_back(c);
    }
    return Registry(std::move(kept));
}

Registry apply_overrides(const Registry& registry, const RegistryOverrides& overrides) {
    std::vector<CapabilityCard> cards = registry.cards();
    for (auto& c : cards) {
        if (auto it = overrides.descriptions.find(c.kind); it != overrides.descriptions.end()) c.description = it->second;
        if (auto it = overrides.backends.find(c.kind); it != overrides.backends.end()) c.backend_id = it->second;
        if (auto it = overrides.templates.find(c.kind); it != overrides.templates.end()) c.prompt_template = it->second;
        if (overrides.mandatory) c.mandatory = overrides.mandatory->contains(c.kind);
    }
    return Registry(std::move(cards));
}

}  // namespace marshal
