#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "marshal/types.hpp"

namespace marshal {

/// One C&W capability as presented to the commander.
struct CapabilityCard {
    SubTaskKind kind{};
    RoleClass role_class{};
    std::string description;
    bool mandatory = false;
    std::string backend_id;
    /// Sub-task prompt template; `{description}` is substituted. Empty means
    /// the built-in default.
    std::string prompt_template;

    bool operator==(const CapabilityCard&) const = default;
};

/// Immutable set of capability cards keyed by kind.
class Registry {
public:
    Registry() = default;

    /// Throws Error(DuplicateKind) on a repeated kind and Error(ConfigError)
    /// when a card's role class disagrees with its kind or its description
    /// is empty.
    explicit Registry(std::vector<CapabilityCard> cards);

    [[nodiscard]] bool contains(SubTaskKind kind) const noexcept { return kinds_.contains(kind); }
    /// Throws std::out_of_range when absent.
    [[nodiscard]] const CapabilityCard& card(SubTaskKind kind) const;
    [[nodiscard]] const CapabilityCard* find(SubTaskKind kind) const noexcept;

    /// Cards in canonical kind order.
    [[nodiscard]] const std::vector<CapabilityCard>& cards() const noexcept { return cards_; }
    [[nodiscard]] KindSet kinds() const noexcept { return kinds_; }
    [[nodiscard]] KindSet mandatory_kinds() const noexcept;
    [[nodiscard]] std::size_t size() const noexcept { return cards_.size(); }
    [[nodiscard]] bool empty() const noexcept { return cards_.empty(); }

    /// Cards whose role class is Text.
    [[nodiscard]] Registry text_only() const;

    bool operator==(const Registry&) const = default;

private:
    std::vector<CapabilityCard> cards_;
    KindSet kinds_;
};

/// The six default capabilities; Keyword, Sentiment and Img-sum are mandatory.
/// Backend ids default to the lower-cased display name ("keyword", "img-sum", ...).
Registry default_registry();

/// One "<display name>: <description>" line per card, canonical order.
/// Throws Error(EmptyRegistry) for an empty registry.
std::string render_capability_brief(const Registry& registry);

/// Cards whose kind is not in `disabled`; mandatory flags are untouched.
Registry apply_ablation(const Registry& registry, KindSet disabled);

struct RegistryOverrides {
    std::map<SubTaskKind, std::string> descriptions;
    std::map<SubTaskKind, std::string> backends;
    std::map<SubTaskKind, std::string> templates;
    /// Replaces every card's mandatory flag when set.
    std::optional<KindSet> mandatory;
};

Registry apply_overrides(const Registry& registry, const RegistryOverrides& overrides);

}  // namespace marshal
