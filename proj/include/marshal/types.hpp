#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace marshal {

// Declaration order is the canonical order used by every deterministic
// rendering: Keyword, Sentiment, Rhetoric, ImgSum, FacExp, TexExt.
enum class SubTaskKind : std::uint8_t { Keyword, Sentiment, Rhetoric, ImgSum, FacExp, TexExt };

inline constexpr std::size_t kSubTaskCount = 6;

inline constexpr std::array<SubTaskKind, kSubTaskCount> kCanonicalKinds{
    SubTaskKind::Keyword, SubTaskKind::Sentiment, SubTaskKind::Rhetoric,
    SubTaskKind::ImgSum,  SubTaskKind::FacExp,    SubTaskKind::TexExt,
};

enum class RoleClass : std::uint8_t { Text, Image };

[[nodiscard]] constexpr RoleClass role_class_of(SubTaskKind kind) noexcept {
    switch (kind) {
        case SubTaskKind::Keyword:
        case SubTaskKind::Sentiment:
        case SubTaskKind::Rhetoric: return RoleClass::Text;
        default: return RoleClass::Image;
    }
}

[[nodiscard]] constexpr std::size_t index_of(SubTaskKind kind) noexcept {
    return static_cast<std::size_t>(kind);
}

/// Display name: "Keyword", "Sentiment", "Rhetoric", "Img-sum", "Fac-exp", "Tex-ext".
std::string_view display_name(SubTaskKind kind) noexcept;

/// Case-insensitive; ignores '-', '_' and spaces so "FacExp", "fac-exp" and
/// "Fac exp" all resolve.
std::optional<SubTaskKind> parse_kind(std::string_view name) noexcept;

/// Small ordered set over the six kinds. Iteration is canonical.
class KindSet {
public:
    KindSet() = default;
    KindSet(std::initializer_list<SubTaskKind> kinds) {
        for (auto k : kinds) insert(k);
    }

    static KindSet all() {
        KindSet s;
        s.bits_ = 0x3F;
        return s;
    }

    void insert(SubTaskKind k) noexcept { bits_ |= bit(k); }
    void erase(SubTaskKind k) noexcept { bits_ &= static_cast<std::uint8_t>(~bit(k)); }
    [[nodiscard]] bool contains(SubTaskKind k) const noexcept { return (bits_ & bit(k)) != 0; }
    [[nodiscard]] bool empty() const noexcept { return bits_ == 0; }
    [[nodiscard]] std::size_t size() const noexcept;

    [[nodiscard]] KindSet operator|(KindSet o) const noexcept { return from_bits(bits_ | o.bits_); }
    [[nodiscard]] KindSet operator&(KindSet o) const noexcept { return from_bits(bits_ & o.bits_); }
    [[nodiscard]] KindSet without(KindSet o) const noexcept {
        return from_bits(bits_ & static_cast<std::uint8_t>(~o.bits_));
    }
    bool operator==(const KindSet&) const = default;

    [[nodiscard]] std::vector<SubTaskKind> to_vector() const;
    [[nodiscard]] std::uint8_t bits() const noexcept { return bits_; }
    static KindSet from_bits(unsigned b) noexcept {
        KindSet s;
        s.bits_ = static_cast<std::uint8_t>(b & 0x3F);
        return s;
    }

private:
    static std::uint8_t bit(SubTaskKind k) noexcept {
        return static_cast<std::uint8_t>(1u << index_of(k));
    }
    std::uint8_t bits_ = 0;
};

/// Kinds whose role class is Image.
KindSet image_kinds() noexcept;

enum class Label : std::uint8_t { NonSarcastic, Sarcastic };

/// "Sarcastic" / "Non-sarcastic".
std::string_view label_token(Label label) noexcept;
std::optional<Label> parse_label_token(std::string_view token) noexcept;

struct ImageRef {
    std::string ref;                  // as written in the manifest
    std::filesystem::path resolved;   // ref resolved against the image root
    bool operator==(const ImageRef& o) const { return ref == o.ref; }
};

struct Sample {
    std::string id;
    std::string text;
    std::optional<ImageRef> image;
    std::optional<Label> gold;

    [[nodiscard]] bool has_image() const noexcept { return image.has_value(); }
    bool operator==(const Sample&) const = default;
};

// ---- model request / response ---------------------------------------------

struct DecodingParams {
    double temperature = 0.0;
    int max_tokens = 512;
    bool operator==(const DecodingParams&) const = default;
};

struct TextPart {
    std::string text;
    bool operator==(const TextPart&) const = default;
};

struct ImagePart {
    std::string media_type;
    std::string bytes;   // raw image bytes; may be empty when only `path` is known
    std::string path;
    bool operator==(const ImagePart&) const = default;
};

using RequestPart = std::variant<TextPart, ImagePart>;

struct ModelRequest {
    std::string system_text;
    std::vector<RequestPart> user_parts;
    DecodingParams decoding;

    [[nodiscard]] std::size_t image_count() const noexcept;
    [[nodiscard]] const ImagePart* image() const noexcept;
    /// System text followed by every text part, newline separated.
    [[nodiscard]] std::string flattened_text() const;
    bool operator==(const ModelRequest&) const = default;
};

/// Throws Error(InvalidRequest) when the request has no parts or more than one image.
void validate_request(const ModelRequest& request);

/// Builds an ImagePart from an image reference, loading bytes when the file exists.
ImagePart make_image_part(const ImageRef& image);

std::string media_type_for(const std::filesystem::path& path);

struct ModelResponse {
    std::string text;
    std::int64_t latency_ms = 0;
    std::string backend_id;
    bool from_cache = false;
};

}  // namespace marshal
