#include "marshal/types.hpp"

#include <algorithm>
#include <bit>
#include <cctype>
#include <fstream>
#include <sstream>

#include "marshal/error.hpp"

namespace marshal {

std::string_view display_name(SubTaskKind kind) noexcept {
    switch (kind) {
        case SubTaskKind::Keyword: return "Keyword";
        case SubTaskKind::Sentiment: return "Sentiment";
        case SubTaskKind::Rhetoric: return "Rhetoric";
        case SubTaskKind::ImgSum: return "Img-sum";
        case SubTaskKind::FacExp: return "Fac-exp";
        case SubTaskKind::TexExt: return "Tex-ext";
    }
    return "?";
}

namespace {

std::string fold(std::string_view name) {
    std::string out;
    out.reserve(name.size());
    for (char c : name) {
        if (c == '-' || c == '_' || c == ' ') continue;
        out.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
    }
    return out;
}

}  // namespace

std::optional<SubTaskKind> parse_kind(std::string_view name) noexcept {
    const std::string folded = fold(name);
    for (auto k : kCanonicalKinds) {
        if (fold(display_name(k)) == folded) return k;
    }
    return std::nullopt;
}

std::size_t KindSet::size() const noexcept {
    return static_cast<std::size_t>(std::popcount(bits_));
}

std::vector<SubTaskKind> KindSet::to_vector() const {
    std::vector<SubTaskKind> out;
    for (auto k : kCanonicalKinds) {
        if (contains(k)) out.push_back(k);
    }
    return out;
}

KindSet image_kinds() noexcept {
    return KindSet{SubTaskKind::ImgSum, SubTaskKind::FacExp, SubTaskKind::TexExt};
}

std::string_view label_token(Label label) noexcept {
    return label == Label::Sarcastic ? "Sarcastic" : "Non-sarcastic";
}

std::optional<Label> parse_label_token(std::string_view token) noexcept {
    std::string lower;
    for (char c : token) lower.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
    if (lower == "sarcastic") return Label::Sarcastic;
    if (lower == "non-sarcastic") return Label::NonSarcastic;
    return std::nullopt;
}

std::size_t ModelRequest::image_count() const noexcept {
    return static_cast<std::size_t>(std::count_if(user_parts.begin(), user_parts.end(), [](const RequestPart& p) {
        return std::holds_alternative<ImagePart>(p);
    }));
}

const ImagePart* ModelRequest::image() const noexcept {
    for (const auto& p : user_parts) {
        if (const auto* img = std::get_if<ImagePart>(&p)) return img;
    }
    return nullptr;
}

std::string ModelRequest::flattened_text() const {
    std::string out = system_text;
    for (const auto& p : user_parts) {
        if (const auto* t = std::get_if<TextPart>(&p)) {
            out += '\n';
            out += t->text;
        }
    }
    return out;
}

void validate_request(const ModelRequest& request) {
    if (request.user_parts.empty()) {
        throw Error(Errc::InvalidRequest, "model request has no user parts");
    }
    if (request.image_count() > 1) {
        throw Error(Errc::InvalidRequest, "model request carries more than one image");
    }
    if (request.decoding.temperature < 0.0 || request.decoding.max_tokens <= 0) {
        throw Error(Errc::InvalidRequest, "invalid decoding parameters");
    }
}

std::string media_type_for(const std::filesystem::path& path) {
    std::string ext = path.extension().string();
    std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
    if (ext == ".jpg" || ext == ".jpeg") return "image/jpeg";
    if (ext == ".png") return "image/png";
    if (ext == ".gif") return "image/gif";
    if (ext == ".webp") return "image/webp";
    if (ext == ".bmp") return "image/bmp";
    return "application/octet-stream";
}

ImagePart make_image_part(const ImageRef& image) {
    ImagePart part;
    part.media_type = media_type_for(image.resolved.empty() ? std::filesystem::path(image.ref) : image.resolved);
    part.path = image.resolved.empty() ? image.ref : image.resolved.string();
    std::ifstream in(part.path, std::ios::binary);
    if (in) {
        std::ostringstream buf;
        buf << in.rdbuf();
        part.bytes = std::move(buf).str();
    }
    return part;
}

}  // namespace marshal
