#include "marshal/datasets.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>
#include <unordered_set>

#include <json.hpp>

#include "marshal/error.hpp"

namespace marshal {

namespace fs = std::filesystem;
using json = nlohmann::json;

std::string_view to_string(Split split) noexcept {
    switch (split) {
        case Split::Train: return "train";
        case Split::Validation: return "validation";
        case Split::Test: return "test";
    }
    return "?";
}

std::optional<Split> parse_split(std::string_view text) noexcept {
    if (text == "train") return Split::Train;
    if (text == "validation" || text == "val" || text == "valid") return Split::Validation;
    if (text == "test") return Split::Test;
    return std::nullopt;
}

namespace {

bool blank(std::string_view s) {
    return std::all_of(s.begin(), s.end(), [](unsigned char c) { return std::isspace(c); });
}

}  // namespace

DatasetManifest parse_samples(std::string_view content, const std::string& source, const LoadOptions& options) {
    DatasetManifest manifest;
    manifest.name = fs::path(source).stem().string();
    manifest.split = options.split;
    manifest.image_root = options.image_root ? options.image_root : std::optional<fs::path>(fs::path(source).parent_path());

    std::unordered_set<std::string> ids;
    std::size_t line_no = 0;
    std::size_t pos = 0;
    while (pos <= content.size()) {
        const auto nl = content.find('\n', pos);
        std::string_view line = content.substr(pos, nl == std::string_view::npos ? std::string_view::npos : nl - pos);
        pos = nl == std::string_view::npos ? content.size() + 1 : nl + 1;
        ++line_no;
        if (blank(line)) continue;

        const std::string where = source + ":" + std::to_string(line_no) + ": ";
        json doc;
        try {
            doc = json::parse(line);
        } catch (const json::exception& e) {
            throw Error(Errc::MalformedRecord, where + "invalid JSON: " + e.what());
        }
        if (!doc.is_object()) throw Error(Errc::MalformedRecord, where + "record is not an object");

        Sample s;
        const auto id = doc.find("id");
        if (id == doc.end() || !id->is_string() || id->get<std::string>().empty()) {
            throw Error(Errc::MalformedRecord, where + "missing or non-string 'id'");
        }
        s.id = id->get<std::string>();

        const auto text = doc.find("text");
        if (text == doc.end() || !text->is_string()) {
            throw Error(Errc::MalformedRecord, where + "missing or non-string 'text'");
        }
        s.text = text->get<std::string>();
        if (blank(s.text)) throw Error(Errc::MalformedRecord, where + "empty 'text'");

        if (const auto img = doc.find("image"); img != doc.end() && !img->is_null()) {
            if (!img->is_string() || img->get<std::string>().empty()) {
                throw Error(Errc::MalformedRecord, where + "'image' must be a path or null");
            }
            ImageRef ref;
            ref.ref = img->get<std::string>();
            const fs::path p(ref.ref);
            ref.resolved = p.is_absolute() || !manifest.image_root ? p : *manifest.image_root / p;
            if (!options.lazy_images && !fs::is_regular_file(ref.resolved)) {
                throw Error(Errc::MissingImageFile, where + "image file not found: " + ref.resolved.string());
            }
            s.image = std::move(ref);
        }

        if (const auto label = doc.find("label"); label != doc.end() && !label->is_null()) {
            if (!label->is_number_integer() || (label->get<long long>() != 0 && label->get<long long>() != 1)) {
                throw Error(Errc::InvalidLabel, where + "label must be 0, 1 or null, got " + label->dump());
            }
            s.gold = label->get<long long>() == 1 ? Label::Sarcastic : Label::NonSarcastic;
        }

        if (!ids.insert(s.id).second) throw Error(Errc::DuplicateId, where + "duplicate id '" + s.id + "'");
        manifest.samples.push_back(std::move(s));
    }
    return manifest;
}

DatasetManifest load_samples(const fs::path& path, const LoadOptions& options) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(Errc::MalformedRecord, "cannot open manifest " + path.string());
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_samples(buf.str(), path.string(), options);
}

std::string serialize_samples(const DatasetManifest& manifest) {
    std::string out;
    for (const auto& s : manifest.samples) {
        nlohmann::ordered_json rec;
        rec["id"] = s.id;
        rec["text"] = s.text;
        rec["image"] = s.image ? json(s.image->ref) : json(nullptr);
        rec["label"] = s.gold ? json(*s.gold == Label::Sarcastic ? 1 : 0) : json(nullptr);
        out += rec.dump();
        out += '\n';
    }
    return out;
}

SplitStats split_stats(const DatasetManifest& train, const DatasetManifest& validation, const DatasetManifest& test) {
    SplitStats st;
    st.n_train = train.samples.size();
    st.n_validation = validation.samples.size();
    st.n_test = test.samples.size();
    for (const auto* m : {&train, &validation, &test}) {
        for (const auto& s : m->samples) {
            if (!s.gold) continue;
            ++(*s.gold == Label::Sarcastic ? st.n_sarcastic : st.n_non_sarcastic);
        }
    }
    return st;
}

void check_expectation(const SplitStats& actual, const SplitExpectation& expected) {
    std::string diag;
    auto cmp = [&](const char* field, std::uint64_t got, std::uint64_t want) {
        if (got == want) return;
        if (!diag.empty()) diag += "; ";
        diag += std::string(field) + ": expected " + std::to_string(want) + ", got " + std::to_string(got);
    };
    cmp("n_train", actual.n_train, expected.stats.n_train);
    cmp("n_validation", actual.n_validation, expected.stats.n_validation);
    cmp("n_test", actual.n_test, expected.stats.n_test);
    cmp("n_sarcastic", actual.n_sarcastic, expected.stats.n_sarcastic);
    cmp("n_non_sarcastic", actual.n_non_sarcastic, expected.stats.n_non_sarcastic);
    if (!diag.empty()) {
        throw Error(Errc::ExpectationMismatch, expected.name + " expectation failed: " + diag);
    }
}

SplitExpectation load_expectation(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw Error(Errc::ConfigError, "cannot open expectation table " + path.string());
    try {
        const json doc = json::parse(in);
        SplitExpectation e;
        e.name = doc.at("name").get<std::string>();
        e.stats.n_train = doc.at("train").get<std::uint64_t>();
        e.stats.n_validation = doc.at("validation").get<std::uint64_t>();
        e.stats.n_test = doc.at("test").get<std::uint64_t>();
        e.stats.n_sarcastic = doc.at("sarcastic").get<std::uint64_t>();
        e.stats.n_non_sarcastic = doc.at("non_sarcastic").get<std::uint64_t>();
        return e;
    } catch (const json::exception& ex) {
        throw Error(Errc::ConfigError, "malformed expectation table " + path.string() + ": " + ex.what());
    }
}

DatasetManifest strip_images(DatasetManifest manifest) {
    for (auto& s : manifest.samples) s.image.reset();
    return manifest;
}

DatasetManifest truncate(DatasetManifest manifest, std::size_t n) {
    if (manifest.samples.size() > n) manifest.samples.resize(n);
    return manifest;
}

}  // namespace marshal
