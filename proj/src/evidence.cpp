#include "marshal/evidence.hpp"

#include <algorithm>
#include <array>
#include <cctype>

#include "marshal/digest.hpp"
#include "marshal/error.hpp"

namespace marshal {

using json = nlohmann::json;

std::string_view to_string(ParseStatus status) noexcept {
    switch (status) {
        case ParseStatus::Clean: return "Clean";
        case ParseStatus::Heuristic: return "Heuristic";
        case ParseStatus::DefaultedNonSarcastic: return "DefaultedNonSarcastic";
    }
    return "?";
}

std::optional<ParseStatus> parse_status_from(std::string_view text) noexcept {
    for (auto s : {ParseStatus::Clean, ParseStatus::Heuristic, ParseStatus::DefaultedNonSarcastic}) {
        if (to_string(s) == text) return s;
    }
    return std::nullopt;
}

EvidenceChain assemble_chain(Sample sample, std::vector<Clue> clues) {
    KindSet seen;
    for (const auto& c : clues) {
        if (seen.contains(c.kind)) {
            throw Error(Errc::DuplicateKind, "two clues of kind " + std::string(display_name(c.kind)) + " for sample '" +
                                                 sample.id + "'");
        }
        seen.insert(c.kind);
    }
    std::stable_sort(clues.begin(), clues.end(),
                     [](const Clue& a, const Clue& b) { return index_of(a.kind) < index_of(b.kind); });
    return EvidenceChain{std::move(sample), std::move(clues)};
}

std::string_view section_label(SubTaskKind kind) noexcept {
    switch (kind) {
        case SubTaskKind::Keyword: return "Keywords:";
        case SubTaskKind::Sentiment: return "Sentiment:";
        case SubTaskKind::Rhetoric: return "Rhetorical devices:";
        case SubTaskKind::ImgSum: return "Image description:";
        case SubTaskKind::FacExp: return "Facial expressions:";
        case SubTaskKind::TexExt: return "Embedded text:";
    }
    return "?";
}

ModelRequest render_final_prompt(const EvidenceChain& chain, const ClassifyOptions& options) {
    ModelRequest req;
    req.system_text =
        "You are an expert in multimodal sarcasm detection. Specialists have examined the input and reported "
        "the clues below. Use the text, the image and the clues to decide whether the text is sarcastic.";

    std::string body = "Text: " + chain.sample.text + "\n";
    bool header = false;
    for (const auto& clue : chain.clues) {
        if (!clue.ok()) continue;
        if (!header) {
            body += "\nClues:\n";
            header = true;
        }
        body += section_label(clue.kind);
        body += ' ';
        body += clue.content;
        body += '\n';
    }
    body += "\nAnswer with exactly \"Sarcastic\" or \"Non-sarcastic\", followed by brief reasoning.";
    req.user_parts.emplace_back(TextPart{std::move(body)});
    if (chain.sample.image && options.classifier_sees_image) {
        req.user_parts.emplace_back(make_image_part(*chain.sample.image));
    }
    req.decoding = options.decoding;
    return req;
}

// ---- verdict parsing -----------------------------------------------------------

namespace {

struct Token {
    std::string text;
    bool boundary = false;  // clause punctuation
};

std::vector<Token> tokenize(std::string_view input) {
    std::string lower;
    lower.reserve(input.size());
    for (std::size_t i = 0; i < input.size(); ++i) {
        // U+2019 RIGHT SINGLE QUOTATION MARK -> '
        if (i + 2 < input.size() && static_cast<unsigned char>(input[i]) == 0xE2 &&
            static_cast<unsigned char>(input[i + 1]) == 0x80 && static_cast<unsigned char>(input[i + 2]) == 0x99) {
            lower.push_back('\'');
            i += 2;
            continue;
        }
        lower.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(input[i]))));
    }

    std::vector<Token> out;
    std::string word;
    auto flush = [&] {
        while (!word.empty() && (word.back() == '-' || word.back() == '\'')) word.pop_back();
        while (!word.empty() && (word.front() == '-' || word.front() == '\'')) word.erase(word.begin());
        if (!word.empty()) out.push_back({word, false});
        word.clear();
    };
    for (char c : lower) {
        if (std::isalnum(static_cast<unsigned char>(c)) || c == '\'' || c == '-') {
            word.push_back(c);
            continue;
        }
        flush();
        if (c == '.' || c == ',' || c == ';' || c == ':' || c == '!' || c == '?' || c == '\n' || c == '(' ||
            c == ')') {
            out.push_back({std::string(1, c), true});
        }
    }
    flush();
    return out;
}

bool is_negator(std::string_view w) {
    static constexpr std::array<std::string_view, 10> kWords{"not", "no",      "non",     "never",  "nor",
                                                            "neither", "without", "hardly", "barely", "nothing"};
    if (std::find(kWords.begin(), kWords.end(), w) != kWords.end()) return true;
    return w.size() > 3 && w.ends_with("n't");
}

constexpr std::size_t kNegationWindow = 3;

bool negated(const std::vector<Token>& tokens, std::size_t at) {
    std::size_t seen = 0;
    for (std::size_t i = at; i > 0 && seen < kNegationWindow; --i) {
        const Token& t = tokens[i - 1];
        if (t.boundary) break;
        if (is_negator(t.text)) return true;
        ++seen;
    }
    return false;
}

}  // namespace

ParsedLabel parse_label(std::string_view text) {
    const std::vector<Token> tokens = tokenize(text);
    std::optional<ParsedLabel> verdict;
    for (std::size_t i = 0; i < tokens.size(); ++i) {
        const std::string& w = tokens[i].text;
        if (tokens[i].boundary) continue;
        if (w == "non-sarcastic") {
            verdict = ParsedLabel{Label::NonSarcastic, ParseStatus::Clean};
        } else if (w == "nonsarcastic" || w == "non-ironic" || w == "unsarcastic" || w == "not-sarcastic") {
            verdict = ParsedLabel{Label::NonSarcastic, ParseStatus::Heuristic};
        } else if (w == "sarcastic") {
            verdict = negated(tokens, i) ? ParsedLabel{Label::NonSarcastic, ParseStatus::Heuristic}
                                         : ParsedLabel{Label::Sarcastic, ParseStatus::Clean};
        } else if (w == "ironic" || w == "sarcasm" || w == "irony") {
            verdict = negated(tokens, i) ? ParsedLabel{Label::NonSarcastic, ParseStatus::Heuristic}
                                         : ParsedLabel{Label::Sarcastic, ParseStatus::Heuristic};
        }
    }
    if (!verdict) throw Error(Errc::Unparseable, "no sarcasm verdict in response");
    return *verdict;
}

Prediction classify(const EvidenceChain& chain, Backend& classifier, const ClassifyOptions& options) {
    ModelResponse resp;
    try {
        resp = classifier.invoke(render_final_prompt(chain, options));
    } catch (const BackendError& e) {
        throw BackendError(Errc::BackendExhausted,
                           "classifier unreachable for sample '" + chain.sample.id + "': " + e.what(), e.attempts(),
                           e.http_status());
    }
    Prediction p;
    p.sample_id = chain.sample.id;
    p.raw_response = std::move(resp.text);
    p.response_digest = sha256_hex(p.raw_response);
    try {
        const ParsedLabel parsed = parse_label(p.raw_response);
        p.label = parsed.label;
        p.parse_status = parsed.status;
    } catch (const Error& e) {
        if (e.code() != Errc::Unparseable) throw;
        p.label = Label::NonSarcastic;
        p.parse_status = ParseStatus::DefaultedNonSarcastic;
    }
    return p;
}

nlohmann::ordered_json prediction_record(const Prediction& prediction) {
    const std::string digest =
        prediction.response_digest.empty() ? sha256_hex(prediction.raw_response) : prediction.response_digest;
    return nlohmann::ordered_json{{"sample_id", prediction.sample_id},
                                  {"label", label_token(prediction.label)},
                                  {"parse_status", to_string(prediction.parse_status)},
                                  {"response_sha256", digest}};
}

Prediction parse_prediction_record(std::string_view line, std::size_t line_number) {
    auto malformed = [&](const std::string& why) {
        return Error(Errc::MalformedRecord, "line " + std::to_string(line_number) + ": " + why);
    };
    json doc;
    try {
        doc = json::parse(line);
    } catch (const json::exception& e) {
        throw malformed(std::string("invalid JSON: ") + e.what());
    }
    if (!doc.is_object()) throw malformed("record is not an object");
    Prediction p;
    const auto id = doc.find("sample_id");
    if (id == doc.end() || !id->is_string() || id->get<std::string>().empty()) throw malformed("missing sample_id");
    p.sample_id = id->get<std::string>();

    const auto label = doc.find("label");
    if (label == doc.end()) throw malformed("missing label");
    if (label->is_string()) {
        auto parsed = parse_label_token(label->get<std::string>());
        if (!parsed) throw malformed("unknown label token '" + label->get<std::string>() + "'");
        p.label = *parsed;
    } else if (label->is_number_integer() && (label->get<int>() == 0 || label->get<int>() == 1)) {
        p.label = label->get<int>() == 1 ? Label::Sarcastic : Label::NonSarcastic;
    } else {
        throw malformed("unknown label value " + label->dump());
    }

    p.parse_status = ParseStatus::Clean;
    if (auto st = doc.find("parse_status"); st != doc.end()) {
        auto parsed = st->is_string() ? parse_status_from(st->get<std::string>()) : std::nullopt;
        if (!parsed) throw malformed("unknown parse_status " + st->dump());
        p.parse_status = *parsed;
    }
    if (auto d = doc.find("response_sha256"); d != doc.end() && d->is_string()) {
        p.response_digest = d->get<std::string>();
    }
    return p;
}

}  // namespace marshal
