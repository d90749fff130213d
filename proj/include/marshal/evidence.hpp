#pragma once

#include <string>
#include <vector>

#include <json.hpp>

#include "marshal/backends.hpp"
#include "marshal/dispatch.hpp"
#include "marshal/types.hpp"

namespace marshal {

struct EvidenceChain {
    Sample sample;
    std::vector<Clue> clues;  // canonical kind order, at most one per kind
};

enum class ParseStatus { Clean, Heuristic, DefaultedNonSarcastic };

std::string_view to_string(ParseStatus status) noexcept;
std::optional<ParseStatus> parse_status_from(std::string_view text) noexcept;

struct Prediction {
    std::string sample_id;
    Label label = Label::NonSarcastic;
    std::string raw_response;
    ParseStatus parse_status = ParseStatus::Clean;
    /// SHA-256 of raw_response. Imported predictions carry only this.
    std::string response_digest;
    bool operator==(const Prediction&) const = default;
};

/// Throws Error(DuplicateKind) when two clues share a kind.
EvidenceChain assemble_chain(Sample sample, std::vector<Clue> clues);

/// Section heading used for a kind's clue in the final prompt, e.g. "Keywords:".
std::string_view section_label(SubTaskKind kind) noexcept;

struct ClassifyOptions {
    bool classifier_sees_image = true;
    DecodingParams decoding;
};

/// Final classification prompt: the text, the image when present, one section
/// per Ok clue in canonical order and the answer-format instruction.
ModelRequest render_final_prompt(const EvidenceChain& chain, const ClassifyOptions& options = {});

struct ParsedLabel {
    Label label;
    ParseStatus status;  // Clean or Heuristic
    bool operator==(const ParsedLabel&) const = default;
};

/// Negation-aware verdict extraction; the last verdict-bearing mention wins.
/// Throws Error(Unparseable) when the text carries no signal either way.
ParsedLabel parse_label(std::string_view text);

/// Renders, invokes and parses. Unparseable replies become NonSarcastic with
/// DefaultedNonSarcastic status. Throws BackendError(BackendExhausted).
Prediction classify(const EvidenceChain& chain, Backend& classifier, const ClassifyOptions& options = {});

// Line-delimited prediction records: sample_id, label, parse_status, response_sha256.
nlohmann::ordered_json prediction_record(const Prediction& prediction);
/// Throws Error(MalformedRecord) naming `line_number`.
Prediction parse_prediction_record(std::string_view line, std::size_t line_number);

}  // namespace marshal
