#include "marshal/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "marshal/error.hpp"

namespace marshal {

ConfusionCounts score(const std::vector<Prediction>& predictions, const std::map<std::string, Label>& golds) {
    std::vector<std::string> missing;
    ConfusionCounts c;
    for (const auto& p : predictions) {
        const auto it = golds.find(p.sample_id);
        if (it == golds.end()) {
            missing.push_back(p.sample_id);
            continue;
        }
        const bool pred_pos = p.label == Label::Sarcastic;
        const bool gold_pos = it->second == Label::Sarcastic;
        if (pred_pos && gold_pos) ++c.tp;
        else if (pred_pos) ++c.fp;
        else if (gold_pos) ++c.fn;
        else ++c.tn;
    }
    if (!missing.empty()) {
        std::string ids;
        for (const auto& id : missing) ids += (ids.empty() ? "" : ", ") + id;
        throw Error(Errc::MissingGold, "no gold label for: " + ids);
    }
    return c;
}

double harmonic_f1(double precision, double recall) noexcept {
    const double denom = precision + recall;
    return denom == 0.0 ? 0.0 : 2.0 * precision * recall / denom;
}

MetricsReport metrics(const ConfusionCounts& c) {
    auto pct = [](std::uint64_t num, std::uint64_t den) {
        return den == 0 ? 0.0 : 100.0 * static_cast<double>(num) / static_cast<double>(den);
    };
    MetricsReport m;
    m.precision = pct(c.tp, c.tp + c.fp);
    m.recall = pct(c.tp, c.tp + c.fn);
    m.acc = pct(c.tp + c.tn, c.total());
    m.f1 = harmonic_f1(m.precision, m.recall);
    return m;
}

double round1(double value) noexcept {
    // The nudge keeps values such as 72.45, stored as 72.4499..., rounding up.
    const double scaled = value * 10.0;
    return std::round(scaled + std::copysign(1e-9 * std::max(1.0, std::fabs(scaled)), scaled)) / 10.0;
}

std::string format_percent(double value) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.1f", round1(value));
    return buf;
}

std::vector<Prediction> parse_predictions(std::string_view content) {
    std::vector<Prediction> out;
    std::size_t line_no = 0;
    std::size_t pos = 0;
    while (pos <= content.size()) {
        const auto nl = content.find('\n', pos);
        const std::string_view line =
            content.substr(pos, nl == std::string_view::npos ? std::string_view::npos : nl - pos);
        pos = nl == std::string_view::npos ? content.size() + 1 : nl + 1;
        ++line_no;
        if (std::all_of(line.begin(), line.end(), [](unsigned char c) { return std::isspace(c); })) continue;
        out.push_back(parse_prediction_record(line, line_no));
    }
    return out;
}

std::vector<Prediction> import_predictions(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(Errc::MalformedRecord, "cannot open predictions file " + path.string());
    std::ostringstream buf;
    buf << in.rdbuf();
    try {
        return parse_predictions(buf.str());
    } catch (const Error& e) {
        throw Error(e.code(), path.string() + ": " + e.what());
    }
}

std::string serialize_predictions(const std::vector<Prediction>& predictions) {
    std::string out;
    for (const auto& p : predictions) {
        out += prediction_record(p).dump();
        out += '\n';
    }
    return out;
}

std::map<std::string, Label> to_label_map(const std::vector<Prediction>& predictions) {
    std::map<std::string, Label> out;
    for (const auto& p : predictions) out[p.sample_id] = p.label;
    return out;
}

namespace {

// Display width of a UTF-8 string, counting code points.
std::size_t width(const std::string& s) {
    return static_cast<std::size_t>(
        std::count_if(s.begin(), s.end(), [](char c) { return (static_cast<unsigned char>(c) & 0xC0) != 0x80; }));
}

std::string render_table(const std::vector<std::string>& header, const std::vector<std::vector<std::string>>& rows,
                         const std::vector<bool>& right_align) {
    std::vector<std::size_t> widths(header.size());
    for (std::size_t i = 0; i < header.size(); ++i) widths[i] = std::max<std::size_t>(3, width(header[i]));
    for (const auto& r : rows) {
        for (std::size_t i = 0; i < r.size(); ++i) widths[i] = std::max(widths[i], width(r[i]));
    }
    auto cell = [&](const std::string& s, std::size_t i) {
        const std::string pad(widths[i] - width(s), ' ');
        return right_align[i] ? pad + s : s + pad;
    };
    std::string out = "|";
    for (std::size_t i = 0; i < header.size(); ++i) out += " " + cell(header[i], i) + " |";
    out += "\n|";
    for (std::size_t i = 0; i < header.size(); ++i) {
        out += right_align[i] ? " " + std::string(widths[i] - 1, '-') + ": |" : " " + std::string(widths[i], '-') + " |";
    }
    out += '\n';
    for (const auto& r : rows) {
        out += "|";
        for (std::size_t i = 0; i < r.size(); ++i) out += " " + cell(r[i], i) + " |";
        out += '\n';
    }
    return out;
}

}  // namespace

std::string render_results_table(const std::vector<NamedMetrics>& rows) {
    std::map<std::string, double> best;
    for (const auto& r : rows) {
        const double f = round1(r.metrics.f1);
        auto [it, inserted] = best.emplace(r.group, f);
        if (!inserted) it->second = std::max(it->second, f);
    }
    std::vector<std::vector<std::string>> body;
    for (const auto& r : rows) {
        std::string f1 = format_percent(r.metrics.f1);
        if (round1(r.metrics.f1) == best[r.group]) f1 = "**" + f1 + "**";
        body.push_back({r.group, r.name, f1, format_percent(r.metrics.acc), format_percent(r.metrics.precision),
                        format_percent(r.metrics.recall)});
    }
    return render_table({"Group", "Method", "f1.", "acc.", "pre.", "rec."}, body,
                        {false, false, true, true, true, true});
}

std::string render_case_table(const std::vector<NamedPredictions>& runs, const std::map<std::string, Label>& golds,
                              const std::vector<std::string>& ids) {
    std::vector<std::string> header{"Example", "Id", "Golden"};
    for (const auto& r : runs) header.push_back(r.name);

    std::vector<std::vector<std::string>> body;
    for (std::size_t i = 0; i < ids.size(); ++i) {
        const auto& id = ids[i];
        const auto gold = golds.find(id);
        if (gold == golds.end()) throw Error(Errc::MissingPrediction, "no gold label for '" + id + "'");
        std::vector<std::string> row{std::to_string(i + 1), id, std::string(label_token(gold->second))};
        for (const auto& r : runs) {
            const auto p = r.labels.find(id);
            if (p == r.labels.end()) {
                throw Error(Errc::MissingPrediction, "run '" + r.name + "' has no prediction for '" + id + "'");
            }
            row.emplace_back(p->second == gold->second ? "✓" : "✗");
        }
        body.push_back(std::move(row));
    }
    std::vector<bool> align(header.size(), false);
    return render_table(header, body, align);
}

}  // namespace marshal
