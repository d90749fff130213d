#include "marshal/cli.hpp"

#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "marshal/config.hpp"
#include "marshal/datasets.hpp"
#include "marshal/error.hpp"
#include "marshal/evaluation.hpp"
#include "marshal/experiment.hpp"

#ifndef MARSHAL_DATA_DIR
#define MARSHAL_DATA_DIR "data"
#endif

namespace marshal::cli {

namespace fs = std::filesystem;
using ojson = nlohmann::ordered_json;

namespace {

class ExitWith : public std::runtime_error {
public:
    ExitWith(ExitCode code, const std::string& msg) : std::runtime_error(msg), code_(code) {}
    [[nodiscard]] ExitCode code() const noexcept { return code_; }

private:
    ExitCode code_;
};

ExitCode exit_code_for(Errc code) {
    switch (code) {
        case Errc::ConfigError:
        case Errc::CacheIoError:
        case Errc::EmptyRegistry: return ExitCode::Config;
        case Errc::MalformedRecord:
        case Errc::DuplicateId:
        case Errc::InvalidLabel:
        case Errc::MissingImageFile:
        case Errc::ExpectationMismatch:
        case Errc::MissingGold:
        case Errc::MissingPrediction: return ExitCode::Dataset;
        case Errc::BackendExhausted:
        case Errc::MissingCredential:
        case Errc::Timeout:
        case Errc::RateLimited:
        case Errc::ServerError:
        case Errc::ClientError:
        case Errc::ScriptMiss: return ExitCode::BackendExhausted;
        default: return ExitCode::Internal;
    }
}

void write_file(const fs::path& path, const std::string& content) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out || !(out << content) || !out.flush()) {
        throw ExitWith(ExitCode::Internal, "cannot write " + path.string());
    }
}

std::string read_file(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(Errc::MalformedRecord, "cannot open " + path.string());
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

struct RunArgs {
    std::string config;
    std::string dataset;
    std::string out;
    std::string split = "test";
    std::string image_root;
    std::string cache_dir;
    std::size_t limit = 0;
    int workers = 0;
    bool text_only = false;
    bool lazy_images = false;
};

void add_run_options(CLI::App* cmd, RunArgs& a) {
    cmd->add_option("--config", a.config, "Run configuration file")->required();
    cmd->add_option("--dataset", a.dataset, "Line-delimited sample manifest")->required();
    cmd->add_option("--out", a.out, "Output directory")->required();
    cmd->add_option("--split", a.split, "Split name recorded in the report (train, validation, test)");
    cmd->add_option("--image-root", a.image_root, "Directory image paths resolve against");
    cmd->add_option("--cache-dir", a.cache_dir, "Response cache directory (overrides the config)");
    cmd->add_option("--limit", a.limit, "Use only the first N samples");
    cmd->add_option("--workers", a.workers, "Concurrent model calls (overrides the config)");
    cmd->add_flag("--text-only", a.text_only, "Strip images and drop image specialists");
    cmd->add_flag("--lazy-images", a.lazy_images, "Do not check image files at load time");
}

std::pair<RunConfig, DatasetManifest> prepare(const RunArgs& a) {
    RunConfig cfg = load_run_config(a.config);
    if (a.workers > 0) cfg.workers = a.workers;
    if (!a.cache_dir.empty()) cfg.cache_dir = fs::path(a.cache_dir);
    if (a.text_only) cfg.text_only = true;
    validate_run_config(cfg);

    LoadOptions opts;
    opts.lazy_images = a.lazy_images;
    if (!a.image_root.empty()) opts.image_root = fs::path(a.image_root);
    const auto split = parse_split(a.split);
    if (!split) throw ExitWith(ExitCode::Usage, "unknown split '" + a.split + "'");
    opts.split = *split;
    DatasetManifest manifest = load_samples(a.dataset, opts);
    if (a.limit > 0) manifest = truncate(std::move(manifest), a.limit);
    return {std::move(cfg), std::move(manifest)};
}

void write_result(const fs::path& dir, const ExperimentResult& r) {
    write_file(dir / "report.json", report_json(r.report).dump(2) + "\n");
    write_file(dir / "report.md", report_markdown(r.report));
    write_file(dir / "predictions.jsonl", serialize_predictions(r.predictions));
    write_file(dir / "calls.jsonl", calls_jsonl(r.calls));
}

std::size_t cache_hits(const std::vector<InvocationRecord>& calls) {
    return static_cast<std::size_t>(
        std::count_if(calls.begin(), calls.end(), [](const InvocationRecord& c) { return c.cache_hit; }));
}

void write_run_stats(const fs::path& dir, std::int64_t wall_ms, const BackendSet& backends, std::size_t hits,
                     int workers) {
    write_file(dir / "run_stats.json", ojson{{"wall_clock_ms", wall_ms},
                                             {"underlying_invocations", backends.underlying_calls()},
                                             {"subtask_cache_hits", hits},
                                             {"workers", workers}}
                                           .dump(2) +
                                           "\n");
}

ExitCode cmd_run(const RunArgs& a, std::ostream& out) {
    auto [cfg, manifest] = prepare(a);
    BackendSet backends(cfg);
    const ExperimentResult r = run_experiment(manifest, cfg, backends);
    const fs::path dir(a.out);
    write_result(dir, r);
    write_run_stats(dir, r.report.wall_clock_ms, backends, cache_hits(r.calls), cfg.workers);
    out << report_markdown(r.report);
    out << "underlying invocations: " << backends.underlying_calls() << "\n";
    return r.report.has_backend_failures() ? ExitCode::BackendExhausted : ExitCode::Success;
}

ExitCode cmd_ablate(const RunArgs& a, std::ostream& out) {
    auto [cfg, manifest] = prepare(a);
    BackendSet backends(cfg);
    const auto started = std::chrono::steady_clock::now();
    const auto entries = run_ablation_suite(manifest, cfg, backends);
    const fs::path dir(a.out);

    std::vector<NamedMetrics> rows;
    ojson summary = ojson::array();
    bool failures = false;
    std::size_t hits = 0;
    for (const auto& e : entries) {
        write_result(dir / e.ablation.slug(), e.result);
        rows.push_back({manifest.name, e.ablation.label(), e.result.report.metrics});
        summary.push_back({{"label", e.ablation.label()},
                           {"report", e.ablation.slug() + "/report.json"},
                           {"f1", e.result.report.metrics.f1},
                           {"acc", e.result.report.metrics.acc},
                           {"precision", e.result.report.metrics.precision},
                           {"recall", e.result.report.metrics.recall}});
        failures = failures || e.result.report.has_backend_failures();
        hits += cache_hits(e.result.calls);
    }
    const std::string table = render_results_table(rows);
    write_file(dir / "ablation.md", "# Ablation: " + manifest.name + "\n\n" + table);
    write_file(dir / "ablation.json", summary.dump(2) + "\n");
    const auto wall =
        std::chrono::duration_cast<std::chrono::milliseconds>(std::chrono::steady_clock::now() - started).count();
    write_run_stats(dir, wall, backends, hits, cfg.workers);
    out << table;
    return failures ? ExitCode::BackendExhausted : ExitCode::Success;
}

std::map<std::string, Label> golds_of(const DatasetManifest& m) {
    std::map<std::string, Label> golds;
    for (const auto& s : m.samples) {
        if (s.gold) golds[s.id] = *s.gold;
    }
    return golds;
}

std::pair<std::string, std::string> split_named(const std::string& spec) {
    const auto eq = spec.find('=');
    if (eq == std::string::npos) return {fs::path(spec).stem().string(), spec};
    return {spec.substr(0, eq), spec.substr(eq + 1)};
}

}  // namespace

ExitCode run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"marshal: commander-routed multimodal sarcasm detection harness"};
    app.require_subcommand(1);

    RunArgs run_args;
    auto* run_cmd = app.add_subcommand("run", "Route, dispatch and classify a dataset, then score it");
    add_run_options(run_cmd, run_args);

    RunArgs ablate_args;
    auto* ablate_cmd = app.add_subcommand("ablate", "Run the full configuration plus one run per removed sub-task");
    add_run_options(ablate_cmd, ablate_args);

    std::string eval_dataset, eval_out, eval_group;
    std::vector<std::string> eval_preds;
    auto* eval_cmd = app.add_subcommand("eval", "Score prediction files against a labeled manifest");
    eval_cmd->add_option("--dataset", eval_dataset, "Labeled manifest")->required();
    eval_cmd->add_option("--predictions", eval_preds, "NAME=PATH prediction files")->required();
    eval_cmd->add_option("--group", eval_group, "Group label for the table (default: dataset name)");
    eval_cmd->add_option("--out", eval_out, "Write eval.md and eval.json here");

    std::vector<std::string> stats_calls;
    bool stats_json = false;
    auto* stats_cmd = app.add_subcommand("stats", "Per-module call counts from calls.jsonl files");
    stats_cmd->add_option("--calls", stats_calls, "calls.jsonl files (counts are summed)")->required();
    stats_cmd->add_flag("--json", stats_json, "Emit JSON");

    std::string case_dataset, case_out;
    std::vector<std::string> case_preds, case_ids;
    std::size_t case_first = 0;
    auto* case_cmd = app.add_subcommand("case-table", "Per-sample correct/incorrect marks across runs");
    case_cmd->add_option("--dataset", case_dataset, "Labeled manifest")->required();
    case_cmd->add_option("--predictions", case_preds, "NAME=PATH prediction files")->required();
    case_cmd->add_option("--ids", case_ids, "Sample ids (comma separated)")->delimiter(',');
    case_cmd->add_option("--first", case_first, "Use the first N labeled samples when --ids is absent");
    case_cmd->add_option("--out", case_out, "Write the table to this file");

    std::string cache_dir;
    auto* cache_cmd = app.add_subcommand("cache", "Inspect or clear a response cache");
    cache_cmd->require_subcommand(1);
    auto* cache_stats = cache_cmd->add_subcommand("stats", "Count cache entries");
    cache_stats->add_option("--dir", cache_dir, "Cache directory")->required();
    auto* cache_clear = cache_cmd->add_subcommand("clear", "Delete every cache entry");
    cache_clear->add_option("--dir", cache_dir, "Cache directory")->required();

    std::string v_train, v_val, v_test, v_expect;
    auto* validate_cmd = app.add_subcommand("validate", "Check split statistics against an expectation table");
    validate_cmd->add_option("--train", v_train, "Train manifest")->required();
    validate_cmd->add_option("--validation", v_val, "Validation manifest")->required();
    validate_cmd->add_option("--test", v_test, "Test manifest")->required();
    validate_cmd->add_option("--expect", v_expect, "mmsd, mmsd2, or a path to an expectation table")->required();

    std::vector<std::string> argv_store{"marshal"};
    argv_store.insert(argv_store.end(), args.begin(), args.end());
    std::vector<const char*> argv;
    for (const auto& s : argv_store) argv.push_back(s.c_str());

    try {
        app.parse(static_cast<int>(argv.size()), argv.data());
    } catch (const CLI::CallForHelp& e) {
        out << app.help();
        return ExitCode::Success;
    } catch (const CLI::CallForAllHelp& e) {
        out << app.help("", CLI::AppFormatMode::All);
        return ExitCode::Success;
    } catch (const CLI::ParseError& e) {
        err << "usage error: " << e.what() << "\n";
        return ExitCode::Usage;
    }

    try {
        if (*run_cmd) return cmd_run(run_args, out);
        if (*ablate_cmd) return cmd_ablate(ablate_args, out);

        if (*eval_cmd) {
            const DatasetManifest m = load_samples(eval_dataset, LoadOptions{std::nullopt, true, Split::Test});
            const auto golds = golds_of(m);
            std::vector<NamedMetrics> rows;
            ojson summary = ojson::array();
            for (const auto& spec : eval_preds) {
                const auto [name, path] = split_named(spec);
                const auto preds = import_predictions(path);
                const ConfusionCounts c = score(preds, golds);
                const MetricsReport mr = metrics(c);
                rows.push_back({eval_group.empty() ? m.name : eval_group, name, mr});
                summary.push_back({{"name", name},
                                   {"confusion", {{"tp", c.tp}, {"fp", c.fp}, {"fn", c.fn}, {"tn", c.tn}}},
                                   {"f1", mr.f1},
                                   {"acc", mr.acc},
                                   {"precision", mr.precision},
                                   {"recall", mr.recall}});
            }
            const std::string table = render_results_table(rows);
            out << table;
            if (!eval_out.empty()) {
                write_file(fs::path(eval_out) / "eval.md", table);
                write_file(fs::path(eval_out) / "eval.json", summary.dump(2) + "\n");
            }
            return ExitCode::Success;
        }

        if (*stats_cmd) {
            CallCounts total;
            for (const auto& path : stats_calls) total += call_stats(parse_calls_jsonl(read_file(path)));
            if (stats_json) {
                ojson doc = ojson::object();
                for (auto k : kCanonicalKinds) doc[std::string(display_name(k))] = total[k];
                out << doc.dump(2) << "\n";
            } else {
                out << "| Module | Calls |\n|---|---:|\n";
                for (auto k : kCanonicalKinds) out << "| " << display_name(k) << " | " << total[k] << " |\n";
            }
            return ExitCode::Success;
        }

        if (*case_cmd) {
            const DatasetManifest m = load_samples(case_dataset, LoadOptions{std::nullopt, true, Split::Test});
            const auto golds = golds_of(m);
            std::vector<NamedPredictions> runs;
            for (const auto& spec : case_preds) {
                const auto [name, path] = split_named(spec);
                runs.push_back({name, to_label_map(import_predictions(path))});
            }
            std::vector<std::string> ids = case_ids;
            if (ids.empty()) {
                for (const auto& s : m.samples) {
                    if (case_first > 0 && ids.size() >= case_first) break;
                    if (s.gold) ids.push_back(s.id);
                }
            }
            const std::string table = render_case_table(runs, golds, ids);
            if (!case_out.empty()) write_file(case_out, table);
            out << table;
            return ExitCode::Success;
        }

        if (*cache_cmd) {
            const CacheStore store(cache_dir);
            if (*cache_stats) {
                out << "entries: " << store.entry_count() << "\n";
            } else {
                out << "removed: " << store.clear() << "\n";
            }
            return ExitCode::Success;
        }

        if (*validate_cmd) {
            LoadOptions opts;
            opts.lazy_images = true;
            const auto train = load_samples(v_train, opts);
            const auto val = load_samples(v_val, opts);
            const auto test = load_samples(v_test, opts);
            fs::path table = v_expect;
            if (v_expect == "mmsd") table = fs::path(MARSHAL_DATA_DIR) / "expectations" / "mmsd.json";
            if (v_expect == "mmsd2") table = fs::path(MARSHAL_DATA_DIR) / "expectations" / "mmsd2.json";
            const SplitExpectation expectation = load_expectation(table);
            const SplitStats st = split_stats(train, val, test);
            check_expectation(st, expectation);
            out << expectation.name << " expectation satisfied: " << st.n_train << "/" << st.n_validation << "/"
                << st.n_test << ", " << st.n_sarcastic << " sarcastic / " << st.n_non_sarcastic << " non-sarcastic\n";
            return ExitCode::Success;
        }
    } catch (const ExitWith& e) {
        err << "error: " << e.what() << "\n";
        return e.code();
    } catch (const Error& e) {
        err << "error [" << to_string(e.code()) << "]: " << e.what() << "\n";
        return exit_code_for(e.code());
    } catch (const std::exception& e) {
        err << "internal error: " << e.what() << "\n";
        return ExitCode::Internal;
    }
    return ExitCode::Usage;
}

}  // namespace marshal::cli
