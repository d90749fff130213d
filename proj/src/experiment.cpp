#include "marshal/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cctype>
#include <thread>

#include "marshal/digest.hpp"
#include "marshal/error.hpp"

namespace marshal {

using ojson = nlohmann::ordered_json;

BackendSet::BackendSet(const RunConfig& config, const BackendContext& ctx) {
    auto limit = std::make_shared<ConcurrencyLimit>(config.workers);
    std::shared_ptr<const CacheStore> store;
    if (config.cache_dir) store = std::make_shared<CacheStore>(*config.cache_dir);
    for (const auto& spec : config.backends) {
        auto counter = std::make_shared<CountingBackend>(make_backend(spec, ctx));
        counters_.push_back(counter);
        BackendPtr stack = with_limit(counter, limit);
        if (store) stack = with_cache(stack, store);
        stacks_.emplace(spec.id, std::move(stack));
    }
}

Backend& BackendSet::get(const std::string& id) const {
    const auto it = stacks_.find(id);
    if (it == stacks_.end()) throw Error(Errc::ConfigError, "undefined backend '" + id + "'");
    return *it->second;
}

std::int64_t BackendSet::underlying_calls() const noexcept {
    std::int64_t n = 0;
    for (const auto& c : counters_) n += c->calls();
    return n;
}

std::string AblationConfig::label() const {
    if (disabled.empty()) return "Ours";
    std::string out = "w/o ";
    bool first = true;
    for (auto k : disabled.to_vector()) {
        if (!first) out += ", ";
        out += display_name(k);
        first = false;
    }
    return out;
}

std::string AblationConfig::slug() const {
    if (disabled.empty()) return "ours";
    std::string out = "wo";
    for (auto k : disabled.to_vector()) {
        out += '-';
        for (char c : display_name(k)) out.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
    }
    return out;
}

ojson report_json(const ExperimentReport& r) {
    ojson counts = ojson::object();
    for (auto k : kCanonicalKinds) counts[std::string(display_name(k))] = r.call_counts[k];
    return ojson{
        {"config_digest", r.config_digest},
        {"dataset", {{"name", r.dataset_name}, {"split", r.split}, {"samples", r.n_samples}, {"scored", r.n_scored}}},
        {"ablation", r.ablation_label},
        {"predictions", {{"file", r.predictions_file}, {"sha256", r.predictions_sha256}}},
        {"confusion", {{"tp", r.confusion.tp}, {"fp", r.confusion.fp}, {"fn", r.confusion.fn}, {"tn", r.confusion.tn}}},
        {"metrics",
         {{"f1", r.metrics.f1}, {"acc", r.metrics.acc}, {"precision", r.metrics.precision}, {"recall", r.metrics.recall}}},
        {"call_counts", std::move(counts)},
        {"routing", {{"model", r.routing_model}, {"fallback", r.routing_fallback}, {"forced", r.routing_forced}}},
        {"parse", {{"clean", r.parse_clean}, {"heuristic", r.parse_heuristic}, {"defaulted", r.parse_defaulted}}},
        {"failures", {{"routing", r.routing_failed}, {"classification", r.classification_failed}}},
    };
}

std::string report_markdown(const ExperimentReport& r) {
    std::string out = "# " + r.dataset_name + " (" + r.split + ") - " + r.ablation_label + "\n\n";
    out += render_results_table({{r.dataset_name, r.ablation_label, r.metrics}});
    out += "\nConfusion: tp=" + std::to_string(r.confusion.tp) + " fp=" + std::to_string(r.confusion.fp) +
           " fn=" + std::to_string(r.confusion.fn) + " tn=" + std::to_string(r.confusion.tn) + "\n\n";
    out += "| Module | Calls |\n|---|---:|\n";
    for (auto k : kCanonicalKinds) {
        out += "| " + std::string(display_name(k)) + " | " + std::to_string(r.call_counts[k]) + " |\n";
    }
    out += "\nRouting: model=" + std::to_string(r.routing_model) + " fallback=" + std::to_string(r.routing_fallback) +
           " forced=" + std::to_string(r.routing_forced) + "\n";
    out += "Parsing: clean=" + std::to_string(r.parse_clean) + " heuristic=" + std::to_string(r.parse_heuristic) +
           " defaulted=" + std::to_string(r.parse_defaulted) + "\n";
    if (r.has_backend_failures()) {
        out += "Failed samples: routing=" + std::to_string(r.routing_failed.size()) +
               " classification=" + std::to_string(r.classification_failed.size()) + "\n";
    }
    return out;
}

namespace {

enum class SampleOutcome { Classified, RoutingFailed, ClassificationFailed };

struct SampleResult {
    SampleOutcome outcome = SampleOutcome::Classified;
    RoutingPlan plan;
    Prediction prediction;
    std::vector<InvocationRecord> calls;
};

}  // namespace

ExperimentResult run_experiment(const DatasetManifest& input, const RunConfig& config, const BackendSet& backends) {
    validate_run_config(config);
    const auto started = std::chrono::steady_clock::now();

    const DatasetManifest manifest = config.text_only ? strip_images(input) : input;
    const Registry registry = effective_registry(config);
    Backend& commander = backends.get(config.commander);
    Backend& classifier = backends.get(config.classifier);

    RouteOptions route_opts;
    route_opts.commander_sees_image = config.commander_sees_image;
    route_opts.forced_plan = config.forced_plan;
    route_opts.decoding = commander.spec().default_decoding;

    ClassifyOptions classify_opts;
    classify_opts.classifier_sees_image = config.classifier_sees_image;
    classify_opts.decoding = classifier.spec().default_decoding;

    const BackendLookup lookup = [&](SubTaskKind kind) -> Backend& { return backends.get(registry.card(kind).backend_id); };

    const std::size_t n = manifest.samples.size();
    std::vector<SampleResult> results(n);
    std::atomic<std::size_t> next{0};
    std::exception_ptr fatal;
    std::mutex fatal_mu;

    auto worker = [&] {
        for (std::size_t i = next.fetch_add(1); i < n; i = next.fetch_add(1)) {
            const Sample& sample = manifest.samples[i];
            SampleResult& out = results[i];
            try {
                try {
                    out.plan = route(sample, registry, commander, route_opts);
                } catch (const BackendError& e) {
                    if (e.code() != Errc::BackendExhausted) throw;
                    out.outcome = SampleOutcome::RoutingFailed;
                    continue;
                }
                InvocationLog log;
                std::vector<Clue> clues = execute_plan(sample, out.plan, registry, lookup, &log);
                out.calls = log.snapshot();
                std::sort(out.calls.begin(), out.calls.end(), [](const InvocationRecord& a, const InvocationRecord& b) {
                    return index_of(a.kind) < index_of(b.kind);
                });
                const EvidenceChain chain = assemble_chain(sample, std::move(clues));
                try {
                    out.prediction = classify(chain, classifier, classify_opts);
                } catch (const BackendError& e) {
                    if (e.code() != Errc::BackendExhausted) throw;
                    out.outcome = SampleOutcome::ClassificationFailed;
                }
            } catch (...) {
                std::lock_guard lock(fatal_mu);
                if (!fatal) fatal = std::current_exception();
            }
        }
    };

    const std::size_t thread_count = std::min<std::size_t>(static_cast<std::size_t>(config.workers), std::max<std::size_t>(n, 1));
    std::vector<std::thread> threads;
    threads.reserve(thread_count);
    for (std::size_t t = 0; t < thread_count; ++t) threads.emplace_back(worker);
    for (auto& t : threads) t.join();
    if (fatal) std::rethrow_exception(fatal);

    ExperimentResult result;
    ExperimentReport& rep = result.report;
    rep.config_digest = config_digest(config);
    rep.dataset_name = manifest.name;
    rep.split = std::string(to_string(manifest.split));
    rep.ablation_label = AblationConfig{config.disabled}.label();
    rep.n_samples = n;

    std::map<std::string, Label> golds;
    std::vector<Prediction> scored;
    for (std::size_t i = 0; i < n; ++i) {
        const Sample& sample = manifest.samples[i];
        SampleResult& r = results[i];
        if (r.outcome == SampleOutcome::RoutingFailed) {
            rep.routing_failed.push_back(sample.id);
            continue;
        }
        result.plans.push_back(r.plan);
        switch (r.plan.source) {
            case RoutingSource::Model: ++rep.routing_model; break;
            case RoutingSource::Fallback: ++rep.routing_fallback; break;
            case RoutingSource::Forced: ++rep.routing_forced; break;
        }
        result.calls.insert(result.calls.end(), r.calls.begin(), r.calls.end());
        if (r.outcome == SampleOutcome::ClassificationFailed) {
            rep.classification_failed.push_back(sample.id);
            continue;
        }
        switch (r.prediction.parse_status) {
            case ParseStatus::Clean: ++rep.parse_clean; break;
            case ParseStatus::Heuristic: ++rep.parse_heuristic; break;
            case ParseStatus::DefaultedNonSarcastic: ++rep.parse_defaulted; break;
        }
        if (sample.gold) {
            golds[sample.id] = *sample.gold;
            scored.push_back(r.prediction);
        }
        result.predictions.push_back(std::move(r.prediction));
    }

    rep.n_scored = scored.size();
    rep.confusion = score(scored, golds);
    rep.metrics = metrics(rep.confusion);
    rep.call_counts = call_stats(result.calls);
    rep.predictions_sha256 = sha256_hex(serialize_predictions(result.predictions));
    rep.wall_clock_ms =
        std::chrono::duration_cast<std::chrono::milliseconds>(std::chrono::steady_clock::now() - started).count();
    return result;
}

ExperimentResult run_experiment(const DatasetManifest& manifest, const RunConfig& config) {
    validate_run_config(config);
    BackendSet backends(config);
    return run_experiment(manifest, config, backends);
}

std::vector<AblationEntry> run_ablation_suite(const DatasetManifest& manifest, const RunConfig& base,
                                              const BackendSet& backends) {
    std::vector<AblationConfig> configs{AblationConfig{}};
    for (auto k : kAblationOrder) configs.push_back(AblationConfig{KindSet{k}});

    std::vector<AblationEntry> out;
    out.reserve(configs.size());
    for (const auto& ab : configs) {
        RunConfig cfg = base;
        cfg.disabled = ab.disabled;
        out.push_back(AblationEntry{ab, run_experiment(manifest, cfg, backends)});
    }
    return out;
}

std::string calls_jsonl(const std::vector<InvocationRecord>& calls) {
    std::string out;
    for (const auto& c : calls) {
        out += ojson{{"sample_id", c.sample_id},
                     {"kind", display_name(c.kind)},
                     {"backend_id", c.backend_id},
                     {"status", c.status == ClueStatus::Ok ? "ok" : "failed"},
                     {"latency_ms", c.latency_ms},
                     {"cache_hit", c.cache_hit}}
                   .dump();
        out += '\n';
    }
    return out;
}

std::vector<InvocationRecord> parse_calls_jsonl(std::string_view content) {
    std::vector<InvocationRecord> out;
    std::size_t line_no = 0;
    std::size_t pos = 0;
    while (pos <= content.size()) {
        const auto nl = content.find('\n', pos);
        const std::string_view line =
            content.substr(pos, nl == std::string_view::npos ? std::string_view::npos : nl - pos);
        pos = nl == std::string_view::npos ? content.size() + 1 : nl + 1;
        ++line_no;
        if (std::all_of(line.begin(), line.end(), [](unsigned char c) { return std::isspace(c); })) continue;
        try {
            const auto doc = nlohmann::json::parse(line);
            InvocationRecord r;
            r.sample_id = doc.at("sample_id").get<std::string>();
            const auto kind = parse_kind(doc.at("kind").get<std::string>());
            if (!kind) throw Error(Errc::MalformedRecord, "unknown kind");
            r.kind = *kind;
            r.backend_id = doc.value("backend_id", std::string());
            r.status = doc.value("status", std::string("ok")) == "ok" ? ClueStatus::Ok : ClueStatus::Failed;
            r.latency_ms = doc.value("latency_ms", std::int64_t{0});
            r.cache_hit = doc.value("cache_hit", false);
            out.push_back(std::move(r));
        } catch (const std::exception& e) {
            throw Error(Errc::MalformedRecord, "calls line " + std::to_string(line_no) + ": " + e.what());
        }
    }
    return out;
}

}  // namespace marshal
