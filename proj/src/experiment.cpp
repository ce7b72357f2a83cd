#include "t2sql/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <exception>
#include <fstream>
#include <iostream>
#include <mutex>
#include <set>
#include <thread>

#include "t2sql/errors.hpp"
#include "t2sql/text.hpp"

namespace t2sql {

namespace fs = std::filesystem;

// ---- config ----

namespace {

fs::path resolve(const fs::path& base, const std::string& p) {
    if (p.empty()) return {};
    fs::path path(p);
    return path.is_absolute() || base.empty() ? path : base / path;
}

template <class T>
void take(const nlohmann::json& j, const char* key, T& out) {
    if (j.contains(key) && !j[key].is_null()) out = j[key].get<T>();
}

}  // namespace

ExperimentConfig config_from_json(const nlohmann::json& j, const fs::path& base_dir) {
    static const std::set<std::string> known = {
        "methods", "method", "format", "shots", "selection", "seeds", "backend", "model_name", "dataset", "replicas",
        "output_dir", "workers", "limit", "dump_prompts", "annotation_seed", "exec_timeout_ms", "separators",
        "cut_on_for", "join_table_skip", "sort_easy_to_hard", "stop_after"};
    if (!j.is_object()) throw ConfigError("config must be a JSON object");
    for (const auto& [k, v] : j.items())
        if (!known.count(k)) throw ConfigError("unknown config key '" + k + "'");

    ExperimentConfig c;
    try {
        if (j.contains("method")) c.methods = {j["method"].get<std::string>()};
        take(j, "methods", c.methods);
        take(j, "format", c.format);
        take(j, "shots", c.shots);
        take(j, "selection", c.selection);
        take(j, "seeds", c.seeds);
        take(j, "model_name", c.model_name);
        take(j, "workers", c.workers);
        take(j, "dump_prompts", c.dump_prompts);
        take(j, "annotation_seed", c.annotation_seed);
        take(j, "exec_timeout_ms", c.exec_timeout_ms);
        take(j, "separators", c.separators);
        take(j, "cut_on_for", c.cut_on_for);
        take(j, "join_table_skip", c.join_table_skip);
        take(j, "sort_easy_to_hard", c.sort_easy_to_hard);
        if (j.contains("limit") && !j["limit"].is_null()) c.limit = j["limit"].get<std::size_t>();
        if (j.contains("stop_after") && !j["stop_after"].is_null()) c.stop_after = j["stop_after"].get<std::size_t>();
        if (j.contains("backend")) {
            const auto& b = j["backend"];
            take(b, "kind", c.backend.kind);
            std::string t;
            take(b, "transcripts", t);
            c.backend.transcripts = resolve(base_dir, t);
            take(b, "requests_per_minute", c.backend.requests_per_minute);
        }
        if (j.contains("dataset")) {
            const auto& d = j["dataset"];
            std::string s;
            take(d, "tables", s), c.dataset.tables = resolve(base_dir, s), s.clear();
            take(d, "train", s), c.dataset.train = resolve(base_dir, s), s.clear();
            take(d, "dev", s), c.dataset.dev = resolve(base_dir, s), s.clear();
            take(d, "database_dir", s), c.dataset.database_dir = resolve(base_dir, s);
        }
        if (j.contains("replicas") && !j["replicas"].is_null())
            c.replicas = resolve(base_dir, j["replicas"].get<std::string>());
        if (j.contains("output_dir")) c.output_dir = resolve(base_dir, j["output_dir"].get<std::string>());
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("bad config value: ") + e.what());
    }
    return c;
}

ExperimentConfig load_config(const fs::path& path) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(read_file(path.string()));
    } catch (const nlohmann::json::parse_error& e) {
        throw ConfigError(path.string() + ": " + e.what());
    }
    return config_from_json(j, path.parent_path());
}

nlohmann::json to_json(const ExperimentConfig& c) {
    nlohmann::json j = {{"methods", c.methods},
                        {"format", c.format},
                        {"shots", c.shots},
                        {"selection", c.selection},
                        {"seeds", c.seeds},
                        {"backend",
                         {{"kind", c.backend.kind},
                          {"transcripts", c.backend.transcripts.string()},
                          {"requests_per_minute", c.backend.requests_per_minute}}},
                        {"model_name", c.model_name},
                        {"dataset",
                         {{"tables", c.dataset.tables.string()},
                          {"train", c.dataset.train.string()},
                          {"dev", c.dataset.dev.string()},
                          {"database_dir", c.dataset.database_dir.string()}}},
                        {"output_dir", c.output_dir.string()},
                        {"workers", c.workers},
                        {"dump_prompts", c.dump_prompts},
                        {"annotation_seed", c.annotation_seed},
                        {"exec_timeout_ms", c.exec_timeout_ms},
                        {"separators", c.separators},
                        {"cut_on_for", c.cut_on_for},
                        {"join_table_skip", c.join_table_skip},
                        {"sort_easy_to_hard", c.sort_easy_to_hard}};
    j["replicas"] = c.replicas ? nlohmann::json(c.replicas->string()) : nlohmann::json(nullptr);
    j["limit"] = c.limit ? nlohmann::json(*c.limit) : nlohmann::json(nullptr);
    return j;
}

void validate_config(const ExperimentConfig& c) {
    if (c.methods.empty()) throw ConfigError("no methods configured");
    for (const std::string& m : c.methods) {
        if (std::find(kMethods.begin(), kMethods.end(), m) == kMethods.end())
            throw ConfigError("unknown method '" + m + "'");
        if (m != "standard" && c.shots < 1)
            throw ConfigError("method '" + m + "' needs at least one demonstration (shots >= 1)");
    }
    (void)schema_format_from_string(c.format);
    (void)selection_kind_from_string(c.selection);
    if (c.shots < 0) throw ConfigError("shots must be >= 0");
    if (c.seeds.empty()) throw ConfigError("no seeds configured");
    if (c.workers < 1) throw ConfigError("workers must be >= 1");
    if (c.backend.kind != "replay" && c.backend.kind != "live")
        throw ConfigError("backend.kind must be 'replay' or 'live'");
    for (const auto& [k, v] : c.separators) (void)prompt_method_from_string(k);
    if (c.format == "create_table_select3" && c.shots > 4)
        std::cerr << "warning: create_table_select3 with " << c.shots
                  << " demonstrations may exceed the model's prompt length\n";
}

// ---- corpus ----

const DatabaseSchema& Corpus::schema(std::string_view db_id) const {
    const DatabaseSchema* s = find_schema(schemas, db_id);
    if (!s) throw IntegrityError("unknown db_id '" + std::string(db_id) + "'");
    return *s;
}

Corpus load_corpus(const DatasetPaths& paths) {
    Corpus c;
    c.schemas = load_schemas(paths.tables);
    c.database_dir = paths.database_dir;
    if (!paths.train.empty()) {
        LoadedExamples t = load_examples(paths.train, c.schemas, Split::train, {false, "train"});
        c.train = std::move(t.examples);
        c.excluded.insert(c.excluded.end(), t.excluded.begin(), t.excluded.end());
    }
    if (!paths.dev.empty()) {
        LoadedExamples d = load_examples(paths.dev, c.schemas, Split::dev, {false, "dev"});
        c.dev = std::move(d.examples);
        c.excluded.insert(c.excluded.end(), d.excluded.begin(), d.excluded.end());
    }
    return c;
}

AnnotationResult annotate_corpus(const Corpus& corpus, const std::vector<SchemaExample>& examples, std::uint64_t seed,
                                 const DecompOptions& options) {
    AnnotationResult out;
    for (const SchemaExample& e : examples) {
        try {
            out.annotated.push_back({e, decompose_example(e, corpus.schema(e.db_id), seed, options)});
        } catch (const Error& err) {
            out.failed.push_back({e.example_id, err.what()});
        }
    }
    return out;
}

// ---- running ----

namespace {

std::vector<PredictionRecord> read_partial_predictions(const fs::path& path) {
    std::vector<PredictionRecord> out;
    std::ifstream in(path);
    std::string line;
    while (std::getline(in, line)) {
        if (trim(line).empty()) continue;
        try {
            out.push_back(prediction_from_json(nlohmann::json::parse(line)));
        } catch (const nlohmann::json::exception&) {
            // a line cut short by an interrupted run
        }
    }
    return out;
}

void write_lines(const fs::path& path, const std::vector<PredictionRecord>& records) {
    std::string text;
    for (const PredictionRecord& r : records) text += to_json(r).dump() + "\n";
    write_file(path.string(), text);
}

std::string seed_dir_name(std::uint64_t seed) { return "seed_" + std::to_string(seed); }

class Runner {
public:
    Runner(const ExperimentConfig& config, const Corpus& corpus, CompletionBackend& backend)
        : config_(config), corpus_(corpus), backend_(backend), format_(schema_format_from_string(config.format)) {}

    const DatabaseSchema& prompt_schema(const std::string& db_id) {
        auto it = prompt_schemas_.find(db_id);
        if (it != prompt_schemas_.end()) return it->second;
        DatabaseSchema s = corpus_.schema(db_id);
        if (format_ == SchemaFormat::create_table_select3)
            s = attach_content_samples(s, database_path(corpus_.database_dir, db_id));
        return prompt_schemas_.emplace(db_id, std::move(s)).first->second;
    }

    std::optional<std::string> separator(PromptMethod m) const {
        auto it = config_.separators.find(std::string(to_string(m)));
        if (it == config_.separators.end()) return std::nullopt;
        return it->second;
    }

    PromptSpec spec(PromptMethod m, const std::vector<Demonstration>& demos, const SchemaExample& target,
                    std::uint64_t seed) {
        PromptSpec s;
        s.method = m;
        s.format = format_;
        s.demonstrations = demos;
        s.target.example = target;
        s.target.schema = prompt_schemas_.at(target.db_id);
        s.separator = separator(m);
        s.seed = seed;
        return s;
    }

    void dump(const fs::path& dir, const std::string& name, const std::string& text) {
        if (!config_.dump_prompts) return;
        fs::create_directories(dir);
        write_file((dir / name).string(), text);
    }

    PredictionRecord predict(const std::string& method, const std::vector<Demonstration>& demos,
                             const SchemaExample& target, std::uint64_t seed, const fs::path& prompt_dir) {
        PredictionRecord r;
        r.example_id = target.example_id;
        r.method = method;
        r.format = config_.format;
        r.shots = config_.shots;
        r.seed = seed;
        r.selection = config_.selection;
        try {
            if (method == "ltm") {
                const RenderedPrompt reduction = build_prompt(spec(PromptMethod::ltm_reduction, demos, target, seed));
                dump(prompt_dir, target.example_id + ".reduction.txt", reduction.text);
                std::size_t turn = 0;
                auto solving = [&](const std::vector<LtmTurn>& solved, const std::string& sub) {
                    PromptSpec s = spec(PromptMethod::ltm_solving, demos, target, seed);
                    s.target.solved = solved;
                    s.target.sub_question = sub;
                    RenderedPrompt p = build_prompt(s);
                    dump(prompt_dir, target.example_id + ".solving" + std::to_string(++turn) + ".txt", p.text);
                    return p;
                };
                const LtmResult res = run_ltm_dialogue(reduction, target.question, solving, backend_, config_.model_name);
                r.predicted_sql = res.sql;
                r.reasoning = res.sub_questions;
                r.transcript_refs = res.transcript_refs;
                r.extraction_failed = res.reduction_failed || res.sql.empty();
            } else {
                const PromptMethod pm = prompt_method_from_string(method);
                const RenderedPrompt prompt = build_prompt(spec(pm, demos, target, seed));
                dump(prompt_dir, target.example_id + ".txt", prompt.text);
                const CompletionRequest req = make_request(prompt, config_.model_name);
                r.transcript_refs.push_back(request_hash(req));
                const ParsedCompletion parsed = parse_completion(backend_.complete(req), pm);
                r.predicted_sql = parsed.sql;
                r.reasoning = parsed.steps;
                r.extraction_failed = parsed.extraction_failed;
            }
        } catch (const MissingTranscriptError&) {
            throw;  // the run stops; nothing is written for this example
        } catch (const BackendError&) {
            throw;
        } catch (const Error& e) {
            r.error = e.what();
        }
        return r;
    }

    RunResult run() {
        const fs::path out = config_.output_dir;
        fs::create_directories(out);
        write_file((out / "config.json").string(), to_json(config_).dump(2) + "\n");

        std::vector<SchemaExample> targets = corpus_.dev;
        if (config_.limit && targets.size() > *config_.limit) targets.resize(*config_.limit);

        // Demonstration pool: train examples the decomposition can handle, so
        // every method sees the same demonstrations.
        DecompOptions dopt;
        dopt.cut_on_for = config_.cut_on_for;
        dopt.join_table_skip = config_.join_table_skip;
        AnnotationResult ann = annotate_corpus(corpus_, corpus_.train, config_.annotation_seed, dopt);
        std::map<std::string, Decomposition> decomps;
        std::vector<SchemaExample> pool;
        for (AnnotatedExample& a : ann.annotated) {
            pool.push_back(a.example);
            decomps.emplace(a.example.example_id, std::move(a.decomposition));
        }
        auto hardness = [&](const SchemaExample& e) {
            return classify_hardness(parse_sql(e.gold_sql, corpus_.schema(e.db_id)));
        };

        nlohmann::json excluded = {{"ingest", nlohmann::json::array()}, {"annotation", nlohmann::json::array()}};
        for (const ExclusionEntry& e : corpus_.excluded)
            excluded["ingest"].push_back({{"example_id", e.example_id}, {"reason", e.reason}});
        for (const ExclusionEntry& e : ann.failed)
            excluded["annotation"].push_back({{"example_id", e.example_id}, {"reason", e.reason}});
        write_file((out / "excluded.json").string(), excluded.dump(2) + "\n");

        nlohmann::json selections = nlohmann::json::object();
        std::map<std::uint64_t, std::vector<SchemaExample>> chosen;
        for (std::uint64_t seed : config_.seeds) {
            SelectionPolicy policy{selection_kind_from_string(config_.selection), config_.shots, seed,
                                   config_.sort_easy_to_hard};
            chosen[seed] = select_examples(pool, policy, hardness);
            nlohmann::json ids = nlohmann::json::array();
            for (const SchemaExample& e : chosen[seed]) ids.push_back(e.example_id);
            selections[std::to_string(seed)] = ids;
        }
        write_file((out / "selections.json").string(), selections.dump(2) + "\n");

        for (const SchemaExample& t : targets) prompt_schema(t.db_id);
        for (const auto& [seed, demos] : chosen)
            for (const SchemaExample& d : demos) prompt_schema(d.db_id);

        std::atomic<std::size_t> produced{0};
        std::atomic<bool> interrupted{false};
        RunResult result;
        for (const std::string& method : config_.methods) {
            for (std::uint64_t seed : config_.seeds) {
                const fs::path dir = out / method / seed_dir_name(seed);
                fs::create_directories(dir);
                std::vector<Demonstration> demos;
                nlohmann::json demo_ids = nlohmann::json::array();
                for (const SchemaExample& e : chosen[seed]) {
                    Demonstration d;
                    d.example = e;
                    d.schema = prompt_schemas_.at(e.db_id);
                    d.decomposition = decomps.at(e.example_id);
                    demos.push_back(std::move(d));
                    demo_ids.push_back(e.example_id);
                }
                nlohmann::json manifest = {{"method", method},         {"seed", seed},
                                           {"format", config_.format}, {"shots", config_.shots},
                                           {"selection", config_.selection}, {"model_name", config_.model_name},
                                           {"demonstrations", demo_ids}};
                write_file((dir / "manifest.json").string(), manifest.dump(2) + "\n");

                const fs::path pred_path = dir / "predictions.jsonl";
                std::vector<PredictionRecord> existing = read_partial_predictions(pred_path);
                std::set<std::string> done;
                for (const PredictionRecord& r : existing) done.insert(r.example_id);
                write_lines(pred_path, existing);  // drops a torn trailing line

                std::vector<const SchemaExample*> pending;
                for (const SchemaExample& t : targets)
                    if (!done.count(t.example_id)) pending.push_back(&t);

                std::mutex mu;
                std::exception_ptr failure;
                std::ofstream append(pred_path, std::ios::app | std::ios::binary);
                std::atomic<std::size_t> next{0};
                auto worker = [&] {
                    for (;;) {
                        if (interrupted) return;
                        const std::size_t i = next++;
                        if (i >= pending.size()) return;
                        PredictionRecord r;
                        try {
                            r = predict(method, demos, *pending[i], seed, dir / "prompts");
                        } catch (...) {
                            std::lock_guard<std::mutex> lock(mu);
                            if (!failure) failure = std::current_exception();
                            interrupted = true;
                            return;
                        }
                        std::lock_guard<std::mutex> lock(mu);
                        if (interrupted) return;
                        append << to_json(r).dump() << "\n";
                        append.flush();
                        existing.push_back(std::move(r));
                        if (config_.stop_after && ++produced >= *config_.stop_after) interrupted = true;
                    }
                };
                std::vector<std::thread> pool_threads;
                for (int w = 1; w < config_.workers; ++w) pool_threads.emplace_back(worker);
                worker();
                for (auto& t : pool_threads) t.join();
                append.close();
                if (failure) std::rethrow_exception(failure);
                if (interrupted) throw RunInterrupted("run stopped after " + std::to_string(produced.load()) + " predictions");

                std::map<std::string, std::size_t> order;
                for (std::size_t i = 0; i < targets.size(); ++i) order[targets[i].example_id] = i;
                std::vector<PredictionRecord> kept;
                for (PredictionRecord& r : existing)
                    if (order.count(r.example_id)) kept.push_back(std::move(r));
                std::stable_sort(kept.begin(), kept.end(), [&](const PredictionRecord& a, const PredictionRecord& b) {
                    return order[a.example_id] < order[b.example_id];
                });
                write_lines(pred_path, kept);
                result.predictions.insert(result.predictions.end(), kept.begin(), kept.end());
            }
        }
        result.report = score_predictions(config_, corpus_, result.predictions);
        write_report(result.report, out);
        return result;
    }

private:
    const ExperimentConfig& config_;
    const Corpus& corpus_;
    CompletionBackend& backend_;
    SchemaFormat format_;
    std::map<std::string, DatabaseSchema> prompt_schemas_;
};

}  // namespace

RunResult run_experiment(const ExperimentConfig& config, CompletionBackend* backend) {
    validate_config(config);
    const Corpus corpus = load_corpus(config.dataset);
    std::unique_ptr<CompletionBackend> owned;
    std::unique_ptr<TranscriptWriter> writer;
    std::unique_ptr<CompletionBackend> recorder;
    if (!backend) {
        if (config.backend.kind == "replay") {
            owned = std::make_unique<ReplayBackend>(config.backend.transcripts);
            backend = owned.get();
        } else {
            LiveBackend::Options o = LiveBackend::options_from_env();
            o.requests_per_minute = config.backend.requests_per_minute;
            owned = std::make_unique<LiveBackend>(o);
            const fs::path tpath =
                config.backend.transcripts.empty() ? config.output_dir / "transcripts.jsonl" : config.backend.transcripts;
            writer = std::make_unique<TranscriptWriter>(tpath);
            recorder = std::make_unique<RecordingBackend>(*owned, *writer);
            backend = recorder.get();
        }
    }
    Runner runner(config, corpus, *backend);
    return runner.run();
}

EvalReport score_predictions(const ExperimentConfig& config, const Corpus& corpus,
                             const std::vector<PredictionRecord>& predictions) {
    std::map<std::string, const SchemaExample*> by_id;
    for (const SchemaExample& e : corpus.dev) by_id[e.example_id] = &e;
    for (const SchemaExample& e : corpus.train) by_id.emplace(e.example_id, &e);
    ScoreOptions opt;
    opt.timeout_ms = config.exec_timeout_ms;
    std::vector<ExampleVerdict> verdicts;
    for (const PredictionRecord& r : predictions) {
        auto it = by_id.find(r.example_id);
        if (it == by_id.end()) throw IntegrityError("prediction for unknown example '" + r.example_id + "'");
        const SchemaExample& gold = *it->second;
        std::vector<fs::path> replicas;
        if (config.replicas) replicas = list_replicas(*config.replicas, gold.db_id);
        verdicts.push_back(score_prediction(r, gold, corpus.schema(gold.db_id),
                                            database_path(corpus.database_dir, gold.db_id), replicas, opt));
    }
    return aggregate(std::move(verdicts));
}

void write_report(const EvalReport& report, const fs::path& dir) {
    fs::create_directories(dir);
    write_file((dir / "report.json").string(), report_to_json(report).dump(2) + "\n");
    write_file((dir / "report.txt").string(), render_report_table(report));
}

}  // namespace t2sql
