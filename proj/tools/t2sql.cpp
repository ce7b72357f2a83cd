#include <iostream>

#include <CLI11.hpp>

#include "t2sql/experiment.hpp"
#include "t2sql/text.hpp"

using namespace t2sql;
namespace fs = std::filesystem;

namespace {

struct Overrides {
    std::vector<std::string> methods;
    std::string format;
    std::optional<int> shots;
    std::string selection;
    std::vector<std::uint64_t> seeds;
    std::string output_dir;
    std::string transcripts;
    std::string backend;
    std::optional<std::size_t> limit;
    std::optional<int> workers;
    bool dump_prompts = false;
};

void add_overrides(CLI::App* cmd, Overrides& o) {
    cmd->add_option("--methods", o.methods, "Prompting methods");
    cmd->add_option("--format", o.format, "api_docs or create_table_select3");
    cmd->add_option("--shots", o.shots, "Demonstrations per prompt");
    cmd->add_option("--selection", o.selection, "random, g1, g2 or g3");
    cmd->add_option("--seeds", o.seeds, "Selection seeds");
    cmd->add_option("--output-dir", o.output_dir, "Run directory");
    cmd->add_option("--backend", o.backend, "replay or live");
    cmd->add_option("--transcripts", o.transcripts, "Transcript file (JSON lines)");
    cmd->add_option("--limit", o.limit, "Only the first N dev examples");
    cmd->add_option("--workers", o.workers, "Parallel workers");
    cmd->add_flag("--dump-prompts", o.dump_prompts, "Write every prompt under the run directory");
}

void apply(const Overrides& o, ExperimentConfig& c) {
    if (!o.methods.empty()) c.methods = o.methods;
    if (!o.format.empty()) c.format = o.format;
    if (o.shots) c.shots = *o.shots;
    if (!o.selection.empty()) c.selection = o.selection;
    if (!o.seeds.empty()) c.seeds = o.seeds;
    if (!o.output_dir.empty()) c.output_dir = o.output_dir;
    if (!o.backend.empty()) c.backend.kind = o.backend;
    if (!o.transcripts.empty()) c.backend.transcripts = o.transcripts;
    if (o.limit) c.limit = o.limit;
    if (o.workers) c.workers = *o.workers;
    if (o.dump_prompts) c.dump_prompts = true;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Text-to-SQL prompting experiments"};
    app.require_subcommand(1);

    std::string config_path;
    Overrides over;

    auto* ingest = app.add_subcommand("ingest", "Load a Spider-layout corpus and report what was kept");
    std::string ingest_out;
    ingest->add_option("--config", config_path, "Experiment config")->required();
    ingest->add_option("--out", ingest_out, "Write the internal corpus JSON here");

    auto* annotate = app.add_subcommand("annotate", "Export decompositions of the training examples");
    std::string annotate_out;
    std::uint64_t annotate_seed = 0;
    annotate->add_option("--config", config_path, "Experiment config")->required();
    annotate->add_option("--out", annotate_out, "Decompositions (JSON lines)")->required();
    annotate->add_option("--seed", annotate_seed, "Annotation seed");

    auto* run = app.add_subcommand("run", "Run an experiment");
    run->add_option("--config", config_path, "Experiment config")->required();
    add_overrides(run, over);

    auto* score = app.add_subcommand("score", "Score prediction files offline");
    std::vector<std::string> prediction_files;
    std::string score_out;
    score->add_option("--config", config_path, "Experiment config")->required();
    score->add_option("--predictions", prediction_files, "Prediction files (JSON lines)")->required();
    score->add_option("--out", score_out, "Directory for report.json and report.txt")->required();

    auto* report = app.add_subcommand("report", "Render the tables of a report.json");
    std::string report_in;
    report->add_option("--input", report_in, "report.json")->required();

    CLI11_PARSE(app, argc, argv);

    try {
        if (*ingest) {
            const ExperimentConfig c = load_config(config_path);
            const Corpus corpus = load_corpus(c.dataset);
            std::cout << "databases: " << corpus.schemas.size() << "\n"
                      << "train examples: " << corpus.train.size() << "\n"
                      << "dev examples: " << corpus.dev.size() << "\n"
                      << "excluded: " << corpus.excluded.size() << "\n";
            for (const ExclusionEntry& e : corpus.excluded) std::cout << "  " << e.example_id << ": " << e.reason << "\n";
            if (!ingest_out.empty()) {
                std::vector<SchemaExample> all = corpus.train;
                all.insert(all.end(), corpus.dev.begin(), corpus.dev.end());
                write_file(ingest_out, corpus_to_json(corpus.schemas, all).dump(2) + "\n");
            }
        } else if (*annotate) {
            const ExperimentConfig c = load_config(config_path);
            const Corpus corpus = load_corpus(c.dataset);
            DecompOptions opt;
            opt.cut_on_for = c.cut_on_for;
            opt.join_table_skip = c.join_table_skip;
            const AnnotationResult res = annotate_corpus(corpus, corpus.train, annotate_seed, opt);
            std::string text;
            for (const AnnotatedExample& a : res.annotated) text += to_json(a.decomposition).dump() + "\n";
            write_file(annotate_out, text);
            std::cout << "annotated: " << res.annotated.size() << "\n"
                      << "failed: " << res.failed.size() << "\n";
            for (const ExclusionEntry& e : res.failed) std::cerr << "  " << e.example_id << ": " << e.reason << "\n";
        } else if (*run) {
            ExperimentConfig c = load_config(config_path);
            apply(over, c);
            const RunResult r = run_experiment(c);
            std::cout << render_report_table(r.report);
        } else if (*score) {
            const ExperimentConfig c = load_config(config_path);
            const Corpus corpus = load_corpus(c.dataset);
            std::vector<PredictionRecord> preds;
            for (const std::string& f : prediction_files) {
                auto p = load_predictions(f);
                preds.insert(preds.end(), p.begin(), p.end());
            }
            const EvalReport rep = score_predictions(c, corpus, preds);
            write_report(rep, score_out);
            std::cout << render_report_table(rep);
        } else if (*report) {
            const auto j = nlohmann::json::parse(read_file(report_in));
            std::vector<ExampleVerdict> verdicts;
            for (const auto& v : j.at("per_example")) verdicts.push_back(verdict_from_json(v));
            std::cout << render_report_table(aggregate(std::move(verdicts)));
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
