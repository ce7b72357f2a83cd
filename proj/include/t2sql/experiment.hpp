#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "t2sql/dataset.hpp"
#include "t2sql/decomp.hpp"
#include "t2sql/errors.hpp"
#include "t2sql/eval.hpp"
#include "t2sql/llmclient.hpp"
#include "t2sql/promptgen.hpp"
#include "t2sql/select.hpp"

namespace t2sql {

// Experiment-level methods; "ltm" expands to the reduction + solving dialogue.
inline const std::vector<std::string> kMethods = {"standard", "cot", "ltm", "qdecomp", "qdecomp_intercol"};

struct DatasetPaths {
    std::filesystem::path tables;
    std::filesystem::path train;
    std::filesystem::path dev;
    std::filesystem::path database_dir;
};

struct BackendConfig {
    std::string kind = "replay";  // replay | live
    std::filesystem::path transcripts;
    double requests_per_minute = 60.0;
};

struct ExperimentConfig {
    std::vector<std::string> methods = {"qdecomp_intercol"};
    std::string format = "api_docs";
    int shots = 8;
    std::string selection = "random";
    std::vector<std::uint64_t> seeds = {0, 1, 2, 3, 4};
    BackendConfig backend;
    std::string model_name = "code-davinci-002";
    DatasetPaths dataset;
    std::optional<std::filesystem::path> replicas;
    std::filesystem::path output_dir = "runs/default";
    int workers = 1;
    std::optional<std::size_t> limit;
    bool dump_prompts = false;
    std::uint64_t annotation_seed = 0;
    int exec_timeout_ms = kDefaultTimeoutMs;
    std::map<std::string, std::string> separators;  // prompt method -> separator
    bool cut_on_for = true;
    bool join_table_skip = true;
    bool sort_easy_to_hard = false;
    // Testing hook: abort after this many new predictions, leaving a partial run.
    std::optional<std::size_t> stop_after;
};

// Relative paths are resolved against `base_dir`.
ExperimentConfig config_from_json(const nlohmann::json& j, const std::filesystem::path& base_dir = {});
ExperimentConfig load_config(const std::filesystem::path& path);
nlohmann::json to_json(const ExperimentConfig& c);
// Throws ConfigError.
void validate_config(const ExperimentConfig& c);

struct Corpus {
    std::vector<DatabaseSchema> schemas;
    std::vector<SchemaExample> train;
    std::vector<SchemaExample> dev;
    std::vector<ExclusionEntry> excluded;
    std::filesystem::path database_dir;

    const DatabaseSchema& schema(std::string_view db_id) const;
};

Corpus load_corpus(const DatasetPaths& paths);

struct AnnotatedExample {
    SchemaExample example;
    Decomposition decomposition;
};

struct AnnotationResult {
    std::vector<AnnotatedExample> annotated;
    std::vector<ExclusionEntry> failed;
};

AnnotationResult annotate_corpus(const Corpus& corpus, const std::vector<SchemaExample>& examples, std::uint64_t seed,
                                 const DecompOptions& options = {});

// Thrown by the stop_after hook.
class RunInterrupted : public Error {
public:
    using Error::Error;
};

struct RunResult {
    EvalReport report;
    std::vector<PredictionRecord> predictions;
};

// When `backend` is null one is built from config.backend.
RunResult run_experiment(const ExperimentConfig& config, CompletionBackend* backend = nullptr);

// Offline scoring of prediction records against the corpus.
EvalReport score_predictions(const ExperimentConfig& config, const Corpus& corpus,
                             const std::vector<PredictionRecord>& predictions);

void write_report(const EvalReport& report, const std::filesystem::path& dir);

}  // namespace t2sql
