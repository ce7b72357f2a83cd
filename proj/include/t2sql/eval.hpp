#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "t2sql/dataset.hpp"
#include "t2sql/exec.hpp"
#include "t2sql/sqlkit.hpp"

namespace t2sql {

struct PredictionRecord {
    std::string example_id;
    std::string method;
    std::string format;
    int shots = 0;
    std::uint64_t seed = 0;
    std::string selection = "random";
    std::string predicted_sql;
    std::vector<std::string> reasoning;
    std::vector<std::string> transcript_refs;
    bool extraction_failed = false;
    std::string error;  // generation failure, empty when none

    friend bool operator==(const PredictionRecord&, const PredictionRecord&) = default;
};

nlohmann::json to_json(const PredictionRecord& r);
PredictionRecord prediction_from_json(const nlohmann::json& j);
std::vector<PredictionRecord> load_predictions(const std::filesystem::path& path);

enum class ErrorBucket { invalid_sql, semantic_incorrect, ambiguous_correct_candidate };
std::string_view to_string(ErrorBucket bucket);

struct ExampleVerdict {
    std::string example_id;
    std::string method;
    std::string format;
    int shots = 0;
    std::uint64_t seed = 0;
    std::string selection;

    bool exec_ok = false;
    std::optional<bool> multi_db_ok;
    bool exact_ok = false;
    std::map<Family, bool> component_ok;          // with the execution relaxation
    std::map<Family, bool> component_ok_strict;   // without it
    Hardness hardness = Hardness::easy;
    std::optional<ErrorBucket> bucket;

    // Test-suite verdict when replicas were scored, execution otherwise.
    bool correct() const { return multi_db_ok.value_or(exec_ok); }
};

nlohmann::json to_json(const ExampleVerdict& v);
ExampleVerdict verdict_from_json(const nlohmann::json& j);

struct ScoreOptions {
    CompareOptions compare;
    MatchOptions match;
    int timeout_ms = kDefaultTimeoutMs;
};

struct ExecScore {
    bool exec_ok = false;
    std::optional<bool> multi_db_ok;
    bool pred_failed = false;  // prediction did not execute on the primary database
    std::optional<Denotation> pred;
    Denotation gold;
};

// Gold must execute (FixtureIntegrityError otherwise).
ExecScore score_execution(const std::string& pred_sql, const std::string& gold_sql, const std::filesystem::path& db_file,
                          const std::vector<std::filesystem::path>& replicas, const ScoreOptions& options = {});

// `pred` null means the prediction did not parse: every family is false
// unless the relaxation applies.
std::map<Family, bool> score_components(const Query* pred, const Query& gold, bool exec_relaxation,
                                        bool whole_query_correct, const MatchOptions& options = {});

ExampleVerdict score_prediction(const PredictionRecord& record, const SchemaExample& gold,
                                const DatabaseSchema& schema, const std::filesystem::path& db_file,
                                const std::vector<std::filesystem::path>& replicas, const ScoreOptions& options = {});

std::map<ErrorBucket, std::size_t> bucket_errors(const std::vector<ExampleVerdict>& verdicts);

struct MetricStat {
    double mean = 0.0;
    std::optional<double> stddev;  // sample std; absent for a single seed
    std::vector<double> per_seed;
};

struct AggregateRow {
    std::string method;
    std::string format;
    int shots = 0;
    std::string selection;
    std::vector<std::uint64_t> seeds;
    std::size_t examples = 0;  // per seed
    bool has_test_suite = false;
    std::map<std::string, MetricStat> metrics;
    std::map<ErrorBucket, std::size_t> buckets;
};

struct EvalReport {
    std::vector<ExampleVerdict> per_example;
    std::vector<AggregateRow> aggregates;
};

MetricStat summarize(const std::vector<double>& per_seed);

// Groups by (method, format, shots, selection); statistics are across seeds.
EvalReport aggregate(std::vector<ExampleVerdict> verdicts);

nlohmann::json report_to_json(const EvalReport& report);
// Tables shaped as: hardness breakdown, components, shots, selection, formats, error buckets.
std::string render_report_table(const EvalReport& report);

}  // namespace t2sql
