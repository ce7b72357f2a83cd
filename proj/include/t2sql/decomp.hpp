#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "t2sql/dataset.hpp"
#include "t2sql/sqlkit.hpp"

namespace t2sql {

enum class PairOrigin { parse, fallback };

struct Annotation {
    ColumnRef ref;
    PairOrigin origin = PairOrigin::parse;

    friend bool operator==(const Annotation& a, const Annotation& b) {
        return same_pair(a.ref, b.ref) && a.ref.table_display == b.ref.table_display &&
               a.ref.column_display == b.ref.column_display && a.origin == b.origin;
    }
};

struct DecompStep {
    std::string sub_question;
    std::vector<Annotation> annotations;  // grouped by table, first appearance
    std::optional<std::string> partial_sql;
    // JOIN columns left out because their table was highlighted earlier.
    std::vector<ColumnRef> skipped;

    friend bool operator==(const DecompStep&, const DecompStep&) = default;
};

struct Decomposition {
    std::vector<DecompStep> steps;
    std::string source_example_id;

    std::vector<std::string> sub_questions() const;

    friend bool operator==(const Decomposition&, const Decomposition&) = default;
};

struct DecompOptions {
    bool cut_on_for = true;
    // Skip a JOIN ... ON column when its table was highlighted at an earlier
    // step; the hand annotations follow this convention.
    bool join_table_skip = true;
};

std::vector<std::string> segment_question(const std::string& question, const Query& gold_ast,
                                          const DecompOptions& options = {});

// `gold_sql` is returned verbatim as the final step; when empty the gold AST
// is rendered instead.
std::vector<std::string> derive_partial_sql(const std::vector<std::string>& sub_questions, const Query& gold_ast,
                                            const DatabaseSchema& schema, const std::string& gold_sql = {},
                                            const DecompOptions& options = {});

Decomposition annotate_intercol(const std::vector<std::string>& sub_questions,
                                const std::vector<std::string>& partial_sqls, const DatabaseSchema& schema,
                                std::uint64_t rng_seed, const DecompOptions& options = {});

// segment -> derive -> annotate for one example. Throws AnnotationError when
// the clause peeling cannot attribute a clause.
Decomposition decompose_example(const SchemaExample& example, const DatabaseSchema& schema,
                                std::uint64_t rng_seed, const DecompOptions& options = {});

// "t (c, c), t2 (c)" as written after "SQL table (column): ".
std::string format_annotations(const std::vector<Annotation>& annotations);

nlohmann::json to_json(const Decomposition& d);
Decomposition decomposition_from_json(const nlohmann::json& j);

}  // namespace t2sql
