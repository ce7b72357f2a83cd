#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace t2sql {

struct Cell {
    enum class Kind { null, integer, real, text, blob };
    Kind kind = Kind::null;
    std::int64_t integer = 0;
    double real = 0.0;
    std::string text;  // text and blob payloads

    static Cell null_cell() { return {}; }
    static Cell of(std::int64_t v) { return {Kind::integer, v, 0.0, {}}; }
    static Cell of(double v) { return {Kind::real, 0, v, {}}; }
    static Cell of(std::string v) { return {Kind::text, 0, 0.0, std::move(v)}; }

    bool numeric() const { return kind == Kind::integer || kind == Kind::real; }
    double as_double() const { return kind == Kind::integer ? static_cast<double>(integer) : real; }
    std::string to_display() const;
};

using DenotationRow = std::vector<Cell>;

struct Denotation {
    std::vector<DenotationRow> rows;
    bool ordered = false;  // the producing query had a top-level ORDER BY
};

struct CompareOptions {
    double relative_tolerance = 1e-6;
    bool set_semantics = false;  // default is bag (multiset) comparison
};

inline constexpr int kDefaultTimeoutMs = 30000;

// True when `sql` has ORDER BY outside any parentheses.
bool has_top_level_order_by(std::string_view sql);

Denotation execute_query(const std::string& sql, const std::filesystem::path& db_file,
                         int timeout_ms = kDefaultTimeoutMs);

bool cells_equal(const Cell& a, const Cell& b, double relative_tolerance);

bool compare_denotations(const Denotation& pred, const Denotation& gold, const CompareOptions& options = {});

// Gold must run on every replica (FixtureIntegrityError otherwise); a
// prediction that fails on any replica is not equivalent.
bool multi_db_equivalent(const std::string& pred_sql, const std::string& gold_sql,
                         const std::vector<std::filesystem::path>& replicas,
                         const CompareOptions& options = {}, int timeout_ms = kDefaultTimeoutMs);

// Replica set for one database: every *.sqlite file under <replica_dir>/<db_id>/,
// sorted by file name.
std::vector<std::filesystem::path> list_replicas(const std::filesystem::path& replica_dir,
                                                 std::string_view db_id);

}  // namespace t2sql
