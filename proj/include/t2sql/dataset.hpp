#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "t2sql/column_ref.hpp"

namespace t2sql {

struct ColumnDef {
    std::string name;           // original identifier
    std::string declared_type;  // Spider coarse type until a database is attached
    bool unique = false;        // only known once a database is attached

    friend bool operator==(const ColumnDef&, const ColumnDef&) = default;
};

using Row = std::vector<std::string>;

struct TableDef {
    std::string name;  // original identifier
    std::vector<ColumnDef> columns;
    // At most three rows, one cell per column, rendered as text.
    std::optional<std::vector<Row>> content_sample;

    const ColumnDef* find_column(std::string_view column) const;

    friend bool operator==(const TableDef&, const TableDef&) = default;
};

struct ForeignKey {
    ColumnRef from;
    ColumnRef to;

    friend bool operator==(const ForeignKey&, const ForeignKey&) = default;
};

struct DatabaseSchema {
    std::string db_id;
    std::vector<TableDef> tables;
    std::vector<ForeignKey> foreign_keys;
    std::vector<ColumnRef> primary_keys;

    const TableDef* find_table(std::string_view name) const;
    std::vector<const ColumnRef*> primary_keys_of(std::string_view table) const;

    friend bool operator==(const DatabaseSchema&, const DatabaseSchema&) = default;
};

enum class Split { train, dev };

std::string_view to_string(Split split);

struct SchemaExample {
    std::string example_id;
    std::string db_id;
    std::string question;
    std::string gold_sql;
    Split split = Split::dev;

    friend bool operator==(const SchemaExample&, const SchemaExample&) = default;
};

// One example dropped during loading, with the reason.
struct ExclusionEntry {
    std::string example_id;
    std::string reason;
};

struct LoadOptions {
    // When set, the first unsupported gold query aborts the load instead of
    // being recorded in the exclusion manifest.
    bool strict = false;
    // Prefix for generated example ids ("<prefix>_<index>").
    std::string id_prefix;
};

struct LoadedExamples {
    std::vector<SchemaExample> examples;
    std::vector<ExclusionEntry> excluded;
};

// Spider `tables.json` layout.
std::vector<DatabaseSchema> load_schemas(const std::filesystem::path& path);
std::vector<DatabaseSchema> parse_schemas(std::string_view json_text);

// Spider / Spider-Realistic example file layout (a JSON array of objects
// with db_id, question, query).
LoadedExamples load_examples(const std::filesystem::path& path,
                             const std::vector<DatabaseSchema>& schemas, Split split,
                             const LoadOptions& options = {});
LoadedExamples parse_examples(std::string_view json_text,
                              const std::vector<DatabaseSchema>& schemas, Split split,
                              const LoadOptions& options = {});

// Fills content_sample from the first rows of each table, and refreshes each
// column's declared type and UNIQUE flag from the database catalog.
DatabaseSchema attach_content_samples(const DatabaseSchema& schema,
                                      const std::filesystem::path& db_file);

// Spider layout: database/<db_id>/<db_id>.sqlite
std::filesystem::path database_path(const std::filesystem::path& database_dir,
                                    std::string_view db_id);

const DatabaseSchema* find_schema(const std::vector<DatabaseSchema>& schemas,
                                  std::string_view db_id);

// Internal corpus form.
nlohmann::json to_json(const DatabaseSchema& schema);
DatabaseSchema schema_from_json(const nlohmann::json& j);
nlohmann::json to_json(const SchemaExample& example);
SchemaExample example_from_json(const nlohmann::json& j);

nlohmann::json corpus_to_json(const std::vector<DatabaseSchema>& schemas,
                              const std::vector<SchemaExample>& examples);

}  // namespace t2sql
