#include "t2sql/dataset.hpp"

#include <charconv>
#include <set>

#include "sqlite_handle.hpp"
#include "t2sql/errors.hpp"
#include "t2sql/sqlkit.hpp"
#include "t2sql/text.hpp"

namespace t2sql {

using nlohmann::json;

const ColumnDef* TableDef::find_column(std::string_view column) const {
    for (const ColumnDef& c : columns)
        if (iequals(c.name, column)) return &c;
    return nullptr;
}

const TableDef* DatabaseSchema::find_table(std::string_view name) const {
    for (const TableDef& t : tables)
        if (iequals(t.name, name)) return &t;
    return nullptr;
}

std::vector<const ColumnRef*> DatabaseSchema::primary_keys_of(std::string_view table) const {
    std::vector<const ColumnRef*> out;
    const std::string t = to_lower(table);
    for (const ColumnRef& pk : primary_keys)
        if (pk.table == t) out.push_back(&pk);
    return out;
}

std::string_view to_string(Split split) { return split == Split::train ? "train" : "dev"; }

namespace {

json parse_json(std::string_view text) {
    try {
        return json::parse(text.begin(), text.end());
    } catch (const json::parse_error& e) {
        throw JsonParseError(e.what(), e.byte);
    }
}

void check_unique_names(const DatabaseSchema& s) {
    std::set<std::string> tables;
    for (const TableDef& t : s.tables) {
        if (!tables.insert(to_lower(t.name)).second)
            throw SchemaIntegrityError(s.db_id, "duplicate table " + t.name);
        std::set<std::string> cols;
        for (const ColumnDef& c : t.columns)
            if (!cols.insert(to_lower(c.name)).second)
                throw SchemaIntegrityError(s.db_id, "duplicate column " + t.name + "." + c.name);
    }
}

void check_key(const DatabaseSchema& s, const ColumnRef& ref) {
    const TableDef* t = s.find_table(ref.table);
    if (!t || !t->find_column(ref.column))
        throw SchemaIntegrityError(s.db_id, "key column " + ref.qualified() + " does not exist");
}

DatabaseSchema schema_from_spider(const json& j) {
    DatabaseSchema s;
    s.db_id = j.at("db_id").get<std::string>();
    const auto& table_names = j.at("table_names_original");
    const auto& columns = j.at("column_names_original");
    const auto& types = j.at("column_types");
    if (types.size() != columns.size())
        throw SchemaIntegrityError(s.db_id, "column_types and column_names_original differ in length");
    for (const auto& name : table_names) s.tables.push_back(TableDef{name.get<std::string>(), {}, std::nullopt});

    // Spider column index -> (table, column) reference; index 0 is "*".
    std::vector<std::optional<ColumnRef>> by_index;
    for (std::size_t i = 0; i < columns.size(); ++i) {
        const int table_index = columns[i].at(0).get<int>();
        const std::string name = columns[i].at(1).get<std::string>();
        if (table_index < 0) {
            by_index.emplace_back(std::nullopt);
            continue;
        }
        if (static_cast<std::size_t>(table_index) >= s.tables.size())
            throw SchemaIntegrityError(s.db_id, "column " + name + " references table index " +
                                                    std::to_string(table_index));
        TableDef& t = s.tables[table_index];
        t.columns.push_back(ColumnDef{name, types[i].get<std::string>(), false});
        by_index.emplace_back(ColumnRef::make(t.name, name));
    }
    auto resolve = [&](const json& idx) -> ColumnRef {
        if (!idx.is_number_integer()) throw SchemaIntegrityError(s.db_id, "key index is not an integer");
        const long long i = idx.get<long long>();
        if (i < 0 || static_cast<std::size_t>(i) >= by_index.size() || !by_index[i])
            throw SchemaIntegrityError(s.db_id, "key references column index " + std::to_string(i));
        return *by_index[i];
    };
    for (const auto& pk : j.at("primary_keys")) {
        if (pk.is_array()) {
            for (const auto& idx : pk) s.primary_keys.push_back(resolve(idx));
        } else {
            s.primary_keys.push_back(resolve(pk));
        }
    }
    for (const auto& fk : j.at("foreign_keys")) {
        if (!fk.is_array() || fk.size() != 2) throw SchemaIntegrityError(s.db_id, "malformed foreign key");
        s.foreign_keys.push_back(ForeignKey{resolve(fk[0]), resolve(fk[1])});
    }
    check_unique_names(s);
    return s;
}

}  // namespace

std::vector<DatabaseSchema> parse_schemas(std::string_view json_text) {
    const json j = parse_json(json_text);
    if (!j.is_array()) throw JsonParseError("schema file must hold a JSON array", 0);
    std::vector<DatabaseSchema> out;
    std::set<std::string> seen;
    for (const auto& entry : j) {
        DatabaseSchema s;
        try {
            s = schema_from_spider(entry);
        } catch (const json::exception& e) {
            const std::string id = entry.is_object() && entry.contains("db_id") && entry["db_id"].is_string()
                                       ? entry["db_id"].get<std::string>()
                                       : std::string("?");
            throw SchemaIntegrityError(id, e.what());
        }
        if (!seen.insert(s.db_id).second) throw SchemaIntegrityError(s.db_id, "duplicate db_id");
        out.push_back(std::move(s));
    }
    return out;
}

std::vector<DatabaseSchema> load_schemas(const std::filesystem::path& path) {
    return parse_schemas(read_file(path.string()));
}

const DatabaseSchema* find_schema(const std::vector<DatabaseSchema>& schemas, std::string_view db_id) {
    for (const DatabaseSchema& s : schemas)
        if (s.db_id == db_id) return &s;
    return nullptr;
}

LoadedExamples parse_examples(std::string_view json_text, const std::vector<DatabaseSchema>& schemas,
                              Split split, const LoadOptions& options) {
    const json j = parse_json(json_text);
    if (!j.is_array()) throw JsonParseError("example file must hold a JSON array", 0);
    const std::string prefix = options.id_prefix.empty() ? std::string(to_string(split)) : options.id_prefix;
    LoadedExamples out;
    for (std::size_t i = 0; i < j.size(); ++i) {
        const json& e = j[i];
        SchemaExample ex;
        char buf[16];
        std::snprintf(buf, sizeof buf, "%04zu", i);
        ex.example_id = e.contains("example_id") ? e["example_id"].get<std::string>() : prefix + "_" + buf;
        ex.db_id = e.at("db_id").get<std::string>();
        ex.question = e.at("question").get<std::string>();
        ex.gold_sql = e.at("query").get<std::string>();
        ex.split = split;
        const DatabaseSchema* schema = find_schema(schemas, ex.db_id);
        if (!schema) throw IntegrityError("example " + ex.example_id + ": unknown db_id '" + ex.db_id + "'");
        try {
            (void)parse_sql(ex.gold_sql, *schema);
        } catch (const Error& err) {
            if (options.strict) throw;
            out.excluded.push_back({ex.example_id, err.what()});
            continue;
        }
        out.examples.push_back(std::move(ex));
    }
    return out;
}

LoadedExamples load_examples(const std::filesystem::path& path, const std::vector<DatabaseSchema>& schemas,
                             Split split, const LoadOptions& options) {
    return parse_examples(read_file(path.string()), schemas, split, options);
}

std::filesystem::path database_path(const std::filesystem::path& database_dir, std::string_view db_id) {
    return database_dir / std::string(db_id) / (std::string(db_id) + ".sqlite");
}

namespace detail {

std::string format_double(double value) {
    char buf[64];
    auto res = std::to_chars(buf, buf + sizeof buf, value);
    return std::string(buf, res.ptr);
}

std::string render_cell(sqlite3_stmt* stmt, int column) {
    switch (sqlite3_column_type(stmt, column)) {
        case SQLITE_NULL: return "None";
        case SQLITE_INTEGER: return std::to_string(sqlite3_column_int64(stmt, column));
        case SQLITE_FLOAT: return format_double(sqlite3_column_double(stmt, column));
        default: {
            const auto* text = reinterpret_cast<const char*>(sqlite3_column_text(stmt, column));
            return text ? std::string(text, sqlite3_column_bytes(stmt, column)) : std::string();
        }
    }
}

}  // namespace detail

namespace {

std::string quote_ident(const std::string& name) { return "\"" + replace_all(name, "\"", "\"\"") + "\""; }

}  // namespace

DatabaseSchema attach_content_samples(const DatabaseSchema& schema, const std::filesystem::path& db_file) {
    if (!std::filesystem::exists(db_file)) throw ContentError("database file not found: " + db_file.string());
    detail::SqliteDb db(db_file.string(), true);
    DatabaseSchema out = schema;
    for (TableDef& t : out.tables) {
        {
            detail::Statement check(db.get(), "SELECT count(*) FROM sqlite_master WHERE type = 'table' AND lower(name) = lower(?)");
            sqlite3_bind_text(check.get(), 1, t.name.c_str(), -1, SQLITE_TRANSIENT);
            sqlite3_step(check.get());
            if (sqlite3_column_int(check.get(), 0) == 0) throw ContentError("table " + t.name + " missing from " + db_file.string());
        }
        {
            detail::Statement info(db.get(), "PRAGMA table_info(" + quote_ident(t.name) + ")");
            while (sqlite3_step(info.get()) == SQLITE_ROW) {
                const std::string name = reinterpret_cast<const char*>(sqlite3_column_text(info.get(), 1));
                const unsigned char* type = sqlite3_column_text(info.get(), 2);
                for (ColumnDef& c : t.columns)
                    if (iequals(c.name, name)) c.declared_type = type ? reinterpret_cast<const char*>(type) : "";
            }
        }
        {
            std::vector<std::string> unique_indexes;
            detail::Statement list(db.get(), "PRAGMA index_list(" + quote_ident(t.name) + ")");
            while (sqlite3_step(list.get()) == SQLITE_ROW) {
                const bool unique = sqlite3_column_int(list.get(), 2) != 0;
                const unsigned char* origin = sqlite3_column_text(list.get(), 3);
                if (unique && origin && std::string(reinterpret_cast<const char*>(origin)) == "u")
                    unique_indexes.emplace_back(reinterpret_cast<const char*>(sqlite3_column_text(list.get(), 1)));
            }
            for (const std::string& idx : unique_indexes) {
                detail::Statement cols(db.get(), "PRAGMA index_info(" + quote_ident(idx) + ")");
                std::vector<std::string> names;
                while (sqlite3_step(cols.get()) == SQLITE_ROW)
                    names.emplace_back(reinterpret_cast<const char*>(sqlite3_column_text(cols.get(), 2)));
                if (names.size() != 1) continue;
                for (ColumnDef& c : t.columns)
                    if (iequals(c.name, names[0])) c.unique = true;
            }
        }
        std::string select = "SELECT ";
        for (std::size_t i = 0; i < t.columns.size(); ++i) {
            if (i) select += ", ";
            select += quote_ident(t.columns[i].name);
        }
        select += " FROM " + quote_ident(t.name) + " LIMIT 3";
        detail::Statement rows(db.get(), select);
        std::vector<Row> sample;
        int rc;
        while ((rc = sqlite3_step(rows.get())) == SQLITE_ROW) {
            Row row;
            for (std::size_t i = 0; i < t.columns.size(); ++i) row.push_back(detail::render_cell(rows.get(), static_cast<int>(i)));
            sample.push_back(std::move(row));
        }
        if (rc != SQLITE_DONE) throw ContentError(std::string("reading ") + t.name + ": " + sqlite3_errmsg(db.get()));
        t.content_sample = std::move(sample);
    }
    return out;
}

// ---- internal JSON form ----

namespace {

json ref_json(const ColumnRef& r) { return json{{"table", r.table_display}, {"column", r.column_display}}; }

ColumnRef ref_from(const json& j) { return ColumnRef::make(j.at("table").get<std::string>(), j.at("column").get<std::string>()); }

}  // namespace

json to_json(const DatabaseSchema& s) {
    json tables = json::array();
    for (const TableDef& t : s.tables) {
        json cols = json::array();
        for (const ColumnDef& c : t.columns) cols.push_back({{"name", c.name}, {"type", c.declared_type}, {"unique", c.unique}});
        json entry = {{"name", t.name}, {"columns", cols}};
        entry["content_sample"] = t.content_sample ? json(*t.content_sample) : json(nullptr);
        tables.push_back(std::move(entry));
    }
    json fks = json::array();
    for (const ForeignKey& fk : s.foreign_keys) fks.push_back(json::array({ref_json(fk.from), ref_json(fk.to)}));
    json pks = json::array();
    for (const ColumnRef& pk : s.primary_keys) pks.push_back(ref_json(pk));
    return json{{"db_id", s.db_id}, {"tables", tables}, {"foreign_keys", fks}, {"primary_keys", pks}};
}

DatabaseSchema schema_from_json(const json& j) {
    DatabaseSchema s;
    s.db_id = j.at("db_id").get<std::string>();
    for (const auto& t : j.at("tables")) {
        TableDef def;
        def.name = t.at("name").get<std::string>();
        for (const auto& c : t.at("columns"))
            def.columns.push_back(ColumnDef{c.at("name").get<std::string>(), c.value("type", std::string()), c.value("unique", false)});
        if (t.contains("content_sample") && !t["content_sample"].is_null()) {
            def.content_sample = t["content_sample"].get<std::vector<Row>>();
            if (def.content_sample->size() > 3) throw SchemaIntegrityError(s.db_id, "content sample of " + def.name + " has more than 3 rows");
            for (const Row& r : *def.content_sample)
                if (r.size() != def.columns.size()) throw SchemaIntegrityError(s.db_id, "content sample row width mismatch in " + def.name);
        }
        s.tables.push_back(std::move(def));
    }
    for (const auto& fk : j.at("foreign_keys")) s.foreign_keys.push_back(ForeignKey{ref_from(fk.at(0)), ref_from(fk.at(1))});
    for (const auto& pk : j.at("primary_keys")) s.primary_keys.push_back(ref_from(pk));
    check_unique_names(s);
    for (const ForeignKey& fk : s.foreign_keys) {
        check_key(s, fk.from);
        check_key(s, fk.to);
    }
    for (const ColumnRef& pk : s.primary_keys) check_key(s, pk);
    return s;
}

json to_json(const SchemaExample& e) {
    return json{{"example_id", e.example_id}, {"db_id", e.db_id}, {"question", e.question},
                {"query", e.gold_sql}, {"split", std::string(to_string(e.split))}};
}

SchemaExample example_from_json(const json& j) {
    SchemaExample e;
    e.example_id = j.at("example_id").get<std::string>();
    e.db_id = j.at("db_id").get<std::string>();
    e.question = j.at("question").get<std::string>();
    e.gold_sql = j.at("query").get<std::string>();
    e.split = j.value("split", std::string("dev")) == "train" ? Split::train : Split::dev;
    return e;
}

json corpus_to_json(const std::vector<DatabaseSchema>& schemas, const std::vector<SchemaExample>& examples) {
    json s = json::array();
    for (const DatabaseSchema& d : schemas) s.push_back(to_json(d));
    json e = json::array();
    for (const SchemaExample& x : examples) e.push_back(to_json(x));
    return json{{"schemas", s}, {"examples", e}};
}

}  // namespace t2sql
