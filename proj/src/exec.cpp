#include "t2sql/exec.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>

#include "sqlite_handle.hpp"
#include "t2sql/errors.hpp"
#include "t2sql/text.hpp"

namespace t2sql {

std::string Cell::to_display() const {
    switch (kind) {
        case Kind::null: return "None";
        case Kind::integer: return std::to_string(integer);
        case Kind::real: return detail::format_double(real);
        default: return text;
    }
}

bool has_top_level_order_by(std::string_view sql) {
    int depth = 0;
    char quote = 0;
    std::string word, prev;
    auto flush = [&]() -> bool {
        if (word.empty()) return false;
        const std::string w = to_lower(word);
        const bool hit = depth == 0 && prev == "order" && w == "by";
        prev = w;
        word.clear();
        return hit;
    };
    for (char c : sql) {
        if (quote) {
            if (c == quote) quote = 0;
            continue;
        }
        if (c == '\'' || c == '"' || c == '`') {
            if (flush()) return true;
            quote = c;
            continue;
        }
        if (std::isalnum(static_cast<unsigned char>(c)) || c == '_') {
            word += c;
            continue;
        }
        if (flush()) return true;
        if (c == '(') ++depth;
        if (c == ')') --depth;
        if (!std::isspace(static_cast<unsigned char>(c))) prev.clear();
    }
    return flush();
}

namespace {

struct Deadline {
    std::chrono::steady_clock::time_point at;
    bool fired = false;
};

int progress_callback(void* arg) {
    auto* d = static_cast<Deadline*>(arg);
    if (std::chrono::steady_clock::now() >= d->at) {
        d->fired = true;
        return 1;
    }
    return 0;
}

}  // namespace

Denotation execute_query(const std::string& sql, const std::filesystem::path& db_file, int timeout_ms) {
    if (!std::filesystem::exists(db_file)) throw ExecutionError("database file not found: " + db_file.string());
    detail::SqliteDb db(db_file.string(), true);
    Deadline deadline{std::chrono::steady_clock::now() + std::chrono::milliseconds(timeout_ms)};
    sqlite3_progress_handler(db.get(), 1000, progress_callback, &deadline);

    sqlite3_stmt* raw = nullptr;
    const char* tail = nullptr;
    if (sqlite3_prepare_v2(db.get(), sql.c_str(), -1, &raw, &tail) != SQLITE_OK) {
        std::string msg = sqlite3_errmsg(db.get());
        sqlite3_finalize(raw);
        if (deadline.fired) throw QueryTimeoutError("query exceeded " + std::to_string(timeout_ms) + " ms");
        throw ExecutionError(msg);
    }
    if (!raw) throw ExecutionError("empty statement");
    std::unique_ptr<sqlite3_stmt, int (*)(sqlite3_stmt*)> stmt(raw, sqlite3_finalize);
    if (tail && !trim(std::string_view(tail)).empty() && trim(std::string_view(tail)) != ";")
        throw ExecutionError("more than one statement");
    if (!sqlite3_stmt_readonly(raw)) throw ExecutionError("statement is not read-only");

    Denotation out;
    out.ordered = has_top_level_order_by(sql);
    const int ncol = sqlite3_column_count(raw);
    int rc;
    while ((rc = sqlite3_step(raw)) == SQLITE_ROW) {
        DenotationRow row;
        row.reserve(ncol);
        for (int i = 0; i < ncol; ++i) {
            switch (sqlite3_column_type(raw, i)) {
                case SQLITE_NULL: row.push_back(Cell::null_cell()); break;
                case SQLITE_INTEGER: row.push_back(Cell::of(static_cast<std::int64_t>(sqlite3_column_int64(raw, i)))); break;
                case SQLITE_FLOAT: row.push_back(Cell::of(sqlite3_column_double(raw, i))); break;
                case SQLITE_BLOB: {
                    Cell c;
                    c.kind = Cell::Kind::blob;
                    const auto* p = static_cast<const char*>(sqlite3_column_blob(raw, i));
                    c.text.assign(p ? p : "", sqlite3_column_bytes(raw, i));
                    row.push_back(std::move(c));
                    break;
                }
                default: {
                    const auto* p = reinterpret_cast<const char*>(sqlite3_column_text(raw, i));
                    row.push_back(Cell::of(std::string(p ? p : "", sqlite3_column_bytes(raw, i))));
                }
            }
        }
        out.rows.push_back(std::move(row));
    }
    if (rc != SQLITE_DONE) {
        if (deadline.fired) throw QueryTimeoutError("query exceeded " + std::to_string(timeout_ms) + " ms");
        throw ExecutionError(sqlite3_errmsg(db.get()));
    }
    return out;
}

bool cells_equal(const Cell& a, const Cell& b, double tol) {
    if (a.kind == Cell::Kind::null || b.kind == Cell::Kind::null) return a.kind == b.kind;
    if (a.numeric() && b.numeric()) {
        if (a.kind == Cell::Kind::integer && b.kind == Cell::Kind::integer) return a.integer == b.integer;
        const double x = a.as_double(), y = b.as_double();
        if (x == y) return true;
        return std::fabs(x - y) <= tol * std::max(std::fabs(x), std::fabs(y));
    }
    if (a.numeric() || b.numeric()) return false;
    return a.kind == b.kind && a.text == b.text;
}

namespace {

int kind_rank(const Cell& c) {
    if (c.kind == Cell::Kind::null) return 0;
    if (c.numeric()) return 1;
    if (c.kind == Cell::Kind::text) return 2;
    return 3;
}

bool cell_less(const Cell& a, const Cell& b) {
    const int ra = kind_rank(a), rb = kind_rank(b);
    if (ra != rb) return ra < rb;
    if (ra == 1) return a.as_double() < b.as_double();
    return a.text < b.text;
}

bool row_less(const DenotationRow& a, const DenotationRow& b) {
    return std::lexicographical_compare(a.begin(), a.end(), b.begin(), b.end(), cell_less);
}

bool rows_equal(const DenotationRow& a, const DenotationRow& b, double tol) {
    if (a.size() != b.size()) return false;
    for (std::size_t i = 0; i < a.size(); ++i)
        if (!cells_equal(a[i], b[i], tol)) return false;
    return true;
}

std::vector<DenotationRow> canonical_rows(std::vector<DenotationRow> rows, bool dedupe, double tol) {
    std::stable_sort(rows.begin(), rows.end(), row_less);
    if (dedupe) {
        auto last = std::unique(rows.begin(), rows.end(),
                                [tol](const DenotationRow& a, const DenotationRow& b) { return rows_equal(a, b, tol); });
        rows.erase(last, rows.end());
    }
    return rows;
}

}  // namespace

bool compare_denotations(const Denotation& pred, const Denotation& gold, const CompareOptions& options) {
    const double tol = options.relative_tolerance;
    if (!pred.rows.empty() && !gold.rows.empty() && pred.rows.front().size() != gold.rows.front().size())
        return false;
    std::vector<DenotationRow> p = pred.rows, g = gold.rows;
    if (gold.ordered) {
        if (options.set_semantics) {
            auto dedupe_stable = [tol](std::vector<DenotationRow>& rows) {
                std::vector<DenotationRow> out;
                for (auto& r : rows) {
                    bool seen = false;
                    for (const auto& o : out)
                        if (rows_equal(o, r, tol)) seen = true;
                    if (!seen) out.push_back(std::move(r));
                }
                rows = std::move(out);
            };
            dedupe_stable(p);
            dedupe_stable(g);
        }
    } else {
        p = canonical_rows(std::move(p), options.set_semantics, tol);
        g = canonical_rows(std::move(g), options.set_semantics, tol);
    }
    if (p.size() != g.size()) return false;
    for (std::size_t i = 0; i < p.size(); ++i)
        if (!rows_equal(p[i], g[i], tol)) return false;
    return true;
}

bool multi_db_equivalent(const std::string& pred_sql, const std::string& gold_sql,
                         const std::vector<std::filesystem::path>& replicas, const CompareOptions& options,
                         int timeout_ms) {
    if (replicas.empty()) throw FixtureIntegrityError("empty replica set");
    bool all = true;
    for (const auto& db : replicas) {
        Denotation gold;
        try {
            gold = execute_query(gold_sql, db, timeout_ms);
        } catch (const ExecutionError& e) {
            throw FixtureIntegrityError("gold query fails on " + db.string() + ": " + e.what());
        }
        if (!all) continue;  // keep checking gold on the remaining replicas
        try {
            Denotation pred = execute_query(pred_sql, db, timeout_ms);
            if (!compare_denotations(pred, gold, options)) all = false;
        } catch (const ExecutionError&) {
            all = false;
        }
    }
    return all;
}

std::vector<std::filesystem::path> list_replicas(const std::filesystem::path& replica_dir, std::string_view db_id) {
    std::vector<std::filesystem::path> out;
    const auto dir = replica_dir / std::string(db_id);
    if (!std::filesystem::is_directory(dir)) return out;
    for (const auto& entry : std::filesystem::directory_iterator(dir))
        if (entry.is_regular_file() && entry.path().extension() == ".sqlite") out.push_back(entry.path());
    std::sort(out.begin(), out.end());
    return out;
}

}  // namespace t2sql
