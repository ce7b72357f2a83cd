#include "query_gen.hpp"

#include <random>

namespace t2sql::testing {

namespace {

class Gen {
public:
    Gen(const DatabaseSchema& s, std::mt19937_64& rng) : s_(s), rng_(rng) {}

    // `alias_prefix` is "T" or another prefix for the renamed copy.
    std::string query(int depth, const std::string& alias_prefix) {
        // Decide the whole shape first so both alias variants stay identical.
        plan(depth);
        return text(alias_prefix);
    }

    std::string text(const std::string& p) const {
        auto col = [&](const Col& c) {
            if (tables_.size() == 1) return c.name;
            return p + std::to_string(c.table + 1) + "." + c.name;
        };
        auto item = [&](const Item& it) {
            if (it.star) return std::string("count(*)");
            std::string inner = (it.distinct ? "DISTINCT " : "") + col(it.col);
            return it.agg.empty() ? inner : it.agg + "(" + inner + ")";
        };
        std::string out = "SELECT ";
        if (distinct_) out += "DISTINCT ";
        for (std::size_t i = 0; i < select_.size(); ++i) out += (i ? " ,  " : "") + item(select_[i]);
        out += " FROM " + s_.tables[tables_[0]].name;
        if (tables_.size() > 1) out += " AS " + p + "1";
        for (std::size_t i = 1; i < tables_.size(); ++i) {
            out += " JOIN " + s_.tables[tables_[i]].name + " AS " + p + std::to_string(i + 1) + " ON " +
                   col(joins_[i - 1].first) + "  =  " + col(joins_[i - 1].second);
        }
        for (std::size_t i = 0; i < where_.size(); ++i) {
            out += i == 0 ? " WHERE " : (or_[i - 1] ? " OR " : " AND ");
            const Cond& c = where_[i];
            out += col(c.col) + " " + c.op + " " + (c.sub.empty() ? c.value : "(" + c.sub + ")");
        }
        if (!group_.empty()) {
            out += " GROUP BY " + col(group_.front());
            if (having_) out += " HAVING count(*)  >=  " + std::to_string(having_);
        }
        if (order_) {
            out += " ORDER BY " + (order_star_ ? std::string("count(*)") : col(order_col_)) + (desc_ ? " DESC" : " ASC");
            if (limit_) out += " LIMIT " + std::to_string(limit_);
        }
        if (!set_op_.empty()) out += " " + set_op_ + " " + set_rhs_;
        return out;
    }

private:
    struct Col {
        std::size_t table = 0;  // index into tables_
        std::string name;
    };
    struct Item {
        std::string agg;
        bool distinct = false;
        bool star = false;
        Col col;
    };
    struct Cond {
        Col col;
        std::string op;
        std::string value;
        std::string sub;
    };

    const DatabaseSchema& s_;
    std::mt19937_64& rng_;
    std::vector<std::size_t> tables_;
    std::vector<std::pair<Col, Col>> joins_;
    std::vector<Item> select_;
    bool distinct_ = false;
    std::vector<Cond> where_;
    std::vector<bool> or_;
    std::vector<Col> group_;
    int having_ = 0;
    bool order_ = false, order_star_ = false, desc_ = false;
    Col order_col_;
    int limit_ = 0;
    std::string set_op_, set_rhs_;

    std::size_t pick(std::size_t n) { return n <= 1 ? 0 : rng_() % n; }
    bool coin(int percent) { return static_cast<int>(rng_() % 100) < percent; }

    std::size_t table_index(const std::string& name) const {
        for (std::size_t i = 0; i < s_.tables.size(); ++i)
            if (s_.tables[i].name == name || ColumnRef::make(s_.tables[i].name, "x").table == ColumnRef::make(name, "x").table)
                return i;
        return 0;
    }

    std::string column_display(std::size_t table, const std::string& lower) const {
        for (const ColumnDef& c : s_.tables[table].columns)
            if (ColumnRef::make("t", c.name).column == lower) return c.name;
        return lower;
    }

    Col any_col() {
        Col c;
        c.table = pick(tables_.size());
        const TableDef& t = s_.tables[tables_[c.table]];
        c.name = t.columns[pick(t.columns.size())].name;
        while (c.name.find(' ') != std::string::npos) c.name = t.columns[pick(t.columns.size())].name;
        return c;
    }

    std::string literal(const Col& c) {
        if (type_of(c) == "number") return std::to_string(pick(2000));
        static const char* words[] = {"'USA'", "'France'", "\"Red\"", "'x'", "'Heme'"};
        return words[pick(5)];
    }

    std::string type_of(const Col& c) const {
        for (const ColumnDef& d : s_.tables[tables_[c.table]].columns)
            if (d.name == c.name) return d.declared_type;
        return "text";
    }

    void plan(int depth) {
        tables_ = {pick(s_.tables.size())};
        // Follow foreign keys touching the current tables.
        const int joins = depth == 0 ? static_cast<int>(pick(3)) : 0;
        for (int j = 0; j < joins; ++j) {
            std::vector<std::pair<Col, Col>> options;
            std::vector<std::size_t> targets;
            for (const ForeignKey& fk : s_.foreign_keys) {
                for (int dir = 0; dir < 2; ++dir) {
                    const ColumnRef& here = dir ? fk.to : fk.from;
                    const ColumnRef& there = dir ? fk.from : fk.to;
                    const std::size_t hi = table_index(here.table_display);
                    const std::size_t ti = table_index(there.table_display);
                    bool have_here = false, have_there = false;
                    std::size_t pos = 0;
                    for (std::size_t k = 0; k < tables_.size(); ++k) {
                        if (tables_[k] == hi) { have_here = true; pos = k; }
                        if (tables_[k] == ti) have_there = true;
                    }
                    if (!have_here || have_there) continue;
                    options.push_back({Col{pos, column_display(hi, here.column)}, Col{tables_.size(), column_display(ti, there.column)}});
                    targets.push_back(ti);
                }
            }
            if (options.empty()) break;
            const std::size_t k = pick(options.size());
            tables_.push_back(targets[k]);
            joins_.push_back(options[k]);
        }

        const bool grouped = coin(25);
        if (grouped) group_ = {any_col()};
        const std::size_t n_items = 1 + pick(3);
        static const char* aggs[] = {"count", "sum", "avg", "min", "max"};
        for (std::size_t i = 0; i < n_items; ++i) {
            Item it;
            if (grouped && i == 0) {
                it.col = group_.front();
            } else if (coin(15)) {
                it.star = true;
            } else {
                it.col = any_col();
                if (coin(30)) it.agg = aggs[pick(5)];
                if (!it.agg.empty() && it.agg == "count" && coin(30)) it.distinct = true;
            }
            select_.push_back(it);
        }
        distinct_ = !grouped && coin(10);
        if (grouped && coin(40)) having_ = 1 + static_cast<int>(pick(3));

        const std::size_t n_where = coin(55) ? 1 + pick(2) : 0;
        for (std::size_t i = 0; i < n_where; ++i) {
            Cond c;
            c.col = any_col();
            const std::size_t kind = pick(depth < 1 ? 7 : 5);
            static const char* ops[] = {"=", ">", "<", "!=", "LIKE"};
            if (kind < 5) {
                c.op = ops[kind];
                c.value = kind == 4 ? "'%a%'" : literal(c.col);
            } else {
                c.op = kind == 5 ? "IN" : "NOT IN";
                Gen inner(s_, rng_);
                inner.plan_simple(c.col.name, s_.tables[tables_[c.col.table]].name);
                c.sub = inner.text("T");
            }
            where_.push_back(c);
            if (i) or_.push_back(coin(30));
        }
        if (coin(30)) {
            order_ = true;
            order_star_ = grouped && coin(50);
            order_col_ = any_col();
            desc_ = coin(50);
            if (coin(50)) limit_ = 1 + static_cast<int>(pick(5));
        }
        if (depth == 0 && !order_ && coin(12)) {
            static const char* ops[] = {"UNION", "INTERSECT", "EXCEPT"};
            set_op_ = ops[pick(3)];
            Gen rhs(s_, rng_);
            rhs.plan_like(*this);
            set_rhs_ = rhs.text("T");
        }
    }

    // SELECT <column> FROM <its table> [WHERE ...] for IN subqueries.
    void plan_simple(const std::string& column, const std::string& table) {
        tables_ = {table_index(table)};
        select_ = {Item{"", false, false, Col{0, column}}};
        if (coin(60)) {
            Cond c;
            c.col = any_col();
            c.op = "=";
            c.value = literal(c.col);
            where_.push_back(c);
        }
    }

    // Same single-table projection shape as `left`, different filter.
    void plan_like(const Gen& left) {
        tables_ = {left.tables_[0]};
        for (const Item& it : left.select_) {
            Item copy = it;
            copy.col.table = 0;
            if (!it.star && it.col.table != 0) copy.col.name = s_.tables[tables_[0]].columns[0].name;
            select_.push_back(copy);
        }
        Cond c;
        c.col = any_col();
        c.op = "=";
        c.value = literal(c.col);
        where_.push_back(c);
    }
};

}  // namespace

std::vector<GeneratedQuery> generate_queries(const std::vector<DatabaseSchema>& schemas, std::size_t n,
                                             std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::vector<GeneratedQuery> out;
    while (out.size() < n) {
        const DatabaseSchema& s = schemas[rng() % schemas.size()];
        bool usable = !s.tables.empty();
        for (const TableDef& t : s.tables) usable = usable && !t.columns.empty();
        if (!usable) continue;
        Gen g(s, rng);
        GeneratedQuery q;
        q.db_id = s.db_id;
        q.sql = g.query(0, "T");
        q.sql_renamed = g.text("alias_");
        out.push_back(std::move(q));
    }
    return out;
}

}  // namespace t2sql::testing
