#include <algorithm>
#include <random>
#include <set>

#include "sql_internal.hpp"
#include "t2sql/rng.hpp"
#include "t2sql/sqlkit.hpp"
#include "t2sql/text.hpp"

namespace t2sql {

std::string_view to_string(Family family) {
    switch (family) {
        case Family::select: return "SELECT";
        case Family::where: return "WHERE";
        case Family::group_by: return "GROUP BY";
        case Family::order_by: return "ORDER BY";
        case Family::keywords: return "KEYWORDS";
    }
    return "";
}

namespace {

std::string col_key(const ColumnRef& c) {
    std::string s = c.table + "." + c.column;
    if (c.occurrence) s += "@" + std::to_string(c.occurrence);
    return s;
}

std::string operand_key(const Operand& o) {
    std::string inner = o.star ? "*" : col_key(o.column);
    if (o.distinct) inner = "distinct " + inner;
    if (o.agg == Agg::none) return inner;
    return std::string(to_string(o.agg)) + "(" + inner + ")";
}

std::string val_unit_key(const ValUnit& v) {
    std::string s = operand_key(v.lhs);
    if (v.rhs) {
        static const char* ops[] = {"", "+", "-", "*", "/"};
        s += std::string(" ") + ops[static_cast<int>(v.op)] + " " + operand_key(*v.rhs);
    }
    return s;
}

std::string select_key(const SelectItem& s) {
    if (s.agg == Agg::none) return val_unit_key(s.value);
    return std::string(to_string(s.agg)) + "(" + val_unit_key(s.value) + ")";
}

std::string normalized_key(const Query& q, bool mask);

std::string value_key(const Value& v, bool mask) {
    if (const auto* lit = std::get_if<Literal>(&v)) {
        if (mask && lit->text != "NULL") return "<value>";
        return lit->is_string ? "'" + lit->text + "'" : lit->text;
    }
    if (const auto* op = std::get_if<Operand>(&v)) return operand_key(*op);
    return "(" + normalized_key(*std::get<Box<Query>>(v), mask) + ")";
}

const char* cmp_key(CmpOp op) {
    static const char* names[] = {"=", "!=", "<", ">", "<=", ">=", "between", "in", "like", "is"};
    return names[static_cast<int>(op)];
}

std::string predicate_key(const Predicate& p, bool mask) {
    std::string s = val_unit_key(p.lhs);
    if (p.negated) s += " not";
    s += std::string(" ") + cmp_key(p.op) + " " + value_key(p.rhs, mask);
    if (p.rhs2) s += " and " + value_key(*p.rhs2, mask);
    return s;
}

std::vector<std::string> sorted(std::vector<std::string> v) {
    std::sort(v.begin(), v.end());
    return v;
}

// Condition key: AND-only lists are order-insensitive; with an OR the
// connective structure is kept as written.
std::string condition_key(const Condition& c, bool mask) {
    std::vector<std::string> preds;
    for (const Predicate& p : c.preds) preds.push_back(predicate_key(p, mask));
    if (!c.has_or()) return join(sorted(preds), " and ");
    std::string s;
    for (std::size_t i = 0; i < preds.size(); ++i) {
        if (i) s += c.conj[i - 1] == Conj::and_ ? " and " : " or ";
        s += preds[i];
    }
    return s;
}

std::string normalized_key(const Query& q, bool mask) {
    std::vector<std::string> parts;
    std::vector<std::string> sel;
    for (const SelectItem& s : q.select) sel.push_back(select_key(s));
    parts.push_back(std::string("select") + (q.distinct ? " distinct " : " ") + join(sorted(sel), ", "));
    std::vector<std::string> tables;
    for (const TableRef& t : q.from) tables.push_back(t.name + (t.occurrence ? "@" + std::to_string(t.occurrence) : ""));
    parts.push_back("from " + join(sorted(tables), ", "));
    std::vector<std::string> joins;
    for (const Predicate& p : q.join_conds) {
        // a = b and b = a are the same join condition
        std::string l = val_unit_key(p.lhs);
        std::string r = value_key(p.rhs, mask);
        if (p.op == CmpOp::eq && r < l) std::swap(l, r);
        joins.push_back(l + " " + cmp_key(p.op) + " " + r);
    }
    parts.push_back("on " + join(sorted(joins), " and "));
    parts.push_back("where " + condition_key(q.where, mask));
    std::vector<std::string> groups;
    for (const Operand& o : q.group_by) groups.push_back(operand_key(o));
    parts.push_back("group " + join(sorted(groups), ", "));
    parts.push_back("having " + condition_key(q.having, mask));
    std::vector<std::string> order;
    for (const OrderItem& o : q.order_by) order.push_back(val_unit_key(o.value) + (o.desc ? " desc" : " asc"));
    parts.push_back("order " + join(order, ", "));
    parts.push_back("limit " + (q.limit ? (mask ? std::string("<value>") : std::to_string(*q.limit)) : std::string()));
    if (q.set_op != SetOp::none && q.set_rhs) {
        static const char* names[] = {"", "union", "intersect", "except"};
        parts.push_back(std::string(names[static_cast<int>(q.set_op)]) + " " + normalized_key(**q.set_rhs, mask));
    }
    return join(parts, " | ");
}

void add_keyword_columns(const ValUnit& v, std::set<std::string>& out) {
    for (const Operand* o : {&v.lhs, v.rhs ? &*v.rhs : nullptr}) {
        if (!o) continue;
        if (!o->star) out.insert(col_key(o->column));
        if (o->agg != Agg::none) out.insert(std::string(to_string(o->agg)));
        if (o->distinct) out.insert("distinct");
    }
    if (v.rhs) {
        static const char* ops[] = {"", "+", "-", "*", "/"};
        out.insert(ops[static_cast<int>(v.op)]);
    }
}

void add_condition_keywords(const Condition& c, std::set<std::string>& out) {
    for (const Predicate& p : c.preds) {
        add_keyword_columns(p.lhs, out);
        out.insert(cmp_key(p.op));
        if (p.negated) out.insert("not");
        for (const Value* v : {&p.rhs, p.rhs2 ? &*p.rhs2 : nullptr}) {
            if (!v) continue;
            if (const auto* op = std::get_if<Operand>(v)) add_keyword_columns(ValUnit{ArithOp::none, *op, {}}, out);
        }
    }
    for (Conj cj : c.conj)
        if (cj == Conj::or_) out.insert("or");
}

void append_components(const Query& q, bool mask, const std::string& prefix, ComponentMap& out) {
    for (const SelectItem& s : q.select) out[Family::select].push_back(prefix + select_key(s));
    for (const Predicate& p : q.where.preds) out[Family::where].push_back(prefix + predicate_key(p, mask));
    for (const Operand& o : q.group_by) out[Family::group_by].push_back(prefix + operand_key(o));
    for (const Predicate& p : q.having.preds)
        out[Family::group_by].push_back(prefix + "having " + predicate_key(p, mask));
    for (const OrderItem& o : q.order_by)
        out[Family::order_by].push_back(prefix + val_unit_key(o.value) + (o.desc ? " desc" : " asc"));
    if (q.limit) out[Family::order_by].push_back(prefix + "limit");

    std::set<std::string> kw;
    if (!q.where.empty()) kw.insert("where");
    if (!q.group_by.empty()) kw.insert("group");
    if (!q.having.empty()) kw.insert("having");
    if (!q.order_by.empty()) kw.insert("order");
    if (q.limit) kw.insert("limit");
    if (q.distinct) kw.insert("distinct");
    for (const SelectItem& s : q.select) {
        add_keyword_columns(s.value, kw);
        if (s.agg != Agg::none) kw.insert(std::string(to_string(s.agg)));
    }
    add_condition_keywords(q.where, kw);
    add_condition_keywords(q.having, kw);
    for (const Operand& o : q.group_by) add_keyword_columns(ValUnit{ArithOp::none, o, {}}, kw);
    for (const OrderItem& o : q.order_by) {
        add_keyword_columns(o.value, kw);
        if (o.desc) kw.insert("desc");
    }
    if (q.set_op != SetOp::none) {
        static const char* names[] = {"", "union", "intersect", "except"};
        kw.insert(names[static_cast<int>(q.set_op)]);
    }
    for (const std::string& k : kw) out[Family::keywords].push_back(prefix + k);

    if (q.set_op != SetOp::none && q.set_rhs) {
        static const char* names[] = {"", "union:", "intersect:", "except:"};
        append_components(**q.set_rhs, mask, prefix + names[static_cast<int>(q.set_op)], out);
    }
}

}  // namespace

ComponentMap extract_components(const Query& query, const ComponentOptions& options) {
    ComponentMap out;
    for (Family f : kAllFamilies) out[f];
    append_components(query, options.mask_values, "", out);
    for (Family f : {Family::select, Family::where, Family::group_by, Family::keywords}) {
        auto& v = out[f];
        std::sort(v.begin(), v.end());
    }
    return out;
}

std::map<Family, bool> compare_components(const Query& pred, const Query& gold, const MatchOptions& options) {
    ComponentOptions co;
    co.mask_values = options.mask_values;
    const ComponentMap p = extract_components(pred, co);
    const ComponentMap g = extract_components(gold, co);
    std::map<Family, bool> out;
    for (Family f : kAllFamilies) out[f] = p.at(f) == g.at(f);
    return out;
}

bool exact_match(const Query& pred, const Query& gold, const MatchOptions& options) {
    return normalized_key(pred, options.mask_values) == normalized_key(gold, options.mask_values);
}

// ---- helpers ----

std::vector<std::string> tables_of(const Query& query) {
    std::vector<std::string> out;
    for (const TableRef& t : query.from)
        if (std::find(out.begin(), out.end(), t.name) == out.end()) out.push_back(t.name);
    return out;
}

namespace {

void direct_nested(const Query& q, std::vector<const Query*>& out) {
    for (const Condition* c : {&q.where, &q.having}) {
        for (const Predicate& p : c->preds) {
            for (const Value* v : {&p.rhs, p.rhs2 ? &*p.rhs2 : nullptr}) {
                if (!v) continue;
                if (const auto* sub = std::get_if<Box<Query>>(v)) out.push_back(&**sub);
            }
        }
    }
    if (q.set_op != SetOp::none && q.set_rhs) out.push_back(&**q.set_rhs);
}

}  // namespace

std::vector<const Query*> nested_queries(const Query& query) {
    std::vector<const Query*> out;
    std::vector<const Query*> frontier;
    direct_nested(query, frontier);
    // Depth-first in traversal order.
    std::vector<const Query*> stack(frontier.rbegin(), frontier.rend());
    while (!stack.empty()) {
        const Query* q = stack.back();
        stack.pop_back();
        out.push_back(q);
        std::vector<const Query*> kids;
        direct_nested(*q, kids);
        for (auto it = kids.rbegin(); it != kids.rend(); ++it) stack.push_back(*it);
    }
    return out;
}

// ---- pairs ----

namespace {

struct ScopeVisit {
    const Query* query;
    std::string key;
};

// Scopes in traversal order: the query itself, then its nested queries.
void scopes_in_order(const Query& q, const std::string& key, std::vector<ScopeVisit>& out) {
    out.push_back({&q, key});
    std::vector<const Query*> kids;
    direct_nested(q, kids);
    for (const Query* k : kids) scopes_in_order(*k, render_sql(*k), out);
}

bool scope_has_star(const Query& q) {
    for (const SelectItem& s : q.select)
        if (s.value.lhs.star || (s.value.rhs && s.value.rhs->star)) return true;
    for (const Predicate& p : q.having.preds)
        if (p.lhs.lhs.star) return true;
    for (const Predicate& p : q.where.preds)
        if (p.lhs.lhs.star) return true;
    for (const OrderItem& o : q.order_by)
        if (o.value.lhs.star || (o.value.rhs && o.value.rhs->star)) return true;
    return false;
}

class PairCollector {
public:
    explicit PairCollector(const StarPicks& picks) : picks_(picks) {}

    void scope(const Query& q, const std::string& key) {
        key_ = key;
        for (const SelectItem& s : q.select) val_unit(s.value, false);
        condition(q.where);
        for (const Operand& o : q.group_by) operand(o, false);
        condition(q.having);
        for (const OrderItem& o : q.order_by) val_unit(o.value, false);
        for (auto it = q.join_conds.rbegin(); it != q.join_conds.rend(); ++it) predicate(*it, true);
        std::vector<const Query*> kids;
        direct_nested(q, kids);
        for (const Query* k : kids) scope(*k, render_sql(*k));
    }

    std::vector<PairOccurrence> result;

private:
    const StarPicks& picks_;
    std::string key_;

    void add(const ColumnRef& ref, bool join, bool star) {
        for (const PairOccurrence& p : result)
            if (same_pair(p.ref, ref)) return;
        result.push_back({ref, join, star});
    }

    void operand(const Operand& o, bool join) {
        if (o.star) {
            auto it = picks_.by_scope.find(key_);
            if (it != picks_.by_scope.end()) add(it->second, join, true);
            return;
        }
        add(o.column, join, false);
    }

    void val_unit(const ValUnit& v, bool join) {
        operand(v.lhs, join);
        if (v.rhs) operand(*v.rhs, join);
    }

    void predicate(const Predicate& p, bool join) {
        val_unit(p.lhs, join);
        for (const Value* v : {&p.rhs, p.rhs2 ? &*p.rhs2 : nullptr}) {
            if (!v) continue;
            if (const auto* op = std::get_if<Operand>(v)) operand(*op, join);
        }
    }

    void condition(const Condition& c) {
        for (const Predicate& p : c.preds) predicate(p, false);
    }
};

}  // namespace

StarPicks pick_stars(const Query& query, const DatabaseSchema& schema, std::uint64_t seed) {
    StarPicks picks;
    std::mt19937_64 rng(seed);
    std::vector<ScopeVisit> scopes;
    scopes_in_order(query, "", scopes);
    for (const ScopeVisit& s : scopes) {
        if (!scope_has_star(*s.query) || picks.by_scope.count(s.key)) continue;
        std::vector<ColumnRef> candidates;
        for (const TableRef& t : s.query->from) {
            if (t.occurrence > 0) continue;
            const TableDef* def = schema.find_table(t.name);
            if (!def) continue;
            for (const ColumnDef& c : def->columns) candidates.push_back(ColumnRef::make(t.display, c.name));
        }
        if (candidates.empty()) continue;
        picks.by_scope[s.key] = candidates[uniform_index(rng, candidates.size())];
    }
    return picks;
}

std::vector<PairOccurrence> collect_pairs(const Query& query, const StarPicks& picks) {
    PairCollector c(picks);
    c.scope(query, "");
    return std::move(c.result);
}

std::vector<ColumnRef> extract_table_column_pairs(const Query& query, const DatabaseSchema& schema,
                                                  std::uint64_t rng_seed) {
    std::vector<ColumnRef> out;
    for (PairOccurrence& p : collect_pairs(query, pick_stars(query, schema, rng_seed))) out.push_back(std::move(p.ref));
    return out;
}

// ---- hardness ----
// Mirrors the Spider evaluation script, including how it counts aggregates
// (negated WHERE conditions and HAVING connectors are counted there too).

namespace {

int count_component1(const Query& q) {
    int count = 0;
    if (!q.where.empty()) ++count;
    if (!q.group_by.empty()) ++count;
    if (!q.order_by.empty()) ++count;
    if (q.limit) ++count;
    if (!q.from.empty()) count += static_cast<int>(q.from.size()) - 1;
    for (const Condition* c : {&q.where, &q.having}) {
        for (Conj cj : c->conj)
            if (cj == Conj::or_) ++count;
        for (const Predicate& p : c->preds)
            if (p.op == CmpOp::like) ++count;
    }
    for (const Predicate& p : q.join_conds)
        if (p.op == CmpOp::like) ++count;
    return count;
}

int count_component2(const Query& q) {
    int count = 0;
    for (const Condition* c : {&q.where, &q.having}) {
        for (const Predicate& p : c->preds) {
            if (std::holds_alternative<Box<Query>>(p.rhs)) ++count;
            if (p.rhs2 && std::holds_alternative<Box<Query>>(*p.rhs2)) ++count;
        }
    }
    if (q.set_op != SetOp::none) ++count;
    return count;
}

int count_others(const Query& q) {
    int agg = 0;
    for (const SelectItem& s : q.select)
        if (s.agg != Agg::none) ++agg;
    for (const Predicate& p : q.where.preds)
        if (p.negated) ++agg;
    for (const Operand& o : q.group_by)
        if (o.agg != Agg::none) ++agg;
    for (const OrderItem& o : q.order_by) {
        if (o.value.lhs.agg != Agg::none) ++agg;
        if (o.value.rhs && o.value.rhs->agg != Agg::none) ++agg;
    }
    for (const Predicate& p : q.having.preds)
        if (p.negated) ++agg;
    agg += static_cast<int>(q.having.conj.size());

    int count = 0;
    if (agg > 1) ++count;
    if (q.select.size() > 1) ++count;
    if (q.where.preds.size() > 1) ++count;
    if (q.group_by.size() > 1) ++count;
    return count;
}

}  // namespace

HardnessCounts hardness_counts(const Query& query) {
    return {count_component1(query), count_component2(query), count_others(query)};
}

Hardness classify_hardness(const Query& query) {
    const HardnessCounts h = hardness_counts(query);
    const int c1 = h.component1, c2 = h.component2, others = h.others;
    if (c1 <= 1 && others == 0 && c2 == 0) return Hardness::easy;
    if ((others <= 2 && c1 <= 1 && c2 == 0) || (c1 <= 2 && others < 2 && c2 == 0)) return Hardness::medium;
    if ((others > 2 && c1 <= 2 && c2 == 0) || (c1 > 2 && c1 <= 3 && others <= 2 && c2 == 0) ||
        (c1 <= 1 && others == 0 && c2 <= 1))
        return Hardness::hard;
    return Hardness::extra_hard;
}

}  // namespace t2sql
