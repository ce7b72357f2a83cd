#include <algorithm>
#include <sstream>

#include "sql_internal.hpp"
#include "t2sql/errors.hpp"
#include "t2sql/sqlkit.hpp"
#include "t2sql/text.hpp"

namespace t2sql {

std::string_view to_string(Agg agg) {
    switch (agg) {
        case Agg::none: return "";
        case Agg::count: return "count";
        case Agg::sum: return "sum";
        case Agg::avg: return "avg";
        case Agg::min: return "min";
        case Agg::max: return "max";
    }
    return "";
}

std::string_view to_string(Hardness level) {
    switch (level) {
        case Hardness::easy: return "easy";
        case Hardness::medium: return "medium";
        case Hardness::hard: return "hard";
        case Hardness::extra_hard: return "extra";
    }
    return "";
}

Hardness hardness_from_string(std::string_view text) {
    const std::string t = to_lower(text);
    if (t == "easy") return Hardness::easy;
    if (t == "medium") return Hardness::medium;
    if (t == "hard") return Hardness::hard;
    if (t == "extra" || t == "extra_hard" || t == "extra-hard") return Hardness::extra_hard;
    throw Error("unknown hardness level '" + std::string(text) + "'");
}

namespace {

std::string_view cmp_text(CmpOp op) {
    switch (op) {
        case CmpOp::eq: return "=";
        case CmpOp::ne: return "!=";
        case CmpOp::lt: return "<";
        case CmpOp::gt: return ">";
        case CmpOp::le: return "<=";
        case CmpOp::ge: return ">=";
        case CmpOp::between: return "BETWEEN";
        case CmpOp::in: return "IN";
        case CmpOp::like: return "LIKE";
        case CmpOp::is: return "IS";
    }
    return "";
}

std::string_view arith_text(ArithOp op) {
    switch (op) {
        case ArithOp::add: return "+";
        case ArithOp::sub: return "-";
        case ArithOp::mul: return "*";
        case ArithOp::div: return "/";
        case ArithOp::none: return "";
    }
    return "";
}

std::string_view set_op_text(SetOp op) {
    switch (op) {
        case SetOp::union_: return "UNION";
        case SetOp::intersect: return "INTERSECT";
        case SetOp::except_: return "EXCEPT";
        case SetOp::none: return "";
    }
    return "";
}

std::string quote_string(const std::string& s) { return "'" + replace_all(s, "'", "''") + "'"; }

bool has_self_join(const Query& q) {
    for (const TableRef& t : q.from)
        if (t.occurrence > 0) return true;
    return false;
}

struct RenderScope {
    const Query* query;
    bool aliased;
    bool qualify;
};

class Renderer {
public:
    Renderer(RenderStyle style, bool mask) : style_(style), mask_(mask) {}

    std::string query(const Query& q) {
        RenderScope scope{&q, false, q.from.size() > 1};
        scope.aliased = style_ == RenderStyle::spider ? q.from.size() > 1 : has_self_join(q);
        scopes_.push_back(scope);
        std::string out = "SELECT ";
        if (q.distinct) out += "DISTINCT ";
        std::vector<std::string> items;
        for (const SelectItem& s : q.select) items.push_back(select_item(s));
        out += join(items, list_sep());
        out += " FROM " + from_clause(q);
        if (!q.where.empty()) out += " WHERE " + condition(q.where);
        if (!q.group_by.empty()) {
            std::vector<std::string> cols;
            for (const Operand& o : q.group_by) cols.push_back(operand(o));
            out += " GROUP BY " + join(cols, list_sep());
        }
        if (!q.having.empty()) out += " HAVING " + condition(q.having);
        if (!q.order_by.empty()) {
            std::vector<std::string> parts;
            for (const OrderItem& o : q.order_by) parts.push_back(val_unit(o.value) + (o.desc ? " DESC" : ""));
            out += " ORDER BY " + join(parts, list_sep());
        }
        if (q.limit) out += " LIMIT " + std::to_string(*q.limit);
        scopes_.pop_back();
        if (q.set_op != SetOp::none && q.set_rhs) {
            out += " ";
            out += set_op_text(q.set_op);
            out += " " + query(**q.set_rhs);
        }
        return out;
    }

private:
    RenderStyle style_;
    bool mask_;
    std::vector<RenderScope> scopes_;

    bool spider() const { return style_ == RenderStyle::spider; }
    std::string list_sep() const { return spider() ? " ,  " : ", "; }

    std::string table_name(const TableRef& t) const { return spider() ? t.display : t.name; }

    std::string alias_for(const RenderScope&, std::size_t index) const {
        return (spider() ? "T" : "t") + std::to_string(index + 1);
    }

    std::string from_clause(const Query& q) {
        const RenderScope& s = scopes_.back();
        std::vector<std::size_t> attach = join_attachment(q);
        std::string out;
        for (std::size_t i = 0; i < q.from.size(); ++i) {
            if (i) out += " JOIN ";
            out += table_name(q.from[i]);
            if (s.aliased) out += " AS " + alias_for(s, i);
            std::vector<std::string> conds;
            for (std::size_t c = 0; c < q.join_conds.size(); ++c)
                if (attach[c] == i) conds.push_back(predicate(q.join_conds[c]));
            if (!conds.empty()) out += " ON " + join(conds, " AND ");
        }
        return out;
    }

    std::string column(const ColumnRef& ref) const {
        const std::string col = spider() ? ref.column_display : ref.column;
        // Innermost scope that declares the table instance.
        for (auto it = scopes_.rbegin(); it != scopes_.rend(); ++it) {
            const Query& q = *it->query;
            for (std::size_t i = 0; i < q.from.size(); ++i) {
                if (q.from[i].name != ref.table || q.from[i].occurrence != ref.occurrence) continue;
                const bool outer = it != scopes_.rbegin();
                if (it->aliased) return alias_for(*it, i) + "." + col;
                if (it->qualify || outer) return table_name(q.from[i]) + "." + col;
                return col;
            }
        }
        return (spider() ? ref.table_display : ref.table) + "." + col;
    }

    std::string operand(const Operand& o) const {
        std::string inner = o.star ? "*" : column(o.column);
        if (o.agg == Agg::none) return o.distinct ? "DISTINCT " + inner : inner;
        return std::string(to_string(o.agg)) + "(" + (o.distinct ? "DISTINCT " : "") + inner + ")";
    }

    std::string val_unit(const ValUnit& v) const {
        std::string out = operand(v.lhs);
        if (v.rhs) {
            out += spider() ? "  " : " ";
            out += arith_text(v.op);
            out += spider() ? "  " : " ";
            out += operand(*v.rhs);
        }
        return out;
    }

    std::string select_item(const SelectItem& s) const {
        if (s.agg == Agg::none) return val_unit(s.value);
        return std::string(to_string(s.agg)) + "(" + val_unit(s.value) + ")";
    }

    std::string value(const Value& v) {
        if (const auto* lit = std::get_if<Literal>(&v)) {
            if (mask_ && lit->text != "NULL") return "<value>";
            return lit->is_string ? quote_string(lit->text) : lit->text;
        }
        if (const auto* op = std::get_if<Operand>(&v)) return operand(*op);
        return "(" + query(*std::get<Box<Query>>(v)) + ")";
    }

    std::string predicate(const Predicate& p) {
        std::string out = val_unit(p.lhs);
        const std::string pad = spider() ? "  " : " ";
        switch (p.op) {
            case CmpOp::between:
                out += p.negated ? " NOT BETWEEN " : " BETWEEN ";
                out += value(p.rhs) + " AND " + value(*p.rhs2);
                return out;
            case CmpOp::in:
            case CmpOp::like:
                out += p.negated ? " NOT " : " ";
                out += cmp_text(p.op);
                out += " " + value(p.rhs);
                return out;
            case CmpOp::is:
                out += p.negated ? " IS NOT " : " IS ";
                out += value(p.rhs);
                return out;
            default:
                out += pad;
                out += cmp_text(p.op);
                out += pad + value(p.rhs);
                return out;
        }
    }

    std::string condition(const Condition& c) {
        std::string out;
        for (std::size_t i = 0; i < c.preds.size(); ++i) {
            if (i) out += c.conj[i - 1] == Conj::and_ ? " AND " : " OR ";
            out += predicate(c.preds[i]);
        }
        return out;
    }
};

void collect_tables(const ValUnit& v, std::vector<std::pair<std::string, unsigned>>& out) {
    if (!v.lhs.star) out.emplace_back(v.lhs.column.table, v.lhs.column.occurrence);
    if (v.rhs && !v.rhs->star) out.emplace_back(v.rhs->column.table, v.rhs->column.occurrence);
}

}  // namespace

std::vector<std::size_t> join_attachment(const Query& query) {
    std::vector<std::size_t> result;
    for (const Predicate& p : query.join_conds) {
        std::vector<std::pair<std::string, unsigned>> tables;
        collect_tables(p.lhs, tables);
        if (const auto* op = std::get_if<Operand>(&p.rhs); op && !op->star)
            tables.emplace_back(op->column.table, op->column.occurrence);
        std::size_t needed = 1;
        for (const auto& [name, occ] : tables) {
            std::size_t idx = query.from.empty() ? 0 : query.from.size() - 1;
            for (std::size_t i = 0; i < query.from.size(); ++i) {
                if (query.from[i].name == name && query.from[i].occurrence == occ) {
                    idx = i;
                    break;
                }
            }
            needed = std::max(needed, idx);
        }
        if (!query.from.empty()) needed = std::min(needed, query.from.size() - 1);
        result.push_back(needed);
    }
    return result;
}

std::string render_sql(const Query& query, RenderStyle style) {
    Renderer r(style, false);
    return r.query(query);
}

namespace detail {

std::string render_masked(const Query& query) {
    Renderer r(RenderStyle::canonical, true);
    return r.query(query);
}

}  // namespace detail

}  // namespace t2sql
