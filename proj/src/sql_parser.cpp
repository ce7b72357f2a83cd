#include <algorithm>
#include <cctype>
#include <set>

#include "t2sql/errors.hpp"
#include "t2sql/sqlkit.hpp"
#include "t2sql/text.hpp"

namespace t2sql {

namespace {

enum class Tok { ident, number, string, symbol, end };

struct Token {
    Tok kind = Tok::end;
    std::string text;  // identifiers keep their spelling; strings are unquoted
    std::size_t pos = 0;
};

std::vector<Token> tokenize(std::string_view sql) {
    std::vector<Token> out;
    std::size_t i = 0;
    const std::size_t n = sql.size();
    auto is_ident_char = [](char c) {
        return std::isalnum(static_cast<unsigned char>(c)) || c == '_';
    };
    while (i < n) {
        const char c = sql[i];
        if (std::isspace(static_cast<unsigned char>(c))) {
            ++i;
            continue;
        }
        Token t;
        t.pos = i;
        if (c == '\'' || c == '"') {
            std::string value;
            std::size_t j = i + 1;
            bool closed = false;
            while (j < n) {
                if (sql[j] == c) {
                    if (j + 1 < n && sql[j + 1] == c) {
                        value += c;
                        j += 2;
                        continue;
                    }
                    closed = true;
                    break;
                }
                value += sql[j++];
            }
            if (!closed) throw SqlSyntaxError("unterminated string literal", i);
            t.kind = Tok::string;
            t.text = std::move(value);
            i = j + 1;
        } else if (c == '`' || c == '[') {
            const char close = c == '`' ? '`' : ']';
            std::size_t j = sql.find(close, i + 1);
            if (j == std::string_view::npos) throw SqlSyntaxError("unterminated quoted identifier", i);
            t.kind = Tok::ident;
            t.text = std::string(sql.substr(i + 1, j - i - 1));
            i = j + 1;
        } else if (std::isdigit(static_cast<unsigned char>(c)) ||
                   (c == '.' && i + 1 < n && std::isdigit(static_cast<unsigned char>(sql[i + 1])))) {
            std::size_t j = i;
            while (j < n && std::isdigit(static_cast<unsigned char>(sql[j]))) ++j;
            if (j < n && sql[j] == '.') {
                ++j;
                while (j < n && std::isdigit(static_cast<unsigned char>(sql[j]))) ++j;
            }
            if (j < n && (sql[j] == 'e' || sql[j] == 'E')) {
                std::size_t k = j + 1;
                if (k < n && (sql[k] == '+' || sql[k] == '-')) ++k;
                if (k < n && std::isdigit(static_cast<unsigned char>(sql[k]))) {
                    j = k;
                    while (j < n && std::isdigit(static_cast<unsigned char>(sql[j]))) ++j;
                }
            }
            if (j < n && is_ident_char(sql[j])) {
                // identifiers such as 2nd_col are not valid here
                throw SqlSyntaxError("malformed number", i);
            }
            t.kind = Tok::number;
            t.text = std::string(sql.substr(i, j - i));
            i = j;
        } else if (is_ident_char(c)) {
            std::size_t j = i;
            while (j < n && is_ident_char(sql[j])) ++j;
            t.kind = Tok::ident;
            t.text = std::string(sql.substr(i, j - i));
            i = j;
        } else {
            static const char* two[] = {"!=", "<>", "<=", ">=", "=="};
            std::string sym(1, c);
            for (const char* s : two) {
                if (sql.substr(i, 2) == s) {
                    sym = s;
                    break;
                }
            }
            static const std::string singles = "(),.*+-/=<>;%";
            if (sym.size() == 1 && singles.find(c) == std::string::npos)
                throw SqlSyntaxError(std::string("unexpected character '") + c + "'", i);
            t.kind = Tok::symbol;
            t.text = sym;
            i += sym.size();
        }
        out.push_back(std::move(t));
    }
    Token end;
    end.kind = Tok::end;
    end.pos = n;
    out.push_back(end);
    return out;
}

const std::set<std::string>& reserved_words() {
    static const std::set<std::string> words = {
        "select", "from",  "where",  "group",   "by",     "having", "order", "limit",
        "union",  "intersect", "except", "join", "on",    "as",     "and",   "or",
        "not",    "in",    "like",   "between", "is",     "null",   "asc",   "desc",
        "distinct", "inner", "left",  "right",  "outer",  "cross",  "natural", "exists",
        "case",   "when",  "then",   "else",    "end",    "all",    "offset", "using",
        "glob",   "cast",  "with"};
    return words;
}

struct ScopeEntry {
    TableRef table;
    std::string alias;  // lowercase, empty when none
    const TableDef* def = nullptr;
};

struct Scope {
    const Scope* parent = nullptr;
    std::vector<ScopeEntry> entries;
};

class Parser {
public:
    Parser(std::string_view text, const DatabaseSchema& schema)
        : tokens_(tokenize(text)), schema_(schema) {}

    Query parse_statement() {
        Query q = parse_query(nullptr);
        if (peek_symbol(";")) ++pos_;
        if (cur().kind != Tok::end) fail("unexpected trailing input '" + cur().text + "'");
        return q;
    }

private:
    std::vector<Token> tokens_;
    const DatabaseSchema& schema_;
    std::size_t pos_ = 0;

    const Token& cur() const { return tokens_[pos_]; }
    const Token& at(std::size_t i) const { return tokens_[std::min(i, tokens_.size() - 1)]; }

    [[noreturn]] void fail(const std::string& what) const { throw SqlSyntaxError(what, cur().pos); }

    bool is_kw(const Token& t, std::string_view kw) const {
        return t.kind == Tok::ident && iequals(t.text, kw);
    }
    bool peek_kw(std::string_view kw) const { return is_kw(cur(), kw); }
    bool peek_kw_at(std::size_t offset, std::string_view kw) const { return is_kw(at(pos_ + offset), kw); }
    bool accept_kw(std::string_view kw) {
        if (!peek_kw(kw)) return false;
        ++pos_;
        return true;
    }
    void expect_kw(std::string_view kw) {
        if (!accept_kw(kw)) fail("expected " + to_upper(kw));
    }
    bool peek_symbol(std::string_view s) const { return cur().kind == Tok::symbol && cur().text == s; }
    bool accept_symbol(std::string_view s) {
        if (!peek_symbol(s)) return false;
        ++pos_;
        return true;
    }
    void expect_symbol(std::string_view s) {
        if (!accept_symbol(s)) fail("expected '" + std::string(s) + "'");
    }

    static bool is_reserved(const Token& t) {
        return t.kind == Tok::ident && reserved_words().count(to_lower(t.text)) > 0;
    }

    static std::optional<Agg> agg_of(const Token& t) {
        if (t.kind != Tok::ident) return std::nullopt;
        const std::string w = to_lower(t.text);
        if (w == "count") return Agg::count;
        if (w == "sum") return Agg::sum;
        if (w == "avg") return Agg::avg;
        if (w == "min") return Agg::min;
        if (w == "max") return Agg::max;
        return std::nullopt;
    }

    // ---- query ----

    Query parse_query(const Scope* parent) {
        Query q;
        expect_kw("select");
        const std::size_t select_start = pos_;
        const std::size_t from_pos = find_from(select_start);
        pos_ = from_pos;
        Scope scope;
        scope.parent = parent;
        parse_from(q, scope);
        const std::size_t after_from = pos_;

        pos_ = select_start;
        if (accept_kw("distinct")) q.distinct = true;
        if (peek_kw("all")) fail("SELECT ALL is not supported");
        do {
            q.select.push_back(parse_select_item(scope));
        } while (accept_symbol(","));
        if (pos_ != from_pos) fail("unexpected token in SELECT list");
        pos_ = after_from;

        if (accept_kw("where")) q.where = parse_condition(scope);
        if (peek_kw("group")) {
            ++pos_;
            expect_kw("by");
            do {
                Operand op = parse_operand(scope);
                if (op.agg != Agg::none || op.star) fail("GROUP BY expects a column");
                q.group_by.push_back(op);
            } while (accept_symbol(","));
        }
        if (accept_kw("having")) q.having = parse_condition(scope);
        if (peek_kw("order")) {
            ++pos_;
            expect_kw("by");
            do {
                OrderItem item;
                item.value = parse_val_unit(scope);
                if (accept_kw("desc")) {
                    item.desc = true;
                } else {
                    accept_kw("asc");
                }
                q.order_by.push_back(std::move(item));
            } while (accept_symbol(","));
        }
        if (accept_kw("limit")) {
            if (cur().kind != Tok::number || cur().text.find_first_not_of("0123456789") != std::string::npos)
                fail("LIMIT expects an integer");
            q.limit = std::stoll(cur().text);
            ++pos_;
            if (peek_kw("offset") || peek_symbol(",")) throw DialectError("LIMIT with OFFSET");
        }
        if (peek_kw("union") || peek_kw("intersect") || peek_kw("except")) {
            const std::string w = to_lower(cur().text);
            ++pos_;
            if (peek_kw("all")) throw DialectError(to_upper(w) + " ALL");
            q.set_op = w == "union" ? SetOp::union_ : w == "intersect" ? SetOp::intersect : SetOp::except_;
            q.set_rhs = Box<Query>(parse_query(parent));
        }
        return q;
    }

    std::size_t find_from(std::size_t start) const {
        int depth = 0;
        for (std::size_t i = start; i < tokens_.size(); ++i) {
            const Token& t = tokens_[i];
            if (t.kind == Tok::end) break;
            if (t.kind == Tok::symbol && t.text == "(") ++depth;
            if (t.kind == Tok::symbol && t.text == ")") {
                if (depth == 0) break;
                --depth;
            }
            if (depth == 0 && is_kw(t, "from")) return i;
            if (depth == 0 && (is_kw(t, "union") || is_kw(t, "intersect") || is_kw(t, "except"))) break;
        }
        throw DialectError("SELECT without FROM");
    }

    // ---- FROM ----

    void parse_from(Query& q, Scope& scope) {
        expect_kw("from");
        add_table(q, scope);
        while (true) {
            if (accept_symbol(",")) {
                add_table(q, scope);
                continue;
            }
            if (peek_kw("left") || peek_kw("right") || peek_kw("outer") || peek_kw("natural") ||
                peek_kw("cross") || peek_kw("full"))
                throw DialectError(to_upper(cur().text) + " JOIN");
            if (peek_kw("inner") && peek_kw_at(1, "join")) ++pos_;
            if (!accept_kw("join")) break;
            add_table(q, scope);
            if (accept_kw("using")) throw DialectError("JOIN USING");
            if (accept_kw("on")) {
                while (true) {
                    Predicate p = parse_predicate(scope);
                    q.join_conds.push_back(std::move(p));
                    if (peek_kw("and")) {
                        ++pos_;
                        continue;
                    }
                    if (peek_kw("or")) throw DialectError("OR in JOIN condition");
                    break;
                }
            }
        }
        // Conditions are kept grouped by the JOIN they attach to so that
        // rendering and reparsing agree.
        std::vector<std::size_t> attach = join_attachment(q);
        std::vector<std::size_t> order(q.join_conds.size());
        for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
        std::stable_sort(order.begin(), order.end(),
                         [&](std::size_t a, std::size_t b) { return attach[a] < attach[b]; });
        std::vector<Predicate> sorted;
        for (std::size_t i : order) sorted.push_back(q.join_conds[i]);
        q.join_conds = std::move(sorted);
    }

    void add_table(Query& q, Scope& scope) {
        if (peek_symbol("(")) throw DialectError("subquery in FROM");
        if (cur().kind != Tok::ident || is_reserved(cur())) fail("expected table name");
        const Token name = cur();
        ++pos_;
        const TableDef* def = schema_.find_table(name.text);
        if (!def) throw ResolutionError(name.text);
        std::string alias;
        if (accept_kw("as")) {
            if (cur().kind != Tok::ident || is_reserved(cur())) fail("expected alias");
            alias = to_lower(cur().text);
            ++pos_;
        } else if (cur().kind == Tok::ident && !is_reserved(cur())) {
            alias = to_lower(cur().text);
            ++pos_;
        }
        TableRef ref;
        ref.name = to_lower(def->name);
        ref.display = name.text;
        for (const ScopeEntry& e : scope.entries) {
            if (e.table.name == ref.name) ++ref.occurrence;
            if (!alias.empty() && e.alias == alias) fail("duplicate alias " + alias);
        }
        if (ref.occurrence > 0 && alias.empty()) {
            // The earlier instance must be aliased for the second to be addressable.
            bool earlier_aliased = true;
            for (const ScopeEntry& e : scope.entries)
                if (e.table.name == ref.name && e.alias.empty()) earlier_aliased = false;
            if (!earlier_aliased) throw ResolutionError(name.text);
        }
        q.from.push_back(ref);
        scope.entries.push_back(ScopeEntry{ref, alias, def});
    }

    // ---- expressions ----

    SelectItem parse_select_item(const Scope& scope) {
        SelectItem item;
        item.value = parse_val_unit(scope);
        if (!item.value.rhs && item.value.lhs.agg != Agg::none) {
            item.agg = item.value.lhs.agg;
            item.value.lhs.agg = Agg::none;
        }
        if (peek_kw("as") || (cur().kind == Tok::ident && !is_reserved(cur())))
            throw DialectError("column alias");
        return item;
    }

    ValUnit parse_val_unit(const Scope& scope) {
        ValUnit v;
        v.lhs = parse_operand(scope);
        if (cur().kind == Tok::symbol) {
            const std::string& s = cur().text;
            ArithOp op = ArithOp::none;
            if (s == "+") op = ArithOp::add;
            else if (s == "-") op = ArithOp::sub;
            else if (s == "*") op = ArithOp::mul;
            else if (s == "/") op = ArithOp::div;
            if (op != ArithOp::none) {
                ++pos_;
                v.op = op;
                v.rhs = parse_operand(scope);
                if (cur().kind == Tok::symbol &&
                    (cur().text == "+" || cur().text == "-" || cur().text == "*" || cur().text == "/"))
                    throw DialectError("arithmetic with more than two operands");
            }
        }
        return v;
    }

    Operand parse_operand(const Scope& scope) {
        Operand op;
        if (auto agg = agg_of(cur()); agg && at(pos_ + 1).kind == Tok::symbol && at(pos_ + 1).text == "(") {
            op.agg = *agg;
            pos_ += 2;
            if (accept_kw("distinct")) op.distinct = true;
            if (accept_symbol("*")) {
                if (op.agg != Agg::count) fail("'*' is only valid inside count()");
                op.star = true;
            } else {
                op.column = parse_column(scope);
                if (peek_symbol("+") || peek_symbol("-") || peek_symbol("*") || peek_symbol("/"))
                    throw DialectError("arithmetic inside an aggregate");
            }
            expect_symbol(")");
            return op;
        }
        if (accept_symbol("(")) {
            // A parenthesised plain column is tolerated.
            Operand inner = parse_operand(scope);
            expect_symbol(")");
            return inner;
        }
        if (accept_symbol("*")) {
            op.star = true;
            return op;
        }
        op.column = parse_column(scope);
        return op;
    }

    ColumnRef parse_column(const Scope& scope) {
        if (cur().kind != Tok::ident) {
            if (cur().kind == Tok::number || cur().kind == Tok::string) throw DialectError("literal outside a condition");
            fail("expected column");
        }
        if (is_reserved(cur())) fail("unexpected keyword " + to_upper(cur().text));
        std::string first = cur().text;
        ++pos_;
        if (peek_symbol("(")) throw DialectError("function " + first + "()");
        if (accept_symbol(".")) {
            if (accept_symbol("*")) throw DialectError("qualified star");
            if (cur().kind != Tok::ident) fail("expected column name");
            std::string second = cur().text;
            ++pos_;
            return resolve_qualified(scope, first, second);
        }
        return resolve_bare(scope, first);
    }

    ColumnRef make_ref(const ScopeEntry& e, const ColumnDef& col, const std::string& written) {
        ColumnRef ref;
        ref.table = e.table.name;
        ref.column = to_lower(col.name);
        ref.table_display = e.table.display;
        ref.column_display = written;
        ref.occurrence = e.table.occurrence;
        return ref;
    }

    ColumnRef resolve_qualified(const Scope& scope, const std::string& qualifier, const std::string& column) {
        const std::string q = to_lower(qualifier);
        for (const Scope* s = &scope; s; s = s->parent) {
            const ScopeEntry* match = nullptr;
            for (const ScopeEntry& e : s->entries) {
                const bool hit = !e.alias.empty() ? e.alias == q : e.table.name == q;
                if (hit) {
                    match = &e;
                    break;
                }
            }
            if (!match) {
                // Table name used despite an alias, as SQLite tolerates for
                // unambiguous single-instance tables.
                int count = 0;
                for (const ScopeEntry& e : s->entries) {
                    if (e.table.name == q) {
                        match = &e;
                        ++count;
                    }
                }
                if (count > 1) throw ResolutionError(qualifier + "." + column);
            }
            if (match) {
                const ColumnDef* col = match->def->find_column(column);
                if (!col) throw ResolutionError(qualifier + "." + column);
                return make_ref(*match, *col, column);
            }
        }
        throw ResolutionError(qualifier + "." + column);
    }

    ColumnRef resolve_bare(const Scope& scope, const std::string& column) {
        for (const Scope* s = &scope; s; s = s->parent) {
            const ScopeEntry* match = nullptr;
            const ColumnDef* match_col = nullptr;
            for (const ScopeEntry& e : s->entries) {
                const ColumnDef* col = e.def->find_column(column);
                if (!col) continue;
                if (match) throw ResolutionError(column);
                match = &e;
                match_col = col;
            }
            if (match) return make_ref(*match, *match_col, column);
        }
        throw ResolutionError(column);
    }

    // ---- conditions ----

    Condition parse_condition(const Scope& scope) {
        Condition c;
        c.preds.push_back(parse_predicate(scope));
        while (true) {
            if (peek_kw("and")) {
                ++pos_;
                c.conj.push_back(Conj::and_);
            } else if (peek_kw("or")) {
                ++pos_;
                c.conj.push_back(Conj::or_);
            } else {
                break;
            }
            c.preds.push_back(parse_predicate(scope));
        }
        return c;
    }

    Predicate parse_predicate(const Scope& scope) {
        if (peek_kw("not")) throw DialectError("prefix NOT");
        if (peek_kw("exists")) throw DialectError("EXISTS");
        if (peek_symbol("(") && !is_kw(at(pos_ + 1), "select")) {
            // "(a = 1 OR b = 2)" grouping is outside the dialect; "(t.c)" is a column.
            const bool bare = at(pos_ + 1).kind == Tok::ident && at(pos_ + 2).kind == Tok::symbol &&
                              at(pos_ + 2).text == ")";
            const bool qualified = at(pos_ + 1).kind == Tok::ident && at(pos_ + 2).text == "." &&
                                   at(pos_ + 3).kind == Tok::ident && at(pos_ + 4).text == ")";
            if (!bare && !qualified) throw DialectError("parenthesised condition");
        }
        Predicate p;
        p.lhs = parse_val_unit(scope);
        if (accept_kw("not")) p.negated = true;
        if (cur().kind == Tok::symbol) {
            const std::string s = cur().text;
            if (s == "=" || s == "==") p.op = CmpOp::eq;
            else if (s == "!=" || s == "<>") p.op = CmpOp::ne;
            else if (s == "<") p.op = CmpOp::lt;
            else if (s == ">") p.op = CmpOp::gt;
            else if (s == "<=") p.op = CmpOp::le;
            else if (s == ">=") p.op = CmpOp::ge;
            else fail("expected comparison operator");
            if (p.negated) fail("NOT before a comparison operator");
            ++pos_;
            p.rhs = parse_value(scope);
            return p;
        }
        if (accept_kw("between")) {
            p.op = CmpOp::between;
            p.rhs = parse_value(scope);
            expect_kw("and");
            p.rhs2 = parse_value(scope);
            return p;
        }
        if (accept_kw("in")) {
            p.op = CmpOp::in;
            if (!peek_symbol("(") || !is_kw(at(pos_ + 1), "select")) throw DialectError("IN with a value list");
            p.rhs = parse_value(scope);
            return p;
        }
        if (accept_kw("like")) {
            p.op = CmpOp::like;
            p.rhs = parse_value(scope);
            return p;
        }
        if (accept_kw("is")) {
            if (p.negated) fail("NOT before IS");
            p.op = CmpOp::is;
            if (accept_kw("not")) p.negated = true;
            if (!accept_kw("null")) throw DialectError("IS with a non-NULL operand");
            p.rhs = Literal{"NULL", false};
            return p;
        }
        if (peek_kw("glob") || peek_kw("regexp") || peek_kw("match")) throw DialectError(to_upper(cur().text));
        fail("expected comparison operator");
    }

    Value parse_value(const Scope& scope) {
        if (peek_symbol("(") && is_kw(at(pos_ + 1), "select")) {
            ++pos_;
            Query sub = parse_query(&scope);
            expect_symbol(")");
            return Box<Query>(std::move(sub));
        }
        if (cur().kind == Tok::string) {
            Literal lit{cur().text, true};
            ++pos_;
            return lit;
        }
        if (cur().kind == Tok::number) {
            Literal lit{cur().text, false};
            ++pos_;
            return lit;
        }
        if (peek_symbol("-") && at(pos_ + 1).kind == Tok::number) {
            Literal lit{"-" + at(pos_ + 1).text, false};
            pos_ += 2;
            return lit;
        }
        if (peek_kw("null")) {
            ++pos_;
            return Literal{"NULL", false};
        }
        ValUnit v = parse_val_unit(scope);
        if (v.rhs) throw DialectError("arithmetic on the right of a comparison");
        return v.lhs;
    }
};

}  // namespace

bool Condition::has_or() const {
    for (Conj c : conj)
        if (c == Conj::or_) return true;
    return false;
}

Query parse_sql(std::string_view text, const DatabaseSchema& schema) {
    Parser parser(text, schema);
    return parser.parse_statement();
}

}  // namespace t2sql
