#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "t2sql/box.hpp"
#include "t2sql/column_ref.hpp"
#include "t2sql/dataset.hpp"

namespace t2sql {

enum class Agg { none, count, sum, avg, min, max };
enum class ArithOp { none, add, sub, mul, div };
enum class CmpOp { eq, ne, lt, gt, le, ge, between, in, like, is };
enum class Conj { and_, or_ };
enum class SetOp { none, union_, intersect, except_ };
enum class Hardness { easy, medium, hard, extra_hard };

std::string_view to_string(Agg agg);
std::string_view to_string(Hardness level);
Hardness hardness_from_string(std::string_view text);

// A column reference, possibly aggregated: count(*), max(t.c), t.c.
struct Operand {
    Agg agg = Agg::none;
    bool distinct = false;
    bool star = false;
    ColumnRef column;  // unset when star

    friend bool operator==(const Operand&, const Operand&) = default;
};

struct ValUnit {
    ArithOp op = ArithOp::none;
    Operand lhs;
    std::optional<Operand> rhs;

    friend bool operator==(const ValUnit&, const ValUnit&) = default;
};

// `agg` wraps the whole value; for count(*) the aggregate sits here and the
// operand is a bare star.
struct SelectItem {
    Agg agg = Agg::none;
    ValUnit value;

    friend bool operator==(const SelectItem&, const SelectItem&) = default;
};

struct Query;

struct Literal {
    std::string text;  // numbers as written, strings unquoted, NULL as "NULL"
    bool is_string = false;

    friend bool operator==(const Literal&, const Literal&) = default;
};

using Value = std::variant<Literal, Operand, Box<Query>>;

struct Predicate {
    bool negated = false;
    CmpOp op = CmpOp::eq;
    ValUnit lhs;
    Value rhs;
    std::optional<Value> rhs2;  // upper bound of BETWEEN

    friend bool operator==(const Predicate&, const Predicate&) = default;
};

// Flat condition list with left-to-right connectors, as SQL writes it.
// conj.size() == preds.size() - 1 when non-empty.
struct Condition {
    std::vector<Predicate> preds;
    std::vector<Conj> conj;

    bool empty() const { return preds.empty(); }
    bool has_or() const;

    friend bool operator==(const Condition&, const Condition&) = default;
};

struct TableRef {
    std::string name;     // lowercase
    std::string display;  // as written in the FROM clause
    unsigned occurrence = 0;

    friend bool operator==(const TableRef& a, const TableRef& b) {
        return a.name == b.name && a.occurrence == b.occurrence;
    }
};

struct OrderItem {
    ValUnit value;
    bool desc = false;

    friend bool operator==(const OrderItem&, const OrderItem&) = default;
};

struct Query {
    bool distinct = false;
    std::vector<SelectItem> select;
    std::vector<TableRef> from;
    std::vector<Predicate> join_conds;
    Condition where;
    std::vector<Operand> group_by;
    Condition having;
    std::vector<OrderItem> order_by;
    std::optional<std::int64_t> limit;
    SetOp set_op = SetOp::none;
    std::optional<Box<Query>> set_rhs;

    friend bool operator==(const Query&, const Query&) = default;
};

using SqlAst = Query;

// Parses one statement of the supported dialect and resolves every column
// against `schema`. Table aliases are eliminated.
Query parse_sql(std::string_view text, const DatabaseSchema& schema);

enum class RenderStyle {
    canonical,  // uppercase keywords, lowercase identifiers, single spaces
    spider,     // T1..Tn aliases, "a ,  b", "x  =  y", identifiers as written
};

std::string render_sql(const Query& query, RenderStyle style = RenderStyle::canonical);

// For each join condition, the index of the FROM entry whose JOIN it belongs
// to (the first entry at which all of its tables are in scope, at least 1).
std::vector<std::size_t> join_attachment(const Query& query);

// ---- clause families ----

enum class Family { select, where, group_by, order_by, keywords };

inline constexpr Family kAllFamilies[] = {Family::select, Family::where, Family::group_by,
                                          Family::order_by, Family::keywords};

std::string_view to_string(Family family);

struct ComponentOptions {
    bool mask_values = true;
};

// Each family is a canonical list of strings. SELECT, WHERE, GROUP BY and
// KEYWORDS are sorted (order-insensitive); ORDER BY keeps clause order.
using ComponentMap = std::map<Family, std::vector<std::string>>;

ComponentMap extract_components(const Query& query, const ComponentOptions& options = {});

struct MatchOptions {
    bool mask_values = false;
};

std::map<Family, bool> compare_components(const Query& pred, const Query& gold,
                                          const MatchOptions& options = {});

// Canonical AST equality (aliases, identifier case and commutative ordering of
// select items and AND-only conditions ignored).
bool exact_match(const Query& pred, const Query& gold, const MatchOptions& options = {});

// ---- table-column pairs ----

// One star replacement per (sub)query. The key is "" for the outermost query
// and the canonical rendering for nested ones.
struct StarPicks {
    std::map<std::string, ColumnRef> by_scope;
};

StarPicks pick_stars(const Query& query, const DatabaseSchema& schema, std::uint64_t seed);

struct PairOccurrence {
    ColumnRef ref;
    bool join_column = false;  // first seen in a JOIN ... ON condition
    bool from_star = false;
};

// Ordered set (first appearance, occurrence-insensitive). Stars whose scope
// has no entry in `picks` are skipped.
std::vector<PairOccurrence> collect_pairs(const Query& query, const StarPicks& picks);

std::vector<ColumnRef> extract_table_column_pairs(const Query& query, const DatabaseSchema& schema,
                                                  std::uint64_t rng_seed);

// ---- hardness ----

struct HardnessCounts {
    int component1 = 0;
    int component2 = 0;
    int others = 0;
};

HardnessCounts hardness_counts(const Query& query);
Hardness classify_hardness(const Query& query);

// ---- helpers ----

// Distinct real table names of the outermost FROM, in order.
std::vector<std::string> tables_of(const Query& query);

// Nested queries reachable from `query` (WHERE/HAVING values and set-op
// right-hand sides), outermost first.
std::vector<const Query*> nested_queries(const Query& query);

}  // namespace t2sql
