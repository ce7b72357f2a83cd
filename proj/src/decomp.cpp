#include "t2sql/decomp.hpp"

#include <algorithm>
#include <cctype>
#include <deque>
#include <limits>
#include <random>
#include <set>

#include "t2sql/errors.hpp"
#include "t2sql/rng.hpp"
#include "t2sql/text.hpp"

namespace t2sql {

std::vector<std::string> Decomposition::sub_questions() const {
    std::vector<std::string> out;
    for (const DecompStep& s : steps) out.push_back(s.sub_question);
    return out;
}

namespace {

// ---- tokens ----

const std::set<std::string>& stop_words() {
    static const std::set<std::string> words = {
        "a",    "an",   "the",  "of",   "in",   "on",   "at",    "to",    "by",   "for",  "and",  "or",
        "with", "is",   "are",  "was",  "were", "be",   "as",    "from",  "that", "this", "it",   "its",
        "has",  "have", "had",  "do",   "does", "did",  "what",  "which", "who",  "whom", "how",  "all",
        "each", "any",  "than", "more", "less", "most", "least", "their", "them", "they", "there", "out",
        "find", "show", "list", "give", "return", "tell", "me", "also", "both", "but", "not", "we", "s"};
    return words;
}

const std::set<std::string>& generic_tokens() {
    static const std::set<std::string> words = {"id", "name", "code", "num", "number", "no", "type", "details", "other"};
    return words;
}

std::string stem(std::string w) {
    w = to_lower(w);
    auto ends = [&](std::string_view s) { return w.size() > s.size() && w.compare(w.size() - s.size(), s.size(), s) == 0; };
    if (w.size() > 4 && ends("ies")) return w.substr(0, w.size() - 3) + "y";
    if (ends("sses") || ends("xes") || ends("ches") || ends("shes")) return w.substr(0, w.size() - 2);
    if (w.size() > 3 && ends("s") && !ends("ss") && !ends("us") && !ends("is")) return w.substr(0, w.size() - 1);
    return w;
}

// Splits identifiers and free text into lowercase stemmed words:
// "AirportCode" -> airport, code; "grant_amount" -> grant, amount.
std::vector<std::string> word_tokens(std::string_view text) {
    std::vector<std::string> out;
    std::string cur;
    auto flush = [&] {
        if (!cur.empty()) out.push_back(stem(cur));
        cur.clear();
    };
    for (std::size_t i = 0; i < text.size(); ++i) {
        const unsigned char c = static_cast<unsigned char>(text[i]);
        if (std::isalnum(c)) {
            if (!cur.empty() && std::isupper(c) && std::islower(static_cast<unsigned char>(cur.back()))) flush();
            cur += static_cast<char>(c);
        } else {
            flush();
        }
    }
    flush();
    return out;
}

// ---- members ----

enum class MemberKind { select_item, where_conj, where_all, grouping, ordering, set_op, table };

struct Member {
    MemberKind kind;
    std::size_t index = 0;              // select item, where predicate or FROM entry
    std::set<std::string> distinctive;
    std::set<std::string> generic;
    std::set<std::string> table_tokens;
    std::set<std::size_t> tables;       // FROM indices referenced in the outer scope
    std::size_t segment = std::numeric_limits<std::size_t>::max();
};

constexpr std::size_t kUnassigned = std::numeric_limits<std::size_t>::max();

// Schema abbreviations: "dept" for department, "crs" for course.
bool abbreviates(const std::string& t, const std::string& w) {
    if (t.size() < 3 || w.size() <= t.size() || t[0] != w[0]) return false;
    std::size_t j = 0;
    for (char c : w)
        if (j < t.size() && c == t[j]) ++j;
    return j == t.size();
}

class MemberBuilder {
public:
    explicit MemberBuilder(const Query& q) : q_(q) {}

    void column(const ColumnRef& ref, Member& m) const {
        // "prof" in professor.prof_office only repeats the table name.
        const std::vector<std::string> own = word_tokens(ref.table);
        for (const std::string& t : word_tokens(ref.column)) {
            const bool abbrev =
                std::any_of(own.begin(), own.end(), [&](const std::string& w) { return abbreviates(t, w); });
            if (abbrev && !stop_words().count(t)) m.generic.insert(t);
            else add_token(t, m);
        }
        for (std::size_t i = 0; i < q_.from.size(); ++i) {
            if (q_.from[i].name == ref.table && q_.from[i].occurrence == ref.occurrence) {
                m.tables.insert(i);
                for (const std::string& t : word_tokens(q_.from[i].name))
                    if (!stop_words().count(t) && !generic_tokens().count(t)) m.table_tokens.insert(t);
            }
        }
    }

    void operand(const Operand& o, Member& m) const {
        if (!o.star) column(o.column, m);
    }

    void val_unit(const ValUnit& v, Member& m) const {
        operand(v.lhs, m);
        if (v.rhs) operand(*v.rhs, m);
    }

    void value(const Value& v, Member& m) const {
        if (const auto* lit = std::get_if<Literal>(&v)) {
            if (lit->text == "NULL") return;
            for (const std::string& t : word_tokens(lit->text))
                if (!stop_words().count(t)) m.distinctive.insert(t);
        } else if (const auto* op = std::get_if<Operand>(&v)) {
            operand(*op, m);
        } else {
            // Tokens of a nested query count, its tables do not.
            nested(*std::get<Box<Query>>(v), m);
        }
    }

    void predicate(const Predicate& p, Member& m) const {
        val_unit(p.lhs, m);
        value(p.rhs, m);
        if (p.rhs2) value(*p.rhs2, m);
    }

    void nested(const Query& sub, Member& m) const {
        Member scratch;
        MemberBuilder inner(sub);
        for (const SelectItem& s : sub.select) inner.val_unit(s.value, scratch);
        for (const Predicate& p : sub.where.preds) inner.predicate(p, scratch);
        for (const Operand& o : sub.group_by) inner.operand(o, scratch);
        for (const Predicate& p : sub.having.preds) inner.predicate(p, scratch);
        for (const auto& t : scratch.distinctive) m.distinctive.insert(t);
        for (const auto& t : scratch.table_tokens) m.distinctive.insert(t);
        if (sub.set_rhs) nested(**sub.set_rhs, m);
    }

private:
    const Query& q_;

    static void add_token(const std::string& t, Member& m) {
        if (stop_words().count(t)) return;
        if (generic_tokens().count(t)) {
            m.generic.insert(t);
        } else {
            m.distinctive.insert(t);
        }
    }
};

const std::set<std::string>& ordering_words() {
    static const std::set<std::string> words = {"order", "sort", "sorted", "ascend", "ascending", "descend",
                                                "descending", "alphabetical", "alphabetically", "highest",
                                                "lowest", "largest", "smallest", "top", "biggest", "oldest",
                                                "youngest", "latest", "earliest", "maximum", "minimum", "most",
                                                "least", "fewest", "ordered"};
    return words;
}

std::vector<Member> gold_members(const Query& q) {
    std::vector<Member> out;
    MemberBuilder b(q);
    for (std::size_t i = 0; i < q.select.size(); ++i) {
        Member m{MemberKind::select_item, i, {}, {}, {}, {}};
        b.val_unit(q.select[i].value, m);
        out.push_back(std::move(m));
    }
    if (!q.where.empty()) {
        if (q.where.has_or()) {
            Member m{MemberKind::where_all, 0, {}, {}, {}, {}};
            for (const Predicate& p : q.where.preds) b.predicate(p, m);
            out.push_back(std::move(m));
        } else {
            for (std::size_t i = 0; i < q.where.preds.size(); ++i) {
                Member m{MemberKind::where_conj, i, {}, {}, {}, {}};
                b.predicate(q.where.preds[i], m);
                out.push_back(std::move(m));
            }
        }
    }
    if (!q.group_by.empty() || !q.having.empty()) {
        Member m{MemberKind::grouping, 0, {}, {}, {}, {}};
        for (const Operand& o : q.group_by) b.operand(o, m);
        for (const Predicate& p : q.having.preds) b.predicate(p, m);
        out.push_back(std::move(m));
    }
    if (!q.order_by.empty() || q.limit) {
        Member m{MemberKind::ordering, 0, {}, {}, {}, {}};
        for (const OrderItem& o : q.order_by) b.val_unit(o.value, m);
        for (const std::string& w : ordering_words()) m.distinctive.insert(stem(w));
        out.push_back(std::move(m));
    }
    if (q.set_op != SetOp::none && q.set_rhs) {
        Member m{MemberKind::set_op, 0, {}, {}, {}, {}};
        b.nested(**q.set_rhs, m);
        // The right side usually repeats the projection; only what is new there counts.
        for (const Member& s : out) {
            if (s.kind != MemberKind::select_item) continue;
            for (const std::string& t : s.distinctive) m.distinctive.erase(t);
            for (const std::string& t : s.table_tokens) m.distinctive.erase(t);
        }
        out.push_back(std::move(m));
    }
    std::set<std::string> seen_tables;
    for (std::size_t i = 1; i < q.from.size(); ++i) {
        if (q.from[i].name == q.from[0].name) continue;  // core table instance
        Member m{MemberKind::table, i, {}, {}, {}, {i}};
        for (const std::string& t : word_tokens(q.from[i].name)) {
            if (stop_words().count(t)) continue;
            if (generic_tokens().count(t)) {
                m.generic.insert(t);
            } else {
                m.distinctive.insert(t);
                m.table_tokens.insert(t);
            }
        }
        out.push_back(std::move(m));
    }
    return out;
}

bool mentions(const std::set<std::string>& tokens, const std::string& t) {
    if (tokens.count(t)) return true;
    return std::any_of(tokens.begin(), tokens.end(), [&](const std::string& w) { return abbreviates(t, w); });
}

bool triggers(const Member& m, const std::set<std::string>& tokens) {
    for (const std::string& t : m.distinctive)
        if (mentions(tokens, t)) return true;
    bool generic = false;
    for (const std::string& t : m.generic)
        if (tokens.count(t)) generic = true;
    if (!generic) return false;
    for (const std::string& t : m.table_tokens)
        if (mentions(tokens, t)) return true;
    return false;
}

std::set<std::string> token_set(std::string_view text) {
    std::vector<std::string> words = word_tokens(text);
    return {words.begin(), words.end()};
}

// ---- cut points ----

struct Word {
    std::string lower;
    std::size_t begin;
    std::size_t end;
};

const std::set<std::string>& determiners() {
    static const std::set<std::string> words = {
        "the", "a", "an", "their", "its", "his", "her", "all", "each", "every", "any", "those", "these",
        "this", "that", "some", "also", "what", "how", "which", "who", "whose", "list", "show", "find",
        "return", "give", "count"};
    return words;
}

std::vector<bool> quoted_mask(const std::string& q) {
    std::vector<bool> mask(q.size(), false);
    std::size_t i = 0;
    while (i < q.size()) {
        // straight double quotes
        if (q[i] == '"') {
            std::size_t j = q.find('"', i + 1);
            if (j == std::string::npos) break;
            for (std::size_t k = i; k <= j; ++k) mask[k] = true;
            i = j + 1;
            continue;
        }
        // curly double quotes (UTF-8 E2 80 9C ... E2 80 9D)
        if (q.compare(i, 3, "\xE2\x80\x9C") == 0) {
            std::size_t j = q.find("\xE2\x80\x9D", i + 3);
            if (j == std::string::npos) break;
            for (std::size_t k = i; k < j + 3; ++k) mask[k] = true;
            i = j + 3;
            continue;
        }
        // single quotes only at word boundaries, so apostrophes are ignored
        if (q[i] == '\'' && (i == 0 || std::isspace(static_cast<unsigned char>(q[i - 1])))) {
            std::size_t j = i + 1;
            while (j < q.size()) {
                if (q[j] == '\'' && (j + 1 == q.size() || !std::isalnum(static_cast<unsigned char>(q[j + 1])))) break;
                ++j;
            }
            if (j >= q.size()) break;
            for (std::size_t k = i; k <= j; ++k) mask[k] = true;
            i = j + 1;
            continue;
        }
        ++i;
    }
    return mask;
}

std::vector<Word> words_of(const std::string& q) {
    std::vector<Word> out;
    std::size_t i = 0;
    while (i < q.size()) {
        if (std::isalnum(static_cast<unsigned char>(q[i])) || q[i] == '_') {
            std::size_t j = i;
            while (j < q.size() && (std::isalnum(static_cast<unsigned char>(q[j])) || q[j] == '_')) ++j;
            out.push_back({to_lower(q.substr(i, j - i)), i, j});
            i = j;
        } else {
            ++i;
        }
    }
    return out;
}

std::vector<std::size_t> cut_candidates(const std::string& q, const DecompOptions& options) {
    static const std::set<std::string> conj = {"and", "or", "but"};
    static const std::set<std::string> relative = {"who", "whom", "whose", "which", "that", "were", "was"};
    std::set<std::string> preps = {"with", "without"};
    if (options.cut_on_for) preps.insert("for");

    const std::vector<bool> quoted = quoted_mask(q);
    const std::vector<Word> words = words_of(q);
    std::set<std::size_t> cuts;
    for (std::size_t i = 1; i < words.size(); ++i) {
        const Word& w = words[i];
        if (quoted[w.begin]) continue;
        // sentence boundary before this word
        std::size_t k = w.begin;
        while (k > 0 && std::isspace(static_cast<unsigned char>(q[k - 1]))) --k;
        if (k < w.begin && k > 0 && (q[k - 1] == '.' || q[k - 1] == '?' || q[k - 1] == '!') && !quoted[k - 1] &&
            std::isupper(static_cast<unsigned char>(q[w.begin]))) {
            cuts.insert(w.begin);
            continue;
        }
        if (conj.count(w.lower) && i + 1 < words.size() && determiners().count(words[i + 1].lower)) {
            cuts.insert(w.begin);
        } else if (preps.count(w.lower) || relative.count(w.lower)) {
            cuts.insert(w.begin);
        }
    }
    return {cuts.begin(), cuts.end()};
}

std::string prefix_question(const std::string& original, std::size_t end) {
    std::string p = rtrim(std::string_view(original).substr(0, end));
    const char last_orig = original.empty() ? 0 : rtrim(original).back();
    const bool terminal = last_orig == '.' || last_orig == '?' || last_orig == '!';
    if (!p.empty() && (p.back() == '.' || p.back() == '?' || p.back() == '!')) return p;
    while (!p.empty() && (p.back() == ',' || p.back() == ';' || p.back() == ':' || p.back() == '(' || p.back() == ' '))
        p.pop_back();
    p = rtrim(p);
    if (terminal) p += last_orig;
    return p;
}

std::size_t common_prefix(const std::string& a, const std::string& b) {
    std::size_t n = 0;
    while (n < a.size() && n < b.size() && a[n] == b[n]) ++n;
    return n;
}

// Segment texts recovered from cumulative sub-questions.
std::vector<std::string> segments_from(const std::vector<std::string>& subs) {
    std::vector<std::string> out;
    const std::string& original = subs.back();
    std::size_t prev = 0;
    for (std::size_t k = 0; k < subs.size(); ++k) {
        std::size_t end = k + 1 == subs.size() ? original.size() : common_prefix(subs[k], original);
        end = std::max(end, prev);
        out.push_back(original.substr(prev, end - prev));
        prev = end;
    }
    return out;
}

bool is_core_member(const Member& m, const Query& q) {
    return m.kind == MemberKind::table && !q.from.empty() && q.from[m.index].name == q.from[0].name;
}

}  // namespace

std::vector<std::string> segment_question(const std::string& question, const Query& gold_ast,
                                          const DecompOptions& options) {
    const std::vector<std::size_t> cands = cut_candidates(question, options);
    const std::vector<Member> members = gold_members(gold_ast);
    std::vector<std::size_t> bounds = cands;
    bounds.push_back(question.size());

    std::vector<bool> seen(members.size(), false);
    auto mark = [&](std::string_view text) {
        const std::set<std::string> tokens = token_set(text);
        bool fresh = false;
        for (std::size_t i = 0; i < members.size(); ++i) {
            if (seen[i] || is_core_member(members[i], gold_ast)) continue;
            if (triggers(members[i], tokens)) {
                seen[i] = true;
                fresh = true;
            }
        }
        return fresh;
    };
    std::vector<std::size_t> accepted;
    mark(std::string_view(question).substr(0, bounds.front()));
    for (std::size_t i = 0; i + 1 < bounds.size(); ++i) {
        const std::string_view span = std::string_view(question).substr(bounds[i], bounds[i + 1] - bounds[i]);
        if (mark(span)) accepted.push_back(bounds[i]);
    }
    std::vector<std::string> out;
    for (std::size_t cut : accepted) out.push_back(prefix_question(question, cut));
    out.push_back(question);
    // Degenerate prefixes (identical to a previous one) are dropped.
    std::vector<std::string> dedup;
    for (const std::string& s : out)
        if (dedup.empty() || dedup.back() != s) dedup.push_back(s);
    return dedup;
}

namespace {

std::vector<std::size_t> connect_tables(const Query& q, std::set<std::size_t> needed) {
    if (needed.empty()) needed.insert(0);
    const std::size_t n = q.from.size();
    std::vector<std::vector<std::size_t>> adj(n);
    auto index_of = [&](const ColumnRef& c) -> std::optional<std::size_t> {
        for (std::size_t i = 0; i < n; ++i)
            if (q.from[i].name == c.table && q.from[i].occurrence == c.occurrence) return i;
        return std::nullopt;
    };
    for (const Predicate& p : q.join_conds) {
        const auto* r = std::get_if<Operand>(&p.rhs);
        if (p.lhs.lhs.star || !r || r->star) continue;
        auto a = index_of(p.lhs.lhs.column), b = index_of(r->column);
        if (a && b && *a != *b) {
            adj[*a].push_back(*b);
            adj[*b].push_back(*a);
        }
    }
    for (auto& v : adj) std::sort(v.begin(), v.end());
    std::set<std::size_t> comp = {*needed.begin()};
    std::set<std::size_t> remaining(std::next(needed.begin()), needed.end());
    while (!remaining.empty()) {
        // BFS from the component to the nearest remaining table.
        std::vector<std::size_t> parent(n, n);
        std::vector<bool> visited(n, false);
        std::deque<std::size_t> frontier;
        for (std::size_t c : comp) {
            visited[c] = true;
            frontier.push_back(c);
        }
        std::optional<std::size_t> found;
        while (!frontier.empty() && !found) {
            const std::size_t u = frontier.front();
            frontier.pop_front();
            for (std::size_t v : adj[u]) {
                if (visited[v]) continue;
                visited[v] = true;
                parent[v] = u;
                if (remaining.count(v)) {
                    found = v;
                    break;
                }
                frontier.push_back(v);
            }
        }
        if (!found) {
            // Not reachable through join conditions: add it directly.
            comp.insert(*remaining.begin());
            remaining.erase(remaining.begin());
            continue;
        }
        for (std::size_t v = *found; v != n && !comp.count(v); v = parent[v]) {
            comp.insert(v);
            remaining.erase(v);
        }
    }
    return {comp.begin(), comp.end()};
}

Query build_partial(const Query& gold, const std::vector<Member>& members, std::size_t step) {
    std::set<std::size_t> needed;
    std::set<std::size_t> kept_select, kept_where;
    bool where_all = false, grouping = false, ordering = false, set_op = false;
    for (const Member& m : members) {
        if (m.segment == kUnassigned || m.segment > step) continue;
        needed.insert(m.tables.begin(), m.tables.end());
        switch (m.kind) {
            case MemberKind::select_item: kept_select.insert(m.index); break;
            case MemberKind::where_conj: kept_where.insert(m.index); break;
            case MemberKind::where_all: where_all = true; break;
            case MemberKind::grouping: grouping = true; break;
            case MemberKind::ordering: ordering = true; break;
            case MemberKind::set_op: set_op = true; break;
            case MemberKind::table: break;
        }
    }
    // count(*) and friends still need the core table
    for (const Member& m : members)
        if (m.kind == MemberKind::select_item && m.segment <= step && m.tables.empty()) needed.insert(0);
    const std::vector<std::size_t> tables = connect_tables(gold, needed);
    const std::set<std::size_t> table_set(tables.begin(), tables.end());

    Query q;
    q.distinct = gold.distinct;
    for (std::size_t i : kept_select) q.select.push_back(gold.select[i]);
    for (std::size_t i : tables) q.from.push_back(gold.from[i]);
    auto in_tables = [&](const ColumnRef& c) {
        for (std::size_t i : tables)
            if (gold.from[i].name == c.table && gold.from[i].occurrence == c.occurrence) return true;
        return false;
    };
    for (const Predicate& p : gold.join_conds) {
        const auto* r = std::get_if<Operand>(&p.rhs);
        const bool lhs_ok = p.lhs.lhs.star || in_tables(p.lhs.lhs.column);
        const bool rhs_ok = !r || r->star || in_tables(r->column);
        if (lhs_ok && rhs_ok) q.join_conds.push_back(p);
    }
    if (where_all) {
        q.where = gold.where;
    } else {
        for (std::size_t i : kept_where) {
            if (!q.where.preds.empty()) q.where.conj.push_back(Conj::and_);
            q.where.preds.push_back(gold.where.preds[i]);
        }
    }
    if (grouping) {
        q.group_by = gold.group_by;
        q.having = gold.having;
    }
    if (ordering) {
        q.order_by = gold.order_by;
        q.limit = gold.limit;
    }
    if (set_op) {
        q.set_op = gold.set_op;
        q.set_rhs = gold.set_rhs;
    }
    return q;
}

}  // namespace

std::vector<std::string> derive_partial_sql(const std::vector<std::string>& sub_questions, const Query& gold_ast,
                                            const DatabaseSchema& schema, const std::string& gold_sql,
                                            const DecompOptions&) {
    if (sub_questions.empty()) throw AnnotationError("no sub-questions");
    const std::string final_sql = gold_sql.empty() ? render_sql(gold_ast, RenderStyle::spider) : gold_sql;
    if (sub_questions.size() == 1) return {final_sql};

    const std::vector<std::string> segments = segments_from(sub_questions);
    std::vector<Member> members = gold_members(gold_ast);
    for (Member& m : members) {
        for (std::size_t k = 0; k < segments.size(); ++k) {
            if (triggers(m, token_set(segments[k]))) {
                m.segment = k;
                break;
            }
        }
    }
    bool select_at_zero = false;
    for (Member& m : members) {
        if (m.kind != MemberKind::select_item) continue;
        if (m.segment == kUnassigned) m.segment = 0;
        if (m.segment == 0) select_at_zero = true;
    }
    if (!select_at_zero) {
        for (Member& m : members)
            if (m.kind == MemberKind::select_item) {
                m.segment = 0;
                break;
            }
    }
    // A joined table arrives no later than the first member that uses it;
    // tables nobody uses are pulled in only as join bridges.
    for (Member& t : members) {
        if (t.kind != MemberKind::table) continue;
        for (const Member& m : members) {
            if (m.kind == MemberKind::table || m.segment == kUnassigned) continue;
            for (std::size_t idx : m.tables)
                if (gold_ast.from[idx].name == gold_ast.from[t.index].name) t.segment = std::min(t.segment, m.segment);
        }
    }
    for (const Member& m : members) {
        if (m.segment != kUnassigned || m.kind == MemberKind::table) continue;
        static const char* names[] = {"select item", "WHERE condition", "WHERE clause", "GROUP BY clause",
                                      "ORDER BY clause", "set operation", "table"};
        throw AnnotationError(std::string("cannot attribute ") + names[static_cast<int>(m.kind)] +
                              " to any sub-question");
    }

    std::vector<std::string> out;
    for (std::size_t k = 0; k + 1 < sub_questions.size(); ++k) {
        const Query partial = build_partial(gold_ast, members, k);
        std::string sql = render_sql(partial, RenderStyle::spider);
        try {
            (void)parse_sql(sql, schema);
        } catch (const Error& e) {
            throw AnnotationError("partial SQL for step " + std::to_string(k + 1) + " does not parse: " + e.what());
        }
        out.push_back(std::move(sql));
    }
    out.push_back(final_sql);
    return out;
}

namespace {

// Scope keys follow pick_stars: "" for the outermost query, canonical text
// for nested ones, so one pick serves every step.
StarPicks step_picks(const StarPicks& final_picks) { return final_picks; }

std::vector<Annotation> group_by_table(std::vector<Annotation> in) {
    std::vector<Annotation> out;
    std::vector<std::string> order;
    for (const Annotation& a : in)
        if (std::find(order.begin(), order.end(), a.ref.table) == order.end()) order.push_back(a.ref.table);
    for (const std::string& t : order)
        for (const Annotation& a : in)
            if (a.ref.table == t) out.push_back(a);
    return out;
}

}  // namespace

Decomposition annotate_intercol(const std::vector<std::string>& sub_questions,
                                const std::vector<std::string>& partial_sqls, const DatabaseSchema& schema,
                                std::uint64_t rng_seed, const DecompOptions& options) {
    if (sub_questions.empty() || sub_questions.size() != partial_sqls.size())
        throw AnnotationError("sub-questions and partial SQL lists differ in length");
    std::vector<Query> asts;
    for (const std::string& sql : partial_sqls) asts.push_back(parse_sql(sql, schema));
    const StarPicks picks = step_picks(pick_stars(asts.back(), schema, rng_seed));
    std::mt19937_64 fallback_rng(mix_seed(rng_seed, 1));

    Decomposition d;
    std::vector<ColumnRef> seen;           // annotated or skipped so far
    std::vector<Annotation> prior;         // parse-origin annotations so far
    std::set<std::string> highlighted;     // tables with an annotation so far
    auto is_seen = [&](const ColumnRef& r) {
        for (const ColumnRef& s : seen)
            if (same_pair(s, r)) return true;
        return false;
    };
    for (std::size_t k = 0; k < asts.size(); ++k) {
        DecompStep step;
        step.sub_question = sub_questions[k];
        step.partial_sql = partial_sqls[k];
        std::vector<Annotation> fresh;
        for (const PairOccurrence& p : collect_pairs(asts[k], picks)) {
            if (is_seen(p.ref)) continue;
            if (options.join_table_skip && p.join_column && highlighted.count(p.ref.table)) {
                step.skipped.push_back(p.ref);
                seen.push_back(p.ref);
                continue;
            }
            fresh.push_back({p.ref, PairOrigin::parse});
            seen.push_back(p.ref);
        }
        if (fresh.empty()) {
            if (prior.empty()) throw AnnotationError("step " + std::to_string(k + 1) + " has no table-column pair");
            Annotation a = prior[uniform_index(fallback_rng, prior.size())];
            a.origin = PairOrigin::fallback;
            fresh.push_back(a);
        }
        for (const Annotation& a : fresh) {
            if (a.origin == PairOrigin::parse) prior.push_back(a);
            highlighted.insert(a.ref.table);
        }
        step.annotations = group_by_table(std::move(fresh));
        d.steps.push_back(std::move(step));
    }
    return d;
}

Decomposition decompose_example(const SchemaExample& example, const DatabaseSchema& schema, std::uint64_t rng_seed,
                                const DecompOptions& options) {
    const Query gold = parse_sql(example.gold_sql, schema);
    const std::vector<std::string> subs = segment_question(example.question, gold, options);
    const std::vector<std::string> sqls = derive_partial_sql(subs, gold, schema, example.gold_sql, options);
    Decomposition d = annotate_intercol(subs, sqls, schema, rng_seed, options);
    d.source_example_id = example.example_id;
    return d;
}

std::string format_annotations(const std::vector<Annotation>& annotations) {
    std::string out;
    std::string current;
    bool open = false;
    for (const Annotation& a : annotations) {
        if (!open || a.ref.table != current) {
            if (open) out += "), ";
            out += a.ref.table_display + " (" + a.ref.column_display;
            current = a.ref.table;
            open = true;
        } else {
            out += ", " + a.ref.column_display;
        }
    }
    if (open) out += ")";
    return out;
}

nlohmann::json to_json(const Decomposition& d) {
    using nlohmann::json;
    json steps = json::array();
    for (const DecompStep& s : d.steps) {
        json ann = json::array();
        for (const Annotation& a : s.annotations)
            ann.push_back({{"table", a.ref.table_display}, {"column", a.ref.column_display},
                           {"origin", a.origin == PairOrigin::parse ? "parse" : "fallback"}});
        json skipped = json::array();
        for (const ColumnRef& r : s.skipped) skipped.push_back({{"table", r.table_display}, {"column", r.column_display}});
        json step = {{"sub_question", s.sub_question}, {"annotations", ann}, {"skipped", skipped}};
        step["partial_sql"] = s.partial_sql ? json(*s.partial_sql) : json(nullptr);
        steps.push_back(std::move(step));
    }
    return json{{"source_example_id", d.source_example_id}, {"steps", steps}};
}

Decomposition decomposition_from_json(const nlohmann::json& j) {
    Decomposition d;
    d.source_example_id = j.value("source_example_id", std::string());
    for (const auto& s : j.at("steps")) {
        DecompStep step;
        step.sub_question = s.at("sub_question").get<std::string>();
        if (s.contains("partial_sql") && !s["partial_sql"].is_null()) step.partial_sql = s["partial_sql"].get<std::string>();
        if (s.contains("annotations")) {
            for (const auto& a : s["annotations"]) {
                Annotation ann{ColumnRef::make(a.at("table").get<std::string>(), a.at("column").get<std::string>()),
                               a.value("origin", std::string("parse")) == "fallback" ? PairOrigin::fallback
                                                                                   : PairOrigin::parse};
                step.annotations.push_back(std::move(ann));
            }
        }
        if (s.contains("skipped"))
            for (const auto& r : s["skipped"])
                step.skipped.push_back(ColumnRef::make(r.at("table").get<std::string>(), r.at("column").get<std::string>()));
        d.steps.push_back(std::move(step));
    }
    return d;
}

}  // namespace t2sql
