#include "t2sql/promptgen.hpp"

#include <algorithm>
#include <cctype>

#include "t2sql/errors.hpp"
#include "t2sql/text.hpp"

namespace t2sql {

namespace {

constexpr std::string_view kApiHeader = "### SQLite SQL tables, with their properties:";
constexpr std::string_view kAnswerMarker = "# Thus, the answer for the question is:";
constexpr std::string_view kOpenQuote = "\xE2\x80\x9C";
constexpr std::string_view kCloseQuote = "\xE2\x80\x9D";

struct MethodName {
    PromptMethod method;
    std::string_view name;
};

constexpr MethodName kMethodNames[] = {
    {PromptMethod::standard, "standard"},       {PromptMethod::cot, "cot"},
    {PromptMethod::ltm_reduction, "ltm_reduction"}, {PromptMethod::ltm_solving, "ltm_solving"},
    {PromptMethod::qdecomp, "qdecomp"},         {PromptMethod::qdecomp_intercol, "qdecomp_intercol"},
};

}  // namespace

std::string_view to_string(PromptMethod method) {
    for (const auto& m : kMethodNames)
        if (m.method == method) return m.name;
    return "standard";
}

std::string_view to_string(SchemaFormat format) {
    return format == SchemaFormat::api_docs ? "api_docs" : "create_table_select3";
}

PromptMethod prompt_method_from_string(std::string_view text) {
    for (const auto& m : kMethodNames)
        if (m.name == text) return m.method;
    throw ConfigError("unknown prompt method '" + std::string(text) + "'");
}

SchemaFormat schema_format_from_string(std::string_view text) {
    if (text == "api_docs") return SchemaFormat::api_docs;
    if (text == "create_table_select3" || text == "create_table") return SchemaFormat::create_table_select3;
    throw ConfigError("unknown schema format '" + std::string(text) + "'");
}

// ---- schema blocks ----

namespace {

std::string api_docs_block(const DatabaseSchema& schema, PromptMethod method) {
    const bool leading_hash = method == PromptMethod::standard || method == PromptMethod::cot;
    const bool ltm = method == PromptMethod::ltm_reduction || method == PromptMethod::ltm_solving;
    std::string out(kApiHeader);
    out += "\n";
    if (leading_hash) out += "#\n";
    for (const TableDef& t : schema.tables) {
        std::vector<std::string> cols;
        for (const ColumnDef& c : t.columns) cols.push_back(to_lower(c.name));
        out += "# " + to_lower(t.name) + " (" + join(cols, ", ") + ")\n";
    }
    out += ltm ? "# \n" : "#\n";
    return out;
}

std::string sample_rows(const TableDef& t) {
    const std::vector<Row>& rows = *t.content_sample;
    std::vector<std::size_t> width(t.columns.size(), 0);
    for (std::size_t c = 0; c < t.columns.size(); ++c) {
        width[c] = t.columns[c].name.size();
        for (const Row& r : rows)
            if (c < r.size()) width[c] = std::max(width[c], r[c].size());
    }
    auto line = [&](auto cell) {
        std::string out;
        for (std::size_t c = 0; c < t.columns.size(); ++c) {
            const std::string v = cell(c);
            out += std::string(width[c] - std::min(width[c], v.size()), ' ') + v + " ";
        }
        return out + "\n";
    };
    std::string out = line([&](std::size_t c) { return t.columns[c].name; });
    for (const Row& r : rows) out += line([&](std::size_t c) { return c < r.size() ? r[c] : std::string(); });
    return out;
}

std::string create_table_block(const DatabaseSchema& schema) {
    std::vector<std::string> blocks;
    for (const TableDef& t : schema.tables) {
        if (!t.content_sample)
            throw FormatError("table '" + t.name + "' has no content sample; attach the database first");
        const auto pks = schema.primary_keys_of(t.name);
        std::vector<std::string> lines;
        for (const ColumnDef& c : t.columns) {
            std::string l = c.name + " " + c.declared_type;
            if (pks.size() == 1 && iequals(pks.front()->column, c.name)) l += " PRIMARY KEY";
            if (c.unique) l += " UNIQUE";
            lines.push_back(std::move(l));
        }
        if (pks.size() > 1) {
            std::vector<std::string> names;
            for (const ColumnRef* p : pks) names.push_back(p->column_display);
            lines.push_back("PRIMARY KEY (" + join(names, ", ") + ")");
        }
        for (const ForeignKey& fk : schema.foreign_keys) {
            if (fk.from.table != to_lower(t.name)) continue;
            lines.push_back("FOREIGN KEY (" + fk.from.column_display + ") REFERENCES " + fk.to.table_display + "(" +
                            fk.to.column_display + ")");
        }
        std::string b = "CREATE TABLE " + t.name + " (\n" + join(lines, ",\n") + "\n)\n";
        b += "/*\n3 example rows:\nSELECT * FROM " + t.name + "  LIMIT 3;\n";
        b += sample_rows(t);
        b += "*/\n";
        blocks.push_back(std::move(b));
    }
    return join(blocks, "\n");
}

}  // namespace

std::string render_schema(const DatabaseSchema& schema, SchemaFormat format, PromptMethod method) {
    if (format == SchemaFormat::create_table_select3) return create_table_block(schema);
    return api_docs_block(schema, method);
}

// ---- defaults ----

std::string default_separator(PromptMethod method) {
    switch (method) {
        case PromptMethod::cot:
        case PromptMethod::qdecomp: return "\n\n";
        default: return "\n";
    }
}

std::vector<std::string> default_stop_sequences(PromptMethod method) {
    switch (method) {
        case PromptMethod::standard: return {"\n\n"};
        case PromptMethod::ltm_reduction:
        case PromptMethod::ltm_solving: return {"\n\nQ:", "###"};
        default: return {"\n\n###"};
    }
}

int default_max_tokens(PromptMethod method) {
    return method == PromptMethod::ltm_reduction || method == PromptMethod::ltm_solving ? 256 : 512;
}

// ---- prompt layouts ----

namespace {

const Decomposition& need_decomposition(const Demonstration& d, PromptMethod method) {
    if (!d.decomposition || d.decomposition->steps.empty())
        throw PromptSpecError(std::string(to_string(method)) + " demonstration '" + d.example.example_id +
                              "' has no decomposition");
    return *d.decomposition;
}

std::string quoted(const std::string& s) { return std::string(kOpenQuote) + s + std::string(kCloseQuote); }

std::string demo_text(const Demonstration& d, PromptMethod method, SchemaFormat format) {
    const std::string block = render_schema(d.schema, format, method);
    const std::string& q = d.example.question;
    switch (method) {
        case PromptMethod::standard: return block + "### " + q + "\n" + d.example.gold_sql + "\n";
        case PromptMethod::cot: {
            std::string narration;
            if (d.narration) {
                narration = *d.narration;
            } else {
                narration = compose_cot_narration(parse_sql(d.example.gold_sql, d.schema));
            }
            return block + "### " + q + "\n# Let's think step by step\n\n# " + narration + "\n\n" +
                   std::string(kAnswerMarker) + " " + q + "\n" + d.example.gold_sql + "\n";
        }
        case PromptMethod::ltm_reduction: {
            const Decomposition& dec = need_decomposition(d, method);
            std::vector<std::string> items;
            if (dec.steps.size() == 1) {
                items.push_back(quoted(dec.steps.front().sub_question));
            } else {
                for (std::size_t i = 0; i + 1 < dec.steps.size(); ++i) items.push_back(quoted(dec.steps[i].sub_question));
            }
            return block + "To answer the question " + quoted(q) + ", we need to know: " + join(items, ", ") + ".\n";
        }
        case PromptMethod::ltm_solving: {
            const Decomposition& dec = need_decomposition(d, method);
            std::vector<std::string> turns;
            for (std::size_t i = 0; i < dec.steps.size(); ++i) {
                const DecompStep& s = dec.steps[i];
                std::string sql;
                if (s.partial_sql) {
                    sql = *s.partial_sql;
                } else if (i + 1 == dec.steps.size()) {
                    sql = d.example.gold_sql;
                } else {
                    throw PromptSpecError("ltm_solving demonstration '" + d.example.example_id +
                                          "' lacks partial SQL for step " + std::to_string(i + 1));
                }
                turns.push_back("Q: " + s.sub_question + "\nA: " + sql + "\n");
            }
            return block + join(turns, "\n");
        }
        case PromptMethod::qdecomp:
        case PromptMethod::qdecomp_intercol: {
            const Decomposition& dec = need_decomposition(d, method);
            std::string out = block + "### Question: " + q + "\ndecompose the question\n\n";
            for (std::size_t i = 0; i < dec.steps.size(); ++i) {
                out += std::to_string(i + 1) + ". " + dec.steps[i].sub_question + "\n";
                if (method == PromptMethod::qdecomp_intercol) {
                    if (dec.steps[i].annotations.empty())
                        throw PromptSpecError("qdecomp_intercol demonstration '" + d.example.example_id +
                                              "' has a step without annotations");
                    out += "SQL table (column): " + format_annotations(dec.steps[i].annotations) + "\n";
                }
            }
            out += "\n" + std::string(kAnswerMarker) + " " + q + "\n" + d.example.gold_sql + "\n";
            return out;
        }
    }
    return {};
}

std::string target_text(const PromptTarget& t, PromptMethod method, SchemaFormat format) {
    const std::string block = render_schema(t.schema, format, method);
    const std::string& q = t.example.question;
    switch (method) {
        case PromptMethod::standard:
        case PromptMethod::cot: return block + "### " + q + "\n";
        case PromptMethod::ltm_reduction: return block + "To answer the question " + quoted(q) + ", we need to know: ";
        case PromptMethod::ltm_solving: {
            std::string out = block;
            for (const LtmTurn& turn : t.solved) out += "Q: " + turn.question + "\nA: " + turn.sql + "\n\n";
            out += "Q: " + (t.sub_question.empty() ? q : t.sub_question) + "\n";
            return out;
        }
        case PromptMethod::qdecomp:
        case PromptMethod::qdecomp_intercol: return block + "### Question: " + q + "\ndecompose the question\n";
    }
    return {};
}

}  // namespace

RenderedPrompt build_prompt(const PromptSpec& spec) {
    const std::string sep = spec.separator ? *spec.separator : default_separator(spec.method);
    std::string text;
    for (const Demonstration& d : spec.demonstrations) text += demo_text(d, spec.method, spec.format) + sep;
    text += target_text(spec.target, spec.method, spec.format);

    RenderedPrompt out;
    out.text = std::move(text);
    out.stop_sequences = default_stop_sequences(spec.method);
    out.max_tokens = default_max_tokens(spec.method);
    out.method = spec.method;
    out.format = spec.format;
    out.shot_count = spec.demonstrations.size();
    out.seed = spec.seed;
    return out;
}

// ---- CoT narration ----

namespace {

class Narrator {
public:
    explicit Narrator(const Query& q) : q_(q) {}

    std::string run() const {
        std::string out = "This query chooses records from the " + (q_.from.empty() ? std::string("?") : q_.from[0].name) +
                          " table";
        const std::vector<std::size_t> attach = join_attachment(q_);
        for (std::size_t i = 1; i < q_.from.size(); ++i) {
            out += ", followed by joining the " + q_.from[i].name + " table";
            for (std::size_t k = 0; k < q_.join_conds.size(); ++k) {
                if (attach[k] != i) continue;
                out += " on the " + join_column(q_.join_conds[k], q_.from[i]) + " column";
                break;
            }
        }
        if (!q_.where.empty()) out += ", followed by a WHERE clause that selects records where " + condition(q_.where);
        out += ".";
        if (!q_.group_by.empty()) {
            std::vector<std::string> cols;
            for (const Operand& o : q_.group_by) cols.push_back(o.column.column);
            out += " It then groups the results by the " + join_words(cols) +
                   (cols.size() == 1 ? " column." : " columns.");
        }
        if (!q_.having.empty()) out += " It then filters the results where " + condition(q_.having) + ".";
        if (!q_.order_by.empty()) {
            std::vector<std::string> items;
            for (const OrderItem& o : q_.order_by)
                items.push_back(val_unit(o.value) + (o.desc ? " in descending order" : " in ascending order"));
            out += " It then sorts the results by " + join_words(items) + ".";
        }
        if (q_.limit) out += " It then limits the results to " + std::to_string(*q_.limit) + " rows.";
        std::vector<std::string> items;
        for (const SelectItem& s : q_.select) items.push_back(select_item(s));
        out += q_.distinct ? " It then selects the distinct values of " : " It then selects ";
        out += join_words(items) + ".";
        if (q_.set_op != SetOp::none) {
            static const char* verbs[] = {"", "unions", "intersects", "excepts"};
            out += std::string(" It then ") + verbs[static_cast<int>(q_.set_op)] +
                   " the results with those of another query.";
        }
        return out;
    }

private:
    const Query& q_;

    static std::string join_words(const std::vector<std::string>& items) {
        if (items.size() <= 1) return items.empty() ? std::string() : items.front();
        std::vector<std::string> head(items.begin(), items.end() - 1);
        return join(head, ", ") + " and " + items.back();
    }

    static std::string join_column(const Predicate& p, const TableRef& table) {
        const auto* r = std::get_if<Operand>(&p.rhs);
        if (r && !r->star && r->column.table == table.name && r->column.occurrence == table.occurrence)
            return r->column.column;
        return p.lhs.lhs.star ? std::string("*") : p.lhs.lhs.column.column;
    }

    static std::string_view agg_word(Agg a) {
        switch (a) {
            case Agg::count: return "count";
            case Agg::sum: return "sum";
            case Agg::avg: return "average";
            case Agg::min: return "minimum";
            case Agg::max: return "maximum";
            default: return "";
        }
    }

    std::string count_star() const {
        if (q_.group_by.size() == 1) return "the count of each " + q_.group_by.front().column.column;
        return "the number of records";
    }

    std::string operand(const Operand& o) const {
        if (o.star) return o.agg == Agg::count ? count_star() : std::string("all columns");
        const std::string col = o.column.column;
        if (o.agg == Agg::none) return "the " + col + " column";
        return "the " + std::string(agg_word(o.agg)) + " of " + (o.distinct ? "distinct values of " : "") + "the " +
               col + " column";
    }

    std::string val_unit(const ValUnit& v) const {
        if (v.op == ArithOp::none || !v.rhs) return operand(v.lhs);
        static const char* words[] = {"", "plus", "minus", "times", "divided by"};
        return operand(v.lhs) + " " + words[static_cast<int>(v.op)] + " " + operand(*v.rhs);
    }

    std::string select_item(const SelectItem& s) const {
        if (s.agg == Agg::none) return val_unit(s.value);
        if (s.value.op == ArithOp::none && s.value.lhs.star) {
            Operand o = s.value.lhs;
            o.agg = s.agg;
            return operand(o);
        }
        if (s.value.op == ArithOp::none) {
            Operand o = s.value.lhs;
            o.agg = s.agg;
            return operand(o);
        }
        return "the " + std::string(agg_word(s.agg)) + " of " + val_unit(s.value);
    }

    std::string value(const Value& v) const {
        if (const auto* lit = std::get_if<Literal>(&v)) return lit->is_string ? "'" + lit->text + "'" : lit->text;
        if (const auto* op = std::get_if<Operand>(&v)) return operand(*op);
        return "the results of a subquery";
    }

    std::string predicate(const Predicate& p) const {
        const std::string lhs = val_unit(p.lhs);
        const bool n = p.negated;
        switch (p.op) {
            case CmpOp::eq: return lhs + (n ? " is not equal to " : " is equal to ") + value(p.rhs);
            case CmpOp::ne: return lhs + (n ? " is equal to " : " is not equal to ") + value(p.rhs);
            case CmpOp::lt: return lhs + " is less than " + value(p.rhs);
            case CmpOp::gt: return lhs + " is greater than " + value(p.rhs);
            case CmpOp::le: return lhs + " is less than or equal to " + value(p.rhs);
            case CmpOp::ge: return lhs + " is greater than or equal to " + value(p.rhs);
            case CmpOp::between:
                return lhs + (n ? " is not between " : " is between ") + value(p.rhs) + " and " +
                       (p.rhs2 ? value(*p.rhs2) : std::string("?"));
            case CmpOp::in: return lhs + (n ? " is not in " : " is in ") + value(p.rhs);
            case CmpOp::like: return lhs + (n ? " does not match the pattern " : " matches the pattern ") + value(p.rhs);
            case CmpOp::is: return lhs + (n ? " is not null" : " is null");
        }
        return lhs;
    }

    std::string condition(const Condition& c) const {
        std::string out = predicate(c.preds.front());
        for (std::size_t i = 1; i < c.preds.size(); ++i)
            out += (c.conj[i - 1] == Conj::or_ ? " or " : " and ") + predicate(c.preds[i]);
        return out;
    }
};

}  // namespace

std::string compose_cot_narration(const Query& query) { return Narrator(query).run(); }

// ---- completions ----

namespace {

std::string clean_sql(std::string sql) {
    sql = trim(sql);
    while (!sql.empty() && sql.back() == ';') {
        sql.pop_back();
        sql = rtrim(sql);
    }
    return sql;
}

bool starts_with_select(std::string_view line) {
    const std::string t = trim(line);
    return t.size() >= 6 && iequals(std::string_view(t).substr(0, 6), "select");
}

// Lines from `first` up to the next blank line, joined by spaces.
std::string block_from(const std::vector<std::string>& lines, std::size_t first) {
    std::vector<std::string> parts;
    for (std::size_t i = first; i < lines.size(); ++i) {
        const std::string t = trim(lines[i]);
        if (t.empty()) {
            if (parts.empty()) continue;
            break;
        }
        if (t.rfind("###", 0) == 0) break;
        parts.push_back(t);
    }
    return join(parts, " ");
}

std::vector<std::string> quoted_items(std::string_view text) {
    std::vector<std::string> out;
    std::size_t pos = 0;
    while ((pos = text.find(kOpenQuote, pos)) != std::string_view::npos) {
        const std::size_t start = pos + kOpenQuote.size();
        const std::size_t end = text.find(kCloseQuote, start);
        if (end == std::string_view::npos) break;
        out.push_back(trim(text.substr(start, end - start)));
        pos = end + kCloseQuote.size();
    }
    if (!out.empty()) return out;
    pos = 0;
    while ((pos = text.find('"', pos)) != std::string_view::npos) {
        const std::size_t end = text.find('"', pos + 1);
        if (end == std::string_view::npos) break;
        out.push_back(trim(text.substr(pos + 1, end - pos - 1)));
        pos = end + 1;
    }
    return out;
}

}  // namespace

ParsedCompletion parse_completion(std::string_view raw, PromptMethod method) {
    ParsedCompletion out;
    const std::string text = normalize_newlines(raw);
    const std::vector<std::string> lines = split_lines(text);

    switch (method) {
        case PromptMethod::standard: {
            const std::size_t blank = text.find("\n\n", text.find_first_not_of(" \t\n"));
            out.sql = clean_sql(text.substr(0, blank));
            break;
        }
        case PromptMethod::cot:
        case PromptMethod::qdecomp:
        case PromptMethod::qdecomp_intercol: {
            std::optional<std::size_t> marker;
            for (std::size_t i = 0; i < lines.size(); ++i) {
                const std::string t = trim(lines[i]);
                if (t.rfind(kAnswerMarker, 0) == 0) marker = i;
            }
            const std::size_t end = marker ? *marker : lines.size();
            for (std::size_t i = 0; i < end; ++i) {
                const std::string t = trim(lines[i]);
                if (method == PromptMethod::cot) {
                    if (t.size() > 2 && t.rfind("# ", 0) == 0 && t != "# Let's think step by step")
                        out.steps.push_back(t.substr(2));
                } else {
                    std::size_t k = 0;
                    while (k < t.size() && std::isdigit(static_cast<unsigned char>(t[k]))) ++k;
                    if (k > 0 && k + 1 < t.size() && t[k] == '.' && t[k + 1] == ' ') out.steps.push_back(trim(t.substr(k + 2)));
                }
            }
            if (marker) {
                out.sql = clean_sql(block_from(lines, *marker + 1));
            } else {
                for (std::size_t i = lines.size(); i-- > 0;) {
                    if (starts_with_select(lines[i])) {
                        out.sql = clean_sql(block_from(lines, i));
                        break;
                    }
                }
            }
            break;
        }
        case PromptMethod::ltm_solving: {
            for (std::size_t i = lines.size(); i-- > 0;) {
                const std::string t = trim(lines[i]);
                if (t.rfind("A:", 0) == 0) {
                    std::vector<std::string> rest = {t.substr(2)};
                    for (std::size_t k = i + 1; k < lines.size() && !trim(lines[k]).empty(); ++k)
                        rest.push_back(trim(lines[k]));
                    out.sql = clean_sql(join(rest, " "));
                    break;
                }
            }
            if (out.sql.empty()) {
                for (const std::string& l : lines) {
                    if (starts_with_select(l)) {
                        out.sql = clean_sql(l);
                        break;
                    }
                }
            }
            break;
        }
        case PromptMethod::ltm_reduction: {
            const std::string first = text.substr(0, text.find("\n\n"));
            out.steps = quoted_items(first);
            out.extraction_failed = out.steps.empty();
            return out;
        }
    }
    out.extraction_failed = out.sql.empty();
    return out;
}

}  // namespace t2sql
