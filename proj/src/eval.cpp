#include "t2sql/eval.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>
#include <tuple>

#include "t2sql/errors.hpp"
#include "t2sql/text.hpp"

namespace t2sql {

nlohmann::json to_json(const PredictionRecord& r) {
    return {{"example_id", r.example_id},
            {"method", r.method},
            {"format", r.format},
            {"shots", r.shots},
            {"seed", r.seed},
            {"selection", r.selection},
            {"predicted_sql", r.predicted_sql},
            {"reasoning", r.reasoning},
            {"transcript_refs", r.transcript_refs},
            {"extraction_failed", r.extraction_failed},
            {"error", r.error}};
}

PredictionRecord prediction_from_json(const nlohmann::json& j) {
    PredictionRecord r;
    r.example_id = j.at("example_id").get<std::string>();
    r.method = j.value("method", std::string());
    r.format = j.value("format", std::string());
    r.shots = j.value("shots", 0);
    r.seed = j.value("seed", std::uint64_t{0});
    r.selection = j.value("selection", std::string("random"));
    r.predicted_sql = j.value("predicted_sql", std::string());
    r.reasoning = j.value("reasoning", std::vector<std::string>{});
    r.transcript_refs = j.value("transcript_refs", std::vector<std::string>{});
    r.extraction_failed = j.value("extraction_failed", false);
    r.error = j.value("error", std::string());
    return r;
}

std::vector<PredictionRecord> load_predictions(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open predictions " + path.string());
    std::vector<PredictionRecord> out;
    std::string line;
    std::size_t n = 0;
    while (std::getline(in, line)) {
        ++n;
        if (trim(line).empty()) continue;
        try {
            out.push_back(prediction_from_json(nlohmann::json::parse(line)));
        } catch (const nlohmann::json::exception& e) {
            throw Error(path.string() + ":" + std::to_string(n) + ": " + e.what());
        }
    }
    return out;
}

std::string_view to_string(ErrorBucket bucket) {
    switch (bucket) {
        case ErrorBucket::invalid_sql: return "invalid_sql";
        case ErrorBucket::semantic_incorrect: return "semantic_incorrect";
        default: return "ambiguous_correct_candidate";
    }
}

nlohmann::json to_json(const ExampleVerdict& v) {
    nlohmann::json comps = nlohmann::json::object(), strict = nlohmann::json::object();
    for (const auto& [f, ok] : v.component_ok) comps[std::string(to_string(f))] = ok;
    for (const auto& [f, ok] : v.component_ok_strict) strict[std::string(to_string(f))] = ok;
    nlohmann::json j = {{"example_id", v.example_id},
                        {"method", v.method},
                        {"format", v.format},
                        {"shots", v.shots},
                        {"seed", v.seed},
                        {"selection", v.selection},
                        {"exec_ok", v.exec_ok},
                        {"exact_ok", v.exact_ok},
                        {"component_ok", comps},
                        {"component_ok_strict", strict},
                        {"hardness", std::string(to_string(v.hardness))}};
    j["multi_db_ok"] = v.multi_db_ok ? nlohmann::json(*v.multi_db_ok) : nlohmann::json(nullptr);
    j["error_bucket"] = v.bucket ? nlohmann::json(std::string(to_string(*v.bucket))) : nlohmann::json(nullptr);
    return j;
}

ExampleVerdict verdict_from_json(const nlohmann::json& j) {
    ExampleVerdict v;
    v.example_id = j.at("example_id").get<std::string>();
    v.method = j.value("method", std::string());
    v.format = j.value("format", std::string());
    v.shots = j.value("shots", 0);
    v.seed = j.value("seed", std::uint64_t{0});
    v.selection = j.value("selection", std::string());
    v.exec_ok = j.value("exec_ok", false);
    v.exact_ok = j.value("exact_ok", false);
    if (j.contains("multi_db_ok") && !j["multi_db_ok"].is_null()) v.multi_db_ok = j["multi_db_ok"].get<bool>();
    for (Family f : kAllFamilies) {
        const std::string name(to_string(f));
        if (j.contains("component_ok") && j["component_ok"].contains(name))
            v.component_ok[f] = j["component_ok"][name].get<bool>();
        if (j.contains("component_ok_strict") && j["component_ok_strict"].contains(name))
            v.component_ok_strict[f] = j["component_ok_strict"][name].get<bool>();
    }
    v.hardness = hardness_from_string(j.value("hardness", std::string("easy")));
    if (j.contains("error_bucket") && !j["error_bucket"].is_null()) {
        const std::string b = j["error_bucket"].get<std::string>();
        for (ErrorBucket e : {ErrorBucket::invalid_sql, ErrorBucket::semantic_incorrect,
                              ErrorBucket::ambiguous_correct_candidate})
            if (to_string(e) == b) v.bucket = e;
    }
    return v;
}

// ---- scoring ----

ExecScore score_execution(const std::string& pred_sql, const std::string& gold_sql, const std::filesystem::path& db_file,
                          const std::vector<std::filesystem::path>& replicas, const ScoreOptions& options) {
    ExecScore out;
    try {
        out.gold = execute_query(gold_sql, db_file, options.timeout_ms);
    } catch (const ExecutionError& e) {
        throw FixtureIntegrityError("gold query fails on " + db_file.string() + ": " + e.what());
    }
    if (trim(pred_sql).empty()) {
        out.pred_failed = true;
    } else {
        try {
            out.pred = execute_query(pred_sql, db_file, options.timeout_ms);
            out.exec_ok = compare_denotations(*out.pred, out.gold, options.compare);
        } catch (const ExecutionError&) {
            out.pred_failed = true;
        }
    }
    if (!replicas.empty()) {
        out.multi_db_ok = out.pred_failed
                              ? false
                              : multi_db_equivalent(pred_sql, gold_sql, replicas, options.compare, options.timeout_ms);
    }
    return out;
}

std::map<Family, bool> score_components(const Query* pred, const Query& gold, bool exec_relaxation,
                                        bool whole_query_correct, const MatchOptions& options) {
    std::map<Family, bool> out;
    if (pred) {
        out = compare_components(*pred, gold, options);
    } else {
        for (Family f : kAllFamilies) out[f] = false;
    }
    if (exec_relaxation && whole_query_correct)
        for (auto& [f, ok] : out) ok = true;
    return out;
}

namespace {

// Pred selects every gold column (and more), and its rows projected on
// those columns reproduce the gold denotation.
bool ambiguous_candidate(const Query* pred, const Query& gold, const ExecScore& exec, const CompareOptions& cmp) {
    if (!pred || !exec.pred || pred->select.size() <= gold.select.size()) return false;
    std::vector<std::size_t> idx;
    std::vector<bool> used(pred->select.size(), false);
    for (const SelectItem& g : gold.select) {
        bool found = false;
        for (std::size_t i = 0; i < pred->select.size(); ++i) {
            if (!used[i] && pred->select[i] == g) {
                used[i] = true;
                idx.push_back(i);
                found = true;
                break;
            }
        }
        if (!found) return false;
    }
    Denotation projected;
    projected.ordered = exec.pred->ordered;
    for (const DenotationRow& row : exec.pred->rows) {
        DenotationRow r;
        for (std::size_t i : idx) {
            if (i >= row.size()) return false;
            r.push_back(row[i]);
        }
        projected.rows.push_back(std::move(r));
    }
    return compare_denotations(projected, exec.gold, cmp);
}

}  // namespace

ExampleVerdict score_prediction(const PredictionRecord& record, const SchemaExample& gold,
                                const DatabaseSchema& schema, const std::filesystem::path& db_file,
                                const std::vector<std::filesystem::path>& replicas, const ScoreOptions& options) {
    ExampleVerdict v;
    v.example_id = record.example_id;
    v.method = record.method;
    v.format = record.format;
    v.shots = record.shots;
    v.seed = record.seed;
    v.selection = record.selection;

    const Query gold_ast = parse_sql(gold.gold_sql, schema);
    v.hardness = classify_hardness(gold_ast);

    std::optional<Query> pred_ast;
    try {
        if (!trim(record.predicted_sql).empty()) pred_ast = parse_sql(record.predicted_sql, schema);
    } catch (const Error&) {
        // outside the supported dialect; execution still decides correctness
    }
    const ExecScore exec = score_execution(record.predicted_sql, gold.gold_sql, db_file, replicas, options);
    v.exec_ok = exec.exec_ok;
    v.multi_db_ok = exec.multi_db_ok;
    v.exact_ok = pred_ast && exact_match(*pred_ast, gold_ast, options.match);
    const Query* p = pred_ast ? &*pred_ast : nullptr;
    v.component_ok_strict = score_components(p, gold_ast, false, v.correct(), options.match);
    v.component_ok = score_components(p, gold_ast, true, v.correct(), options.match);

    if (!v.correct()) {
        if (exec.pred_failed) {
            v.bucket = ErrorBucket::invalid_sql;
        } else if (ambiguous_candidate(p, gold_ast, exec, options.compare)) {
            v.bucket = ErrorBucket::ambiguous_correct_candidate;
        } else {
            v.bucket = ErrorBucket::semantic_incorrect;
        }
    }
    return v;
}

std::map<ErrorBucket, std::size_t> bucket_errors(const std::vector<ExampleVerdict>& verdicts) {
    std::map<ErrorBucket, std::size_t> out = {{ErrorBucket::invalid_sql, 0},
                                              {ErrorBucket::semantic_incorrect, 0},
                                              {ErrorBucket::ambiguous_correct_candidate, 0}};
    for (const ExampleVerdict& v : verdicts)
        if (v.bucket) ++out[*v.bucket];
    return out;
}

// ---- aggregation ----

MetricStat summarize(const std::vector<double>& per_seed) {
    MetricStat s;
    s.per_seed = per_seed;
    if (per_seed.empty()) return s;
    double sum = 0;
    for (double x : per_seed) sum += x;
    s.mean = sum / static_cast<double>(per_seed.size());
    if (per_seed.size() >= 2) {
        double ss = 0;
        for (double x : per_seed) ss += (x - s.mean) * (x - s.mean);
        s.stddev = std::sqrt(ss / static_cast<double>(per_seed.size() - 1));
    }
    return s;
}

namespace {

constexpr Hardness kLevels[] = {Hardness::easy, Hardness::medium, Hardness::hard, Hardness::extra_hard};

using GroupKey = std::tuple<std::string, std::string, int, std::string>;

double fraction(std::size_t num, std::size_t den) { return den == 0 ? 0.0 : static_cast<double>(num) / den; }

}  // namespace

EvalReport aggregate(std::vector<ExampleVerdict> verdicts) {
    std::stable_sort(verdicts.begin(), verdicts.end(), [](const ExampleVerdict& a, const ExampleVerdict& b) {
        return std::tie(a.method, a.format, a.shots, a.selection, a.seed, a.example_id) <
               std::tie(b.method, b.format, b.shots, b.selection, b.seed, b.example_id);
    });
    EvalReport report;
    report.per_example = verdicts;

    std::map<GroupKey, std::map<std::uint64_t, std::vector<const ExampleVerdict*>>> groups;
    for (const ExampleVerdict& v : report.per_example)
        groups[{v.method, v.format, v.shots, v.selection}][v.seed].push_back(&v);

    for (const auto& [key, seeds] : groups) {
        AggregateRow row;
        std::tie(row.method, row.format, row.shots, row.selection) = key;
        std::map<std::string, std::vector<double>> series;
        for (const auto& [seed, rows] : seeds) {
            row.seeds.push_back(seed);
            row.examples = std::max(row.examples, rows.size());
            std::size_t ex = 0, ts = 0, em = 0, acc = 0, with_ts = 0;
            std::map<Family, std::size_t> comp, comp_strict;
            std::map<Hardness, std::pair<std::size_t, std::size_t>> level;
            for (const ExampleVerdict* v : rows) {
                ex += v->exec_ok;
                em += v->exact_ok;
                acc += v->correct();
                if (v->multi_db_ok) {
                    ++with_ts;
                    ts += *v->multi_db_ok;
                }
                for (Family f : kAllFamilies) {
                    comp[f] += v->component_ok.count(f) && v->component_ok.at(f);
                    comp_strict[f] += v->component_ok_strict.count(f) && v->component_ok_strict.at(f);
                }
                level[v->hardness].first += v->correct();
                ++level[v->hardness].second;
                if (v->bucket) ++row.buckets[*v->bucket];
            }
            const std::size_t n = rows.size();
            series["ex"].push_back(fraction(ex, n));
            series["em"].push_back(fraction(em, n));
            series["acc"].push_back(fraction(acc, n));
            if (with_ts > 0) {
                row.has_test_suite = true;
                series["ts"].push_back(fraction(ts, with_ts));
            }
            for (Family f : kAllFamilies) {
                series["component." + std::string(to_string(f))].push_back(fraction(comp[f], n));
                series["component_strict." + std::string(to_string(f))].push_back(fraction(comp_strict[f], n));
            }
            for (Hardness h : kLevels)
                if (level[h].second > 0)
                    series["level." + std::string(to_string(h))].push_back(fraction(level[h].first, level[h].second));
        }
        for (const auto& [name, values] : series) row.metrics[name] = summarize(values);
        for (ErrorBucket b : {ErrorBucket::invalid_sql, ErrorBucket::semantic_incorrect,
                              ErrorBucket::ambiguous_correct_candidate})
            row.buckets.emplace(b, 0);
        report.aggregates.push_back(std::move(row));
    }
    return report;
}

nlohmann::json report_to_json(const EvalReport& report) {
    nlohmann::json per = nlohmann::json::array();
    for (const ExampleVerdict& v : report.per_example) per.push_back(to_json(v));
    nlohmann::json aggs = nlohmann::json::array();
    for (const AggregateRow& r : report.aggregates) {
        nlohmann::json metrics = nlohmann::json::object();
        for (const auto& [name, s] : r.metrics) {
            metrics[name] = {{"mean", s.mean},
                             {"std", s.stddev ? nlohmann::json(*s.stddev) : nlohmann::json(nullptr)},
                             {"per_seed", s.per_seed}};
        }
        nlohmann::json buckets = nlohmann::json::object();
        for (const auto& [b, n] : r.buckets) buckets[std::string(to_string(b))] = n;
        aggs.push_back({{"method", r.method},
                        {"format", r.format},
                        {"shots", r.shots},
                        {"selection", r.selection},
                        {"seeds", r.seeds},
                        {"examples", r.examples},
                        {"has_test_suite", r.has_test_suite},
                        {"metrics", metrics},
                        {"buckets", buckets}});
    }
    return {{"per_example", per}, {"aggregates", aggs}};
}

// ---- text tables ----

namespace {

std::string pct(double x, int decimals) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.*f", decimals, x * 100.0);
    return buf;
}

std::string cell(const AggregateRow& r, const std::string& metric) {
    auto it = r.metrics.find(metric);
    if (it == r.metrics.end() || it->second.per_seed.empty()) return "";
    std::string out = pct(it->second.mean, 1);
    if (it->second.stddev) out += " ± " + pct(*it->second.stddev, 2);
    return out;
}

std::string average_cell(const AggregateRow& r) {
    if (!r.has_test_suite) return cell(r, "ex");
    std::string out = cell(r, "ts");
    auto it = r.metrics.find("ex");
    if (it != r.metrics.end()) out += " (EX " + pct(it->second.mean, 1) + ")";
    return out;
}

std::string format_label(const std::string& f) {
    if (f == "api_docs") return "API Docs";
    if (f == "create_table_select3") return "Create Table + Select 3";
    return f;
}

std::string selection_label(const std::string& s) {
    if (s == "random") return "Random";
    return to_upper(s);
}

// Display width in code points, so "±" counts once.
std::size_t width_of(const std::string& s) {
    std::size_t n = 0;
    for (unsigned char c : s)
        if ((c & 0xC0) != 0x80) ++n;
    return n;
}

std::string table(const std::string& title, const std::vector<std::string>& header,
                  const std::vector<std::vector<std::string>>& rows) {
    std::vector<std::size_t> w(header.size(), 0);
    for (std::size_t i = 0; i < header.size(); ++i) w[i] = width_of(header[i]);
    for (const auto& r : rows)
        for (std::size_t i = 0; i < r.size() && i < w.size(); ++i) w[i] = std::max(w[i], width_of(r[i]));
    auto line = [&](const std::vector<std::string>& cells) {
        std::string out;
        for (std::size_t i = 0; i < w.size(); ++i) {
            const std::string c = i < cells.size() ? cells[i] : "";
            const std::string pad(w[i] - width_of(c), ' ');
            if (i > 0) out += " | ";
            out += i == 0 ? c + pad : pad + c;
        }
        return rtrim(out) + "\n";
    };
    std::string out = title + "\n" + line(header);
    std::size_t total = 0;
    for (std::size_t x : w) total += x;
    out += std::string(total + 3 * (w.size() - 1), '-') + "\n";
    for (const auto& r : rows) out += line(r);
    return out;
}

std::string row_label(const AggregateRow& r) {
    return r.method + " / " + r.format + " / " + std::to_string(r.shots) + "-shot / " + r.selection;
}

}  // namespace

std::string render_report_table(const EvalReport& report) {
    std::string out;

    {
        std::vector<std::vector<std::string>> rows;
        for (const AggregateRow& r : report.aggregates)
            rows.push_back({row_label(r), cell(r, "level.easy"), cell(r, "level.medium"), cell(r, "level.hard"),
                            cell(r, "level.extra"), average_cell(r)});
        out += table("Accuracy by hardness", {"Method", "Simple", "Medium", "Hard", "Extra Hard", "Average"}, rows);
    }
    out += "\n";
    {
        std::vector<std::vector<std::string>> rows;
        for (const AggregateRow& r : report.aggregates)
            rows.push_back({row_label(r), cell(r, "component.SELECT"), cell(r, "component.WHERE"),
                            cell(r, "component.GROUP BY"), cell(r, "component.ORDER BY"),
                            cell(r, "component.KEYWORDS")});
        out += table("Component matching", {"Method", "SELECT", "WHERE", "GROUP BY", "ORDER BY", "KEYWORDS"}, rows);
    }
    out += "\n";
    {
        std::set<int> shot_set = {0, 1, 4, 8};
        for (const AggregateRow& r : report.aggregates) shot_set.insert(r.shots);
        std::vector<std::string> header = {"Method"};
        for (int s : shot_set) header.push_back(std::to_string(s) + "-shot");
        std::map<std::string, std::vector<std::string>> rows;
        for (const AggregateRow& r : report.aggregates) {
            const std::string label = r.method + " / " + r.format + " / " + r.selection;
            auto& row = rows[label];
            if (row.empty()) {
                row.assign(header.size(), "");
                row[0] = label;
            }
            row[1 + std::distance(shot_set.begin(), shot_set.find(r.shots))] = cell(r, "acc");
        }
        std::vector<std::vector<std::string>> flat;
        for (auto& [k, v] : rows) flat.push_back(v);
        out += table("Accuracy by shot count", header, flat);
    }
    out += "\n";
    {
        const std::vector<std::string> kinds = {"random", "g1", "g2", "g3"};
        std::map<std::string, std::vector<std::string>> rows;
        for (const AggregateRow& r : report.aggregates) {
            const std::string label = r.method + " / " + r.format + " / " + std::to_string(r.shots) + "-shot";
            auto& row = rows[label];
            if (row.empty()) {
                row.assign(kinds.size() + 1, "");
                row[0] = label;
            }
            auto it = std::find(kinds.begin(), kinds.end(), r.selection);
            if (it != kinds.end()) row[1 + (it - kinds.begin())] = cell(r, "acc");
        }
        std::vector<std::vector<std::string>> flat;
        for (auto& [k, v] : rows) flat.push_back(v);
        std::vector<std::string> header = {"Method"};
        for (const auto& k : kinds) header.push_back(selection_label(k));
        out += table("Accuracy by demonstration selection", header, flat);
    }
    out += "\n";
    {
        const std::vector<std::string> formats = {"api_docs", "create_table_select3"};
        std::map<std::string, std::vector<std::string>> rows;
        for (const AggregateRow& r : report.aggregates) {
            const std::string label = r.method + " / " + std::to_string(r.shots) + "-shot / " + r.selection;
            auto& row = rows[label];
            if (row.empty()) {
                row.assign(formats.size() + 1, "");
                row[0] = label;
            }
            auto it = std::find(formats.begin(), formats.end(), r.format);
            if (it != formats.end()) row[1 + (it - formats.begin())] = cell(r, "acc");
        }
        std::vector<std::vector<std::string>> flat;
        for (auto& [k, v] : rows) flat.push_back(v);
        out += table("Accuracy by prompt format", {"Method", format_label(formats[0]), format_label(formats[1])}, flat);
    }
    out += "\n";
    {
        std::vector<std::vector<std::string>> rows;
        for (const AggregateRow& r : report.aggregates) {
            auto n = [&](ErrorBucket b) {
                auto it = r.buckets.find(b);
                return std::to_string(it == r.buckets.end() ? 0 : it->second);
            };
            rows.push_back({row_label(r), n(ErrorBucket::invalid_sql), n(ErrorBucket::semantic_incorrect),
                            n(ErrorBucket::ambiguous_correct_candidate)});
        }
        out += table("Error buckets (all seeds)", {"Method", "invalid_sql", "semantic_incorrect", "ambiguous_correct_candidate"},
                     rows);
    }
    return out;
}

}  // namespace t2sql
