// One line per acceptance criterion; exit status is the number of failures.
#include <chrono>
#include <cstdio>
#include <fstream>
#include <functional>
#include <iostream>
#include <set>
#include <sstream>

#include "brute_pairs.hpp"
#include "fixtures.hpp"
#include "query_gen.hpp"
#include "t2sql/decomp.hpp"
#include "t2sql/errors.hpp"
#include "t2sql/eval.hpp"
#include "t2sql/exec.hpp"
#include "t2sql/experiment.hpp"
#include "t2sql/select.hpp"
#include "t2sql/text.hpp"

using namespace t2sql;
using namespace t2sql::testing;
namespace fs = std::filesystem;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
    return std::chrono::duration<double>(Clock::now() - t0).count();
}

// Collects the first few problems of a criterion.
struct Check {
    std::vector<std::string> problems;
    void require(bool ok, const std::string& what) {
        if (!ok) problems.push_back(what);
    }
    std::string summary() const {
        std::string s;
        for (std::size_t i = 0; i < problems.size() && i < 3; ++i) s += (i ? "; " : "") + problems[i];
        if (problems.size() > 3) s += "; +" + std::to_string(problems.size() - 3) + " more";
        return s;
    }
};

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::string fmt(double v, int prec = 3) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.*f", prec, v);
    return buf;
}

const SchemaExample& train_by_question(const std::string& prefix) {
    for (const SchemaExample& e : mini_corpus().train)
        if (e.question.rfind(prefix, 0) == 0) return e;
    throw std::runtime_error("no train example starting with " + prefix);
}

const SchemaExample& dev(const std::string& id) {
    for (const SchemaExample& e : mini_corpus().dev)
        if (e.example_id == id) return e;
    throw std::runtime_error("no dev example " + id);
}

std::vector<std::pair<std::string, std::string>> lower_pairs(const std::vector<Annotation>& anns) {
    std::vector<std::pair<std::string, std::string>> out;
    for (const Annotation& a : anns) out.push_back({to_lower(a.ref.table_display), to_lower(a.ref.column_display)});
    return out;
}

ExampleVerdict score(const PredictionRecord& r, bool with_replicas) {
    const SchemaExample& g = dev(r.example_id);
    const auto replicas = with_replicas ? list_replicas(fixtures_dir() / "replicas", g.db_id)
                                        : std::vector<fs::path>{};
    return score_prediction(r, g, mini_corpus().schema(g.db_id), database_path(fixtures_dir() / "database", g.db_id),
                            replicas);
}

PredictionRecord record(const std::string& id, const std::string& sql) {
    PredictionRecord r;
    r.example_id = id;
    r.method = "standard";
    r.format = "api_docs";
    r.predicted_sql = sql;
    return r;
}

// ---- criteria ----

std::string golden_prompts(Check& c) {
    double worst = 0;
    const auto names = golden_prompt_names();
    for (const std::string& n : names) {
        const auto t0 = Clock::now();
        const std::string got = render_golden_prompt(n);
        const double secs = seconds_since(t0);
        worst = std::max(worst, secs);
        c.require(got == expected_prompt(n), n + " differs");
        c.require(secs < 1.0, n + " took " + fmt(secs) + "s");
    }
    c.require(names.size() == 8, "expected 8 golden prompts, found " + std::to_string(names.size()));
    return std::to_string(names.size()) + " golden prompts byte-exact, slowest " + fmt(worst * 1000, 1) + "ms";
}

std::string intercol(Check& c) {
    const Corpus& corpus = mini_corpus();
    const auto t0 = Clock::now();
    const AnnotationResult res = annotate_corpus(corpus, corpus.train, 0);
    const double secs = seconds_since(t0);
    c.require(corpus.train.size() == 100, "train slice has " + std::to_string(corpus.train.size()) + " examples");
    c.require(secs < 10.0, "took " + fmt(secs) + "s");

    for (const AnnotatedExample& a : res.annotated) {
        const std::string& id = a.example.example_id;
        const auto& steps = a.decomposition.steps;
        std::set<LowerPair> all;
        for (const DecompStep& s : steps) {
            c.require(!s.annotations.empty(), id + " has an empty step");
            std::set<LowerPair> mine;
            for (const Annotation& ann : s.annotations)
                if (ann.origin != PairOrigin::fallback) mine.insert({ann.ref.table, ann.ref.column});
            for (const ColumnRef& r : s.skipped) mine.insert({r.table, r.column});
            for (const LowerPair& p : mine) c.require(all.insert(p).second, id + " repeats " + p.first + "." + p.second);
        }
        const BrutePairs brute = brute_force_pairs(*steps.back().partial_sql, corpus.schema(a.example.db_id));
        for (const LowerPair& p : brute.pairs) c.require(all.count(p) > 0, id + " lost " + p.first + "." + p.second);
        std::size_t extra = 0;
        for (const LowerPair& p : all) {
            if (brute.pairs.count(p)) continue;
            ++extra;
            bool scoped = false;
            for (const auto& scope : brute.star_scopes) scoped |= scope.count(p.first) > 0;
            c.require(scoped, id + " invented " + p.first + "." + p.second);
        }
        c.require(extra <= brute.star_scopes.size(), id + " has too many star picks");
    }

    const SchemaExample& student = train_by_question("Show first name, last name, age for all female");
    const Decomposition fig = decompose_example(student, corpus.schema(student.db_id), 0);
    const bool fig_ok = fig.steps.size() == 2 &&
                        lower_pairs(fig.steps[0].annotations) ==
                            std::vector<std::pair<std::string, std::string>>{
                                {"student", "fname"}, {"student", "lname"}, {"student", "age"}} &&
                        lower_pairs(fig.steps[1].annotations) ==
                            std::vector<std::pair<std::string, std::string>>{{"student", "sex"}};
    c.require(fig_ok, "student example annotations differ");

    const SchemaExample& grants = train_by_question("Find out the send dates");
    const Decomposition got = decompose_example(grants, corpus.schema(grants.db_id), 0);
    const Decomposition& want = golden_corpus().decompositions.at("grants");
    bool grants_ok = got.steps.size() == want.steps.size();
    for (std::size_t i = 0; grants_ok && i < want.steps.size(); ++i)
        grants_ok = got.steps[i].sub_question == want.steps[i].sub_question &&
                    lower_pairs(got.steps[i].annotations) == lower_pairs(want.steps[i].annotations);
    c.require(grants_ok, "grants example differs");

    return std::to_string(res.annotated.size()) + "/100 annotated, properties checked against brute force, " +
           fmt(secs, 2) + "s";
}

std::string hardness(Check& c) {
    const auto j = nlohmann::json::parse(read_file((data_dir() / "hardness" / "queries.json").string()));
    int agree = 0;
    for (const auto& e : j) {
        const std::string q = e.at("query").get<std::string>();
        const Hardness got = classify_hardness(parse_sql(q, mini_corpus().schema(e.at("db_id").get<std::string>())));
        const bool ok = got == hardness_from_string(e.at("level").get<std::string>());
        agree += ok;
        c.require(ok, q);
    }
    c.require(j.size() == 50, "fixture has " + std::to_string(j.size()) + " queries");
    return std::to_string(agree) + "/" + std::to_string(j.size()) + " agree";
}

std::string metrics(Check& c) {
    std::vector<ExampleVerdict> verdicts;
    std::ifstream in(data_dir() / "metrics" / "predictions.jsonl");
    for (std::string line; std::getline(in, line);)
        if (!trim(line).empty()) verdicts.push_back(score(prediction_from_json(nlohmann::json::parse(line)), false));
    const AggregateRow row = aggregate(verdicts).aggregates.at(0);
    const std::string ex = fmt(row.metrics.at("ex").mean), em = fmt(row.metrics.at("em").mean);
    const auto& b = row.buckets;
    const auto n = [&](ErrorBucket k) { return b.count(k) ? b.at(k) : 0; };
    c.require(ex == "0.700", "EX " + ex);
    c.require(em == "0.500", "EM " + em);
    c.require(n(ErrorBucket::invalid_sql) == 1, "invalid " + std::to_string(n(ErrorBucket::invalid_sql)));
    c.require(n(ErrorBucket::semantic_incorrect) == 2, "semantic " + std::to_string(n(ErrorBucket::semantic_incorrect)));
    c.require(n(ErrorBucket::ambiguous_correct_candidate) == 0, "unexpected ambiguous bucket");
    return "EX " + ex + ", EM " + em + ", buckets {invalid:" + std::to_string(n(ErrorBucket::invalid_sql)) +
           ", semantic:" + std::to_string(n(ErrorBucket::semantic_incorrect)) + "}";
}

std::string relaxation(Check& c) {
    std::vector<ExampleVerdict> verdicts;
    std::ifstream in(data_dir() / "metrics" / "predictions.jsonl");
    for (std::string line; std::getline(in, line);)
        if (!trim(line).empty()) verdicts.push_back(score(prediction_from_json(nlohmann::json::parse(line)), false));
    const AggregateRow row = aggregate(verdicts).aggregates.at(0);
    for (Family f : kAllFamilies) {
        const std::string name(to_string(f));
        c.require(row.metrics.at("component." + name).mean >= row.metrics.at("component_strict." + name).mean,
                  name + " lower with relaxation");
    }
    const ExampleVerdict v = score(record("dev_0003", "SELECT song_name ,  song_release_year FROM singer WHERE age  =  "
                                                      "(SELECT min(age) FROM singer)"),
                                   false);
    c.require(v.exec_ok && !v.exact_ok, "rewrite should be exec-correct and not an exact match");
    int flipped = 0;
    for (Family f : kAllFamilies) {
        c.require(v.component_ok.at(f), std::string(to_string(f)) + " not correct after relaxation");
        flipped += v.component_ok.at(f);
    }
    return "relaxed >= strict for all families, rewrite correct on " + std::to_string(flipped) + "/5";
}

std::string adversarial(Check& c) {
    const ExampleVerdict v = score(record("dev_0000", "SELECT count(*) FROM concert"), true);
    c.require(v.exec_ok, "prediction should match on the primary database");
    c.require(v.multi_db_ok.has_value() && !*v.multi_db_ok, "prediction should fail multi_db_equivalent");
    c.require(!v.correct(), "prediction should not count as correct");
    const ExampleVerdict good = score(record("dev_0000", "SELECT count(*) FROM singer"), true);
    c.require(good.multi_db_ok.value_or(false), "gold-equivalent prediction should pass on all replicas");
    return "primary-correct prediction rejected by a replica set of " +
           std::to_string(list_replicas(fixtures_dir() / "replicas", "concert_singer").size());
}

std::string replay(Check& c) {
    ExperimentConfig base = load_config(T2SQL_REPLAY_CONFIG);
    const std::string golden = slurp(T2SQL_REPLAY_GOLDEN);
    c.require(base.backend.kind == "replay", "config does not use the replay backend");
    c.require(base.methods.size() == 5 && base.shots == 4 && base.format == "api_docs" && base.limit == 20u &&
                  base.seeds == std::vector<std::uint64_t>{0},
              "config is not 20 x 5 methods, api_docs, 4-shot, seed 0");

    auto fresh = [&](const std::string& name) {
        ExperimentConfig cfg = base;
        cfg.output_dir = scratch_dir("acceptance") / name;
        fs::remove_all(cfg.output_dir);
        return cfg;
    };

    const auto t0 = Clock::now();
    const ExperimentConfig first = fresh("run");
    const RunResult r = run_experiment(first);
    const double secs = seconds_since(t0);
    c.require(secs < 60.0, "took " + fmt(secs) + "s");
    c.require(r.predictions.size() == 100, std::to_string(r.predictions.size()) + " predictions");
    c.require(slurp(first.output_dir / "report.json") == golden, "report.json differs from golden");

    const ExperimentConfig again = fresh("rerun");
    run_experiment(again);
    c.require(slurp(again.output_dir / "report.json") == golden, "rerun differs from golden");

    ExperimentConfig partial = fresh("resume");
    partial.stop_after = 37;
    bool interrupted = false;
    try {
        run_experiment(partial);
    } catch (const RunInterrupted&) {
        interrupted = true;
    }
    c.require(interrupted, "stop_after did not interrupt the run");
    partial.stop_after.reset();
    run_experiment(partial);
    c.require(slurp(partial.output_dir / "report.json") == golden, "resumed run differs from golden");

    return "100 predictions in " + fmt(secs, 2) + "s; run, rerun and resume byte-identical";
}

std::string selection(Check& c) {
    const auto level_of = [](const SchemaExample& e) {
        return classify_hardness(parse_sql(e.gold_sql, mini_corpus().schema(e.db_id)));
    };
    const std::map<SelectionKind, std::map<Hardness, int>> want = {
        {SelectionKind::g1, {{Hardness::easy, 2}, {Hardness::medium, 2}, {Hardness::hard, 2}, {Hardness::extra_hard, 2}}},
        {SelectionKind::g2, {{Hardness::hard, 4}, {Hardness::extra_hard, 4}}},
        {SelectionKind::g3, {{Hardness::extra_hard, 8}}}};
    for (const auto& [kind, hist] : want)
        for (std::uint64_t seed = 0; seed < 5; ++seed) {
            SelectionPolicy p;
            p.kind = kind;
            p.shots = 8;
            p.seed = seed;
            const auto a = select_examples(mini_corpus().train, p, level_of);
            const auto b = select_examples(mini_corpus().train, p, level_of);
            std::map<Hardness, int> h;
            std::vector<std::string> ia, ib;
            for (const auto& e : a) ++h[level_of(e)], ia.push_back(e.example_id);
            for (const auto& e : b) ib.push_back(e.example_id);
            const std::string tag = std::string(to_string(kind)) + " seed " + std::to_string(seed);
            c.require(h == hist, tag + " has the wrong level mix");
            c.require(ia == ib, tag + " is not deterministic");
        }
    return "G1 2/2/2/2, G2 4 hard + 4 extra, G3 8 extra over seeds 0-4";
}

std::string round_trip(Check& c) {
    const auto queries = generate_queries(mini_corpus().schemas, 200, 20240);
    int failures = 0;
    for (const GeneratedQuery& g : queries) {
        const DatabaseSchema& s = mini_corpus().schema(g.db_id);
        bool ok = false;
        try {
            const Query a = parse_sql(g.sql, s);
            const Query canon = parse_sql(render_sql(a), s);
            const Query spider = parse_sql(render_sql(a, RenderStyle::spider), s);
            const Query renamed = parse_sql(g.sql_renamed, s);
            ok = canon == a && spider == a && renamed == a && render_sql(canon) == render_sql(a);
        } catch (const Error&) {
        }
        failures += !ok;
        c.require(ok, g.sql);
    }
    c.require(queries.size() == 200, std::to_string(queries.size()) + " queries generated");
    return std::to_string(queries.size()) + " queries, " + std::to_string(failures) + " failures";
}

}  // namespace

int main() {
    const std::vector<std::pair<std::string, std::function<std::string(Check&)>>> criteria = {
        {"golden prompts", golden_prompts},
        {"intercol annotation", intercol},
        {"hardness agreement", hardness},
        {"metric fixture", metrics},
        {"component relaxation", relaxation},
        {"adversarial replica", adversarial},
        {"replay run", replay},
        {"demonstration selection", selection},
        {"sql round trip", round_trip},
    };
    int failed = 0;
    for (std::size_t i = 0; i < criteria.size(); ++i) {
        Check c;
        std::string detail;
        const auto t0 = Clock::now();
        try {
            detail = criteria[i].second(c);
        } catch (const std::exception& e) {
            c.problems.push_back(std::string("exception: ") + e.what());
        }
        const double secs = seconds_since(t0);
        const bool ok = c.problems.empty();
        failed += !ok;
        std::cout << (ok ? "PASS" : "FAIL") << "  " << i + 1 << " " << criteria[i].first << ": "
                  << (ok ? detail : c.summary()) << " [" << fmt(secs, 2) << "s]\n";
    }
    std::cout << (failed ? std::to_string(failed) + " criteria failed" : std::string("all criteria passed")) << "\n";
    return failed;
}
