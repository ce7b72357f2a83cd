#include "fixtures.hpp"

#include <stdexcept>

#include "t2sql/text.hpp"

namespace fs = std::filesystem;

namespace t2sql::testing {

fs::path data_dir() { return T2SQL_TEST_DATA; }
fs::path fixtures_dir() { return T2SQL_FIXTURES; }

ExperimentConfig mini_config(const fs::path& output_dir) {
    ExperimentConfig c;
    const fs::path mini = data_dir() / "spider_mini";
    c.dataset.tables = mini / "tables.json";
    c.dataset.train = mini / "train.json";
    c.dataset.dev = mini / "dev.json";
    c.dataset.database_dir = fixtures_dir() / "database";
    c.replicas = fixtures_dir() / "replicas";
    c.output_dir = output_dir.empty() ? scratch_dir("run") : output_dir;
    return c;
}

const Corpus& mini_corpus() {
    static const Corpus corpus = load_corpus(mini_config().dataset);
    return corpus;
}

const DatabaseSchema& GoldenCorpus::schema(const std::string& db_id) const {
    for (const DatabaseSchema& s : schemas)
        if (s.db_id == db_id) return s;
    throw std::runtime_error("golden corpus has no schema " + db_id);
}

Demonstration GoldenCorpus::demo(const std::string& id) const {
    Demonstration d;
    d.example = examples.at(id);
    d.schema = schema(d.example.db_id);
    if (auto it = narrations.find(id); it != narrations.end()) d.narration = it->second;
    if (auto it = decompositions.find(id); it != decompositions.end()) d.decomposition = it->second;
    return d;
}

PromptTarget GoldenCorpus::target(const std::string& id) const {
    PromptTarget t;
    t.example = examples.at(id);
    t.schema = schema(t.example.db_id);
    return t;
}

const GoldenCorpus& golden_corpus() {
    static const GoldenCorpus g = [] {
        const auto j = nlohmann::json::parse(read_file((data_dir() / "golden" / "corpus.json").string()));
        GoldenCorpus out;
        for (const auto& s : j.at("schemas")) out.schemas.push_back(schema_from_json(s));
        for (const auto& e : j.at("examples")) {
            SchemaExample x = example_from_json(e);
            out.examples[x.example_id] = x;
        }
        for (const auto& [k, v] : j.at("narrations").items()) out.narrations[k] = v.get<std::string>();
        for (const auto& [k, v] : j.at("decompositions").items()) out.decompositions[k] = decomposition_from_json(v);
        out.ltm_target_sub_question = j.at("ltm_target_sub_question").get<std::string>();
        return out;
    }();
    return g;
}

std::vector<std::string> golden_prompt_names() {
    return {"api_docs_schema", "create_table_select3", "standard_2shot",  "cot_1shot",
            "ltm_reduction_1shot", "ltm_solving_1shot", "qdecomp_1shot", "qdecomp_intercol_1shot"};
}

std::string expected_prompt(const std::string& name) {
    return read_file((data_dir() / "golden" / "prompts" / (name + ".txt")).string());
}

std::string render_golden_prompt(const std::string& name) {
    const GoldenCorpus& g = golden_corpus();
    if (name == "api_docs_schema") return render_schema(g.schema("medicine_enzyme_interaction"), SchemaFormat::api_docs);
    if (name == "create_table_select3") {
        const DatabaseSchema& wine = mini_corpus().schema("wine_1");
        const DatabaseSchema full = attach_content_samples(wine, database_path(fixtures_dir() / "database", "wine_1"));
        return render_schema(full, SchemaFormat::create_table_select3);
    }
    PromptSpec spec;
    spec.target = g.target("singers");
    if (name == "standard_2shot") {
        spec.method = PromptMethod::standard;
        spec.demonstrations = {g.demo("enzymes"), g.demo("industries")};
    } else if (name == "cot_1shot") {
        spec.method = PromptMethod::cot;
        spec.demonstrations = {g.demo("book_club")};
    } else if (name == "ltm_reduction_1shot") {
        spec.method = PromptMethod::ltm_reduction;
        spec.demonstrations = {g.demo("instructors")};
    } else if (name == "ltm_solving_1shot") {
        spec.method = PromptMethod::ltm_solving;
        spec.demonstrations = {g.demo("instructors")};
        spec.target.sub_question = g.ltm_target_sub_question;
    } else if (name == "qdecomp_1shot") {
        spec.method = PromptMethod::qdecomp;
        spec.demonstrations = {g.demo("grants")};
    } else if (name == "qdecomp_intercol_1shot") {
        spec.method = PromptMethod::qdecomp_intercol;
        spec.demonstrations = {g.demo("grants")};
    } else {
        throw std::runtime_error("unknown golden prompt " + name);
    }
    return build_prompt(spec).text;
}

fs::path scratch_dir(const std::string& name) {
    const fs::path p = fs::path(T2SQL_SCRATCH) / name;
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

}  // namespace t2sql::testing
