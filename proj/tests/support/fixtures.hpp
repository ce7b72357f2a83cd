#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "t2sql/experiment.hpp"

namespace t2sql::testing {

std::filesystem::path data_dir();      // tests/data in the source tree
std::filesystem::path fixtures_dir();  // built databases and replicas

// Experiment config over the spider_mini corpus; output under a scratch dir.
ExperimentConfig mini_config(const std::filesystem::path& output_dir = {});
const Corpus& mini_corpus();

struct GoldenCorpus {
    std::vector<DatabaseSchema> schemas;
    std::map<std::string, SchemaExample> examples;
    std::map<std::string, std::string> narrations;
    std::map<std::string, Decomposition> decompositions;
    std::string ltm_target_sub_question;

    const DatabaseSchema& schema(const std::string& db_id) const;
    Demonstration demo(const std::string& id) const;
    PromptTarget target(const std::string& id) const;
};

const GoldenCorpus& golden_corpus();

// Golden prompt names are the file stems under tests/data/golden/prompts.
std::vector<std::string> golden_prompt_names();
std::string expected_prompt(const std::string& name);
std::string render_golden_prompt(const std::string& name);

std::filesystem::path scratch_dir(const std::string& name);

}  // namespace t2sql::testing
