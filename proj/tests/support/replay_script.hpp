#pragma once

#include <map>
#include <string>

#include "t2sql/experiment.hpp"

namespace t2sql::testing {

// Deterministic stand-in for the model, used to record the replay fixture.
// It reads the target question back out of the prompt and answers in the
// shape each method expects: mostly the gold query, sometimes a wrong or
// broken one, chosen by a hash of (example, method).
class ScriptedModel {
public:
    explicit ScriptedModel(const Corpus& corpus);
    std::string complete(const CompletionRequest& request) const;

private:
    struct Target {
        const SchemaExample* example = nullptr;
        std::vector<std::string> sub_questions;
        std::vector<std::string> partial_sql;
        std::vector<std::string> annotations;
    };
    const Corpus& corpus_;
    std::map<std::string, Target> by_question_;
    std::map<std::string, std::pair<const Target*, std::size_t>> by_sub_question_;

    std::string answer(const Target& t, const std::string& method) const;
    const Target& find(const std::string& question) const;
};

}  // namespace t2sql::testing
