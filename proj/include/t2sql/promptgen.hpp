#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "t2sql/dataset.hpp"
#include "t2sql/decomp.hpp"
#include "t2sql/sqlkit.hpp"

namespace t2sql {

enum class PromptMethod { standard, cot, ltm_reduction, ltm_solving, qdecomp, qdecomp_intercol };
enum class SchemaFormat { api_docs, create_table_select3 };

std::string_view to_string(PromptMethod method);
std::string_view to_string(SchemaFormat format);
PromptMethod prompt_method_from_string(std::string_view text);
SchemaFormat schema_format_from_string(std::string_view text);

// The api_docs block differs slightly between method layouts (leading "#"
// line, closing "#" or "# "), so the method picks the variant.
std::string render_schema(const DatabaseSchema& schema, SchemaFormat format,
                          PromptMethod method = PromptMethod::standard);

struct Demonstration {
    SchemaExample example;
    DatabaseSchema schema;
    std::optional<std::string> narration;        // cot; composed from the gold AST when absent
    std::optional<Decomposition> decomposition;  // ltm_*, qdecomp*
};

struct LtmTurn {
    std::string question;
    std::string sql;

    friend bool operator==(const LtmTurn&, const LtmTurn&) = default;
};

struct PromptTarget {
    SchemaExample example;
    DatabaseSchema schema;
    // ltm_solving only: turns already answered in this dialogue and the
    // sub-question being asked now.
    std::vector<LtmTurn> solved;
    std::string sub_question;
};

struct PromptSpec {
    PromptMethod method = PromptMethod::standard;
    SchemaFormat format = SchemaFormat::api_docs;
    std::vector<Demonstration> demonstrations;  // presentation order
    PromptTarget target;
    std::optional<std::string> separator;       // text between blocks; method default when unset
    std::uint64_t seed = 0;
};

struct RenderedPrompt {
    std::string text;
    std::vector<std::string> stop_sequences;
    int max_tokens = 512;
    PromptMethod method = PromptMethod::standard;
    SchemaFormat format = SchemaFormat::api_docs;
    std::size_t shot_count = 0;
    std::uint64_t seed = 0;
};

std::string default_separator(PromptMethod method);
std::vector<std::string> default_stop_sequences(PromptMethod method);
int default_max_tokens(PromptMethod method);

RenderedPrompt build_prompt(const PromptSpec& spec);

std::string compose_cot_narration(const Query& query);

struct ParsedCompletion {
    std::string sql;
    std::vector<std::string> steps;  // sub-questions or reasoning lines
    bool extraction_failed = false;
};

// Total: garbage in gives sql "" and extraction_failed.
ParsedCompletion parse_completion(std::string_view raw, PromptMethod method);

}  // namespace t2sql
