#include <gtest/gtest.h>

#include "fixtures.hpp"
#include "t2sql/errors.hpp"
#include "t2sql/promptgen.hpp"

using namespace t2sql;
using namespace t2sql::testing;

class GoldenPrompt : public ::testing::TestWithParam<std::string> {};

TEST_P(GoldenPrompt, MatchesByteForByte) {
    EXPECT_EQ(render_golden_prompt(GetParam()), expected_prompt(GetParam()));
}

INSTANTIATE_TEST_SUITE_P(Goldens, GoldenPrompt, ::testing::ValuesIn(golden_prompt_names()),
                         [](const auto& info) { return info.param; });

TEST(Promptgen, DefaultsPerMethod) {
    EXPECT_EQ(default_separator(PromptMethod::cot), "\n\n");
    EXPECT_EQ(default_separator(PromptMethod::standard), "\n");
    EXPECT_EQ(default_stop_sequences(PromptMethod::standard), std::vector<std::string>{"\n\n"});
    EXPECT_EQ(default_max_tokens(PromptMethod::ltm_solving), 256);
}

TEST(Promptgen, SeparatorOverride) {
    const GoldenCorpus& g = golden_corpus();
    PromptSpec spec;
    spec.demonstrations = {g.demo("enzymes")};
    spec.target = g.target("singers");
    spec.separator = "\n----\n";
    const std::string text = build_prompt(spec).text;
    EXPECT_NE(text.find("FROM enzyme\n\n----\n### SQLite"), std::string::npos);
}

TEST(Promptgen, ZeroShotIsTargetOnly) {
    PromptSpec spec;
    spec.target = golden_corpus().target("singers");
    const RenderedPrompt p = build_prompt(spec);
    EXPECT_EQ(p.shot_count, 0u);
    EXPECT_EQ(p.text.rfind("### SQLite SQL tables", 0), 0u);
    EXPECT_TRUE(p.text.ends_with("#\n### How many singers do we have?\n"));
}

TEST(Promptgen, DecompositionRequired) {
    const GoldenCorpus& g = golden_corpus();
    for (PromptMethod m : {PromptMethod::ltm_reduction, PromptMethod::ltm_solving, PromptMethod::qdecomp,
                           PromptMethod::qdecomp_intercol}) {
        PromptSpec spec;
        spec.method = m;
        spec.demonstrations = {g.demo("enzymes")};
        spec.target = g.target("singers");
        EXPECT_THROW(build_prompt(spec), PromptSpecError) << to_string(m);
    }
}

TEST(Promptgen, IntercolNeedsAnnotations) {
    const GoldenCorpus& g = golden_corpus();
    PromptSpec spec;
    spec.method = PromptMethod::qdecomp_intercol;
    spec.demonstrations = {g.demo("instructors")};  // hand-authored without annotations
    spec.target = g.target("singers");
    EXPECT_THROW(build_prompt(spec), PromptSpecError);
    spec.method = PromptMethod::qdecomp;
    EXPECT_NO_THROW(build_prompt(spec));
}

TEST(Promptgen, CreateTableNeedsSamples) {
    EXPECT_THROW(render_schema(golden_corpus().schema("concert_singer"), SchemaFormat::create_table_select3),
                 FormatError);
}

TEST(Promptgen, FormatNames) {
    EXPECT_EQ(schema_format_from_string("api_docs"), SchemaFormat::api_docs);
    EXPECT_EQ(schema_format_from_string("create_table_select3"), SchemaFormat::create_table_select3);
    EXPECT_THROW(schema_format_from_string("markdown"), ConfigError);
    EXPECT_EQ(prompt_method_from_string("qdecomp_intercol"), PromptMethod::qdecomp_intercol);
}

TEST(Promptgen, ComposedNarrationForBookClub) {
    const GoldenCorpus& g = golden_corpus();
    const SchemaExample& e = g.examples.at("book_club");
    const Query q = parse_sql(e.gold_sql, g.schema(e.db_id));
    // Composed text names the table as written in the query.
    std::string expected = g.narrations.at("book_club");
    expected.replace(expected.find("Book_Club"), 9, "book_club");
    EXPECT_EQ(compose_cot_narration(q), expected);
}

// ---- completion parsing ----

TEST(ParseCompletion, StandardTakesFirstStatement) {
    const ParsedCompletion p = parse_completion(" SELECT count(*) FROM singer\n\nSELECT 1", PromptMethod::standard);
    EXPECT_EQ(p.sql, "SELECT count(*) FROM singer");
    EXPECT_FALSE(p.extraction_failed);
}

TEST(ParseCompletion, CotReadsAfterMarker) {
    const std::string raw =
        "# This query chooses records from the singer table. It then selects the number of records.\n\n"
        "# Thus, the answer for the question is: How many singers do we have?\nSELECT count(*) FROM singer\n";
    const ParsedCompletion p = parse_completion(raw, PromptMethod::cot);
    EXPECT_EQ(p.sql, "SELECT count(*) FROM singer");
    EXPECT_FALSE(p.steps.empty());
}

TEST(ParseCompletion, QdecompSteps) {
    const std::string raw =
        "1. Find the singers.\nSQL table (column): singer (singer_id)\n2. How many singers do we have?\n\n"
        "# Thus, the answer for the question is: How many singers do we have?\nSELECT count(*) FROM singer";
    const ParsedCompletion p = parse_completion(raw, PromptMethod::qdecomp_intercol);
    EXPECT_EQ(p.sql, "SELECT count(*) FROM singer");
    ASSERT_EQ(p.steps.size(), 2u);
    EXPECT_EQ(p.steps[0], "Find the singers.");
}

TEST(ParseCompletion, LtmReductionQuotes) {
    const ParsedCompletion p =
        parse_completion("\xE2\x80\x9C" "Find all singers." "\xE2\x80\x9D" ", \xE2\x80\x9C" "Count them." "\xE2\x80\x9D.",
                         PromptMethod::ltm_reduction);
    ASSERT_EQ(p.steps.size(), 2u);
    EXPECT_EQ(p.steps[1], "Count them.");
}

TEST(ParseCompletion, GarbageIsTotal) {
    for (PromptMethod m : {PromptMethod::cot, PromptMethod::ltm_solving, PromptMethod::qdecomp,
                           PromptMethod::qdecomp_intercol}) {
        const ParsedCompletion p = parse_completion("I am not sure what you mean.", m);
        EXPECT_TRUE(p.sql.empty()) << to_string(m);
        EXPECT_TRUE(p.extraction_failed) << to_string(m);
    }
    EXPECT_TRUE(parse_completion("", PromptMethod::standard).extraction_failed);
    EXPECT_TRUE(parse_completion("no quotes here", PromptMethod::ltm_reduction).extraction_failed);
    // standard takes the whole text; prose then fails at execution
    EXPECT_EQ(parse_completion("I am not sure.", PromptMethod::standard).sql, "I am not sure.");
}
