#include <gtest/gtest.h>

#include <random>
#include <regex>

#include "fixtures.hpp"
#include "query_gen.hpp"
#include "t2sql/errors.hpp"
#include "t2sql/sqlkit.hpp"
#include "t2sql/text.hpp"

using namespace t2sql;
using namespace t2sql::testing;

namespace {

const DatabaseSchema& schema(const std::string& db) { return mini_corpus().schema(db); }

Query parse(const std::string& sql, const std::string& db) { return parse_sql(sql, schema(db)); }

}  // namespace

TEST(SqlParse, CountStar) {
    const Query q = parse("SELECT count(*) FROM singer", "concert_singer");
    ASSERT_EQ(q.select.size(), 1u);
    EXPECT_EQ(q.select[0].agg, Agg::count);
    EXPECT_TRUE(q.select[0].value.lhs.star);
    ASSERT_EQ(q.from.size(), 1u);
    EXPECT_EQ(q.from[0].name, "singer");
}

TEST(SqlParse, ThreeWayJoin) {
    const Query q = parse(
        "SELECT count(*) FROM flights AS T1 JOIN airports AS T2 ON T1.destairport  =  T2.airportcode JOIN airlines AS "
        "T3 ON T3.uid  =  T1.airline WHERE T2.city  =  'Aberdeen' AND T3.airline  =  'United Airlines'",
        "flight_2");
    EXPECT_EQ(q.from.size(), 3u);
    EXPECT_EQ(q.join_conds.size(), 2u);
    EXPECT_EQ(q.where.preds.size(), 2u);
    EXPECT_EQ(q.where.preds[0].lhs.lhs.column.table, "airports");
    EXPECT_EQ(q.where.preds[1].lhs.lhs.column.column, "airline");
    EXPECT_EQ(q.where.preds[1].lhs.lhs.column.table, "airlines");
}

TEST(SqlParse, Errors) {
    try {
        parse("SELECT name FROM singer WHERE", "concert_singer");
        FAIL();
    } catch (const SqlSyntaxError& e) {
        EXPECT_EQ(e.position(), 29u);
    }
    try {
        parse("SELECT nickname FROM singer", "concert_singer");
        FAIL();
    } catch (const ResolutionError& e) {
        EXPECT_EQ(e.identifier(), "nickname");
    }
    EXPECT_THROW(parse("DELETE FROM singer", "concert_singer"), Error);
    EXPECT_THROW(parse("SELECT name FROM singer; SELECT 1", "concert_singer"), Error);
    EXPECT_THROW(parse("SELECT 'unterminated FROM singer", "concert_singer"), SqlSyntaxError);
}

TEST(SqlParse, CaseInsensitiveIdentifiers) {
    EXPECT_EQ(parse("select NAME from SINGER", "concert_singer"), parse("SELECT name FROM singer", "concert_singer"));
}

TEST(SqlRender, Canonical) {
    const Query q = parse("SELECT T1.Name ,  count(*) FROM singer AS T1 JOIN singer_in_concert AS T2 ON T1.singer_id  =  "
                          "T2.singer_id GROUP BY T1.Name HAVING count(*)  >=  2",
                          "concert_singer");
    EXPECT_EQ(render_sql(q),
              "SELECT singer.name, count(*) FROM singer JOIN singer_in_concert ON singer.singer_id = "
              "singer_in_concert.singer_id GROUP BY singer.name HAVING count(*) >= 2");
}

// ---- components ----

TEST(Components, CountStarFamilies) {
    const ComponentMap m = extract_components(parse("SELECT count(*) FROM singer", "concert_singer"));
    EXPECT_EQ(m.at(Family::select).size(), 1u);
    EXPECT_TRUE(m.at(Family::where).empty());
    EXPECT_TRUE(m.at(Family::group_by).empty());
    EXPECT_TRUE(m.at(Family::order_by).empty());
}

TEST(Components, StudentWhere) {
    const ComponentMap m = extract_components(parse("SELECT fname ,  lname ,  age FROM Student WHERE sex  =  'F'", "allergy_1"));
    ASSERT_EQ(m.at(Family::where).size(), 1u);
    EXPECT_NE(m.at(Family::where)[0].find("student.sex"), std::string::npos);
    EXPECT_EQ(m.at(Family::where)[0].find("'F'"), std::string::npos);
}

TEST(Components, ValueBlindness) {
    // Value-perturbed pairs built from one template.
    const std::string tpl = "SELECT name FROM singer WHERE age  >  {A} AND country  =  '{C}' GROUP BY country HAVING count(*)  >  {N}";
    std::mt19937_64 rng(5);
    auto fill = [&] {
        std::string s = tpl;
        s = replace_all(s, "{A}", std::to_string(rng() % 90));
        s = replace_all(s, "{C}", "c" + std::to_string(rng() % 9));
        return replace_all(s, "{N}", std::to_string(rng() % 5));
    };
    for (int i = 0; i < 20; ++i) {
        const std::string a = fill(), b = fill();
        const auto ma = extract_components(parse(a, "concert_singer"));
        const auto mb = extract_components(parse(b, "concert_singer"));
        EXPECT_EQ(ma, mb) << a << " vs " << b;
        MatchOptions masked;
        masked.mask_values = true;
        for (const auto& [f, ok] : compare_components(parse(a, "concert_singer"), parse(b, "concert_singer"), masked))
            EXPECT_TRUE(ok) << to_string(f);
    }
}

TEST(Components, ValuesCountByDefault) {
    const Query a = parse("SELECT name FROM singer WHERE age  >  20", "concert_singer");
    const Query b = parse("SELECT name FROM singer WHERE age  >  30", "concert_singer");
    EXPECT_FALSE(compare_components(a, b).at(Family::where));
    EXPECT_FALSE(exact_match(a, b));
    MatchOptions masked;
    masked.mask_values = true;
    EXPECT_TRUE(exact_match(a, b, masked));
}

TEST(Components, ClauseDeletionTouchesOneFamily) {
    const std::string full = "SELECT name FROM singer WHERE age  >  20 ORDER BY age DESC";
    const auto m_full = extract_components(parse(full, "concert_singer"));
    const auto m_no_order = extract_components(parse("SELECT name FROM singer WHERE age  >  20", "concert_singer"));
    EXPECT_EQ(m_full.at(Family::select), m_no_order.at(Family::select));
    EXPECT_EQ(m_full.at(Family::where), m_no_order.at(Family::where));
    EXPECT_TRUE(m_no_order.at(Family::order_by).empty());
    EXPECT_FALSE(m_full.at(Family::order_by).empty());
}

TEST(Components, SelectOrderInsensitiveOrderByOrderSensitive) {
    const Query a = parse("SELECT name ,  age FROM singer ORDER BY age ,  name", "concert_singer");
    const Query b = parse("SELECT age ,  name FROM singer ORDER BY name ,  age", "concert_singer");
    const auto r = compare_components(a, b);
    EXPECT_TRUE(r.at(Family::select));
    EXPECT_FALSE(r.at(Family::order_by));
}

TEST(ExactMatch, AliasAndCaseBlind) {
    const Query a = parse("SELECT T1.name FROM singer AS T1 JOIN singer_in_concert AS T2 ON T1.singer_id = T2.singer_id",
                          "concert_singer");
    const Query b = parse("SELECT singer.Name FROM SINGER JOIN singer_in_concert ON singer.Singer_ID = singer_in_concert.singer_id",
                          "concert_singer");
    EXPECT_TRUE(exact_match(a, b));
}

// ---- pairs ----

TEST(Pairs, StudentExample) {
    const auto pairs = extract_table_column_pairs(parse("SELECT fname ,  lname ,  age FROM student", "allergy_1"),
                                                  schema("allergy_1"), 0);
    ASSERT_EQ(pairs.size(), 3u);
    EXPECT_EQ(pairs[0].column, "fname");
    EXPECT_EQ(pairs[1].column, "lname");
    EXPECT_EQ(pairs[2].column, "age");
}

TEST(Pairs, SeededStarPick) {
    const Query q = parse("SELECT count(*) FROM enzyme", "medicine_enzyme_interaction");
    const TableDef& enzyme = *schema("medicine_enzyme_interaction").find_table("enzyme");
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        const auto pairs = extract_table_column_pairs(q, schema("medicine_enzyme_interaction"), seed);
        ASSERT_EQ(pairs.size(), 1u);
        // reference sampler
        const std::string want = enzyme.columns[std::mt19937_64(seed)() % enzyme.columns.size()].name;
        EXPECT_EQ(pairs[0].column_display, want) << "seed " << seed;
    }
}

TEST(Pairs, StarConfinedToItsSubquery) {
    const Query q = parse("SELECT name FROM singer WHERE singer_id IN (SELECT singer_id FROM singer_in_concert GROUP BY "
                          "singer_id HAVING count(*) > 1)",
                          "concert_singer");
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        const auto pairs = extract_table_column_pairs(q, schema("concert_singer"), seed);
        for (std::size_t i = 3; i < pairs.size(); ++i) EXPECT_EQ(pairs[i].table, "singer_in_concert");
        EXPECT_LE(pairs.size(), 4u);
    }
}

TEST(Pairs, NoStarIsSeedIndependent) {
    const Query q = parse("SELECT name FROM singer WHERE age  >  20", "concert_singer");
    EXPECT_EQ(extract_table_column_pairs(q, schema("concert_singer"), 1),
              extract_table_column_pairs(q, schema("concert_singer"), 777));
}

// ---- hardness ----

TEST(Hardness, SpiderReferenceFixture) {
    const auto j = nlohmann::json::parse(read_file((data_dir() / "hardness" / "queries.json").string()));
    ASSERT_EQ(j.size(), 50u);
    int agree = 0;
    for (const auto& e : j) {
        const Hardness got = classify_hardness(parse(e.at("query").get<std::string>(), e.at("db_id").get<std::string>()));
        const Hardness want = hardness_from_string(e.at("level").get<std::string>());
        EXPECT_EQ(got, want) << e.at("query");
        agree += got == want;
    }
    EXPECT_EQ(agree, 50);
}

TEST(Hardness, LiteralsDoNotMatter) {
    EXPECT_EQ(classify_hardness(parse("SELECT name FROM singer WHERE age > 1 OR age < 3", "concert_singer")),
              classify_hardness(parse("SELECT name FROM singer WHERE age > 50 OR age < 90", "concert_singer")));
    EXPECT_EQ(classify_hardness(parse("SELECT count(*) FROM singer", "concert_singer")), Hardness::easy);
    EXPECT_LT(Hardness::easy, Hardness::medium);
    EXPECT_LT(Hardness::hard, Hardness::extra_hard);
}

// ---- generated properties ----

TEST(GeneratedQueries, RoundTripAndAliasInvariance) {
    const auto queries = generate_queries(mini_corpus().schemas, 200, 20240);
    ASSERT_EQ(queries.size(), 200u);
    int failures = 0;
    for (const GeneratedQuery& g : queries) {
        const DatabaseSchema& s = schema(g.db_id);
        try {
            const Query a = parse_sql(g.sql, s);
            const Query canon = parse_sql(render_sql(a), s);
            const Query spider = parse_sql(render_sql(a, RenderStyle::spider), s);
            const Query renamed = parse_sql(g.sql_renamed, s);
            const bool ok = canon == a && spider == a && renamed == a && render_sql(canon) == render_sql(a);
            if (!ok) {
                ++failures;
                ADD_FAILURE() << g.sql << "\n  canonical: " << render_sql(a);
            }
        } catch (const Error& e) {
            ++failures;
            ADD_FAILURE() << g.sql << "\n  " << e.what();
        }
    }
    EXPECT_EQ(failures, 0);
}

TEST(GeneratedQueries, CoverTheDialect) {
    const auto queries = generate_queries(mini_corpus().schemas, 200, 20240);
    int joins = 0, nested = 0, setops = 0, grouped = 0, ordered = 0;
    for (const GeneratedQuery& g : queries) {
        joins += g.sql.find(" JOIN ") != std::string::npos;
        nested += g.sql.find("(SELECT") != std::string::npos;
        setops += std::regex_search(g.sql, std::regex(" (UNION|INTERSECT|EXCEPT) "));
        grouped += g.sql.find("GROUP BY") != std::string::npos;
        ordered += g.sql.find("ORDER BY") != std::string::npos;
    }
    EXPECT_GE(joins, 40);
    EXPECT_GE(nested, 10);
    EXPECT_GE(setops, 5);
    EXPECT_GE(grouped, 20);
    EXPECT_GE(ordered, 20);
}
