#include "expect.hpp"
#include "fixtures.hpp"
#include "spft/executor.hpp"
#include "spft/rng.hpp"
#include "spft/sql.hpp"

using namespace spft;
using namespace spft::testing;

namespace {

const char* kExtra[] = {
    "SELECT 1",
    "select a.b, c as d from t a left join u on a.x = u.y where not (a.b is null) order by 1 desc limit 3 offset 2",
    "SELECT count(DISTINCT x), -y, +z FROM t GROUP BY q HAVING sum(w) <> 3",
    "SELECT CASE WHEN a > 1 THEN 'x' ELSE 'y' END FROM t",
    "SELECT CASE a WHEN 1 THEN 2 END FROM t",
    "SELECT CAST(a AS REAL) FROM t WHERE b NOT BETWEEN 1 AND 2 AND c NOT IN (1, 2) AND NOT EXISTS (SELECT 1 FROM u)",
    "SELECT a FROM t WHERE b LIKE 'x%' OR c GLOB '*' AND d IS NOT NULL",
    "SELECT a || b, a * 2 + 3 / 4 - 5 % 6 FROM t UNION ALL SELECT 1, 2",
    "SELECT * FROM t, u WHERE t.id = u.id;",
    "SELECT \"quoted col\" FROM \"odd table\"",
    "SELECT 'it''s' FROM t WHERE x = -3.5e2",
    "SELECT col_text_1 WHERE col_number_key_fk_2 > [NUM] AND col_time_1 < [TIME]",
};

// Random expression text from a small grammar.
std::string random_expr(Rng& rng, int depth) {
  static const char* atoms[] = {"a", "t.b", "1", "2.5", "'s'", "NULL", "[NUM]", "[STR]", "count(*)", "max(c)"};
  static const char* ops[] = {"+", "-", "*", "/", "=", "<>", "<", ">=", "AND", "OR", "||", "LIKE"};
  if (depth == 0 || rng.uniform_index(3) == 0) return atoms[rng.uniform_index(10)];
  // NOT as an operand, or an operator after an unparenthesized IN/BETWEEN, is
  // outside the supported grammar, so those forms come parenthesized
  switch (rng.uniform_index(6)) {
    case 0: return "(" + random_expr(rng, depth - 1) + ")";
    case 1: return "(NOT " + random_expr(rng, depth - 1) + ")";
    case 2: return "(" + random_expr(rng, depth - 1) + " BETWEEN 1 AND 2)";
    case 3: return "(" + random_expr(rng, depth - 1) + " IN (1, 2, 3))";
    case 4: return "abs(" + random_expr(rng, depth - 1) + ")";
    default:
      return random_expr(rng, depth - 1) + " " + ops[rng.uniform_index(12)] + " " + random_expr(rng, depth - 1);
  }
}

}  // namespace

TEST(Tokenize, Kinds) {
  auto toks = sql::tokenize("SELECT \"a b\", 'it''s', 3.5e-1, [NUM] FROM t WHERE x>=1");
  ASSERT_GE(toks.size(), 10u);
  EXPECT_EQ(toks[0].kind, sql::TokenKind::Word);
  EXPECT_EQ(toks[1].kind, sql::TokenKind::QuotedIdent);
  EXPECT_EQ(toks[1].text, "a b");
  EXPECT_EQ(toks[3].kind, sql::TokenKind::String);
  EXPECT_EQ(toks[3].text, "it's");
  EXPECT_EQ(toks[5].kind, sql::TokenKind::Number);
  EXPECT_EQ(toks[7].kind, sql::TokenKind::ValueSlot);
  EXPECT_EQ(toks.back().kind, sql::TokenKind::End);
}

TEST(Tokenize, Errors) {
  EXPECT_ERRC(sql::tokenize("SELECT 'open"), Errc::ParseError);
  EXPECT_ERRC(sql::tokenize("SELECT \"open"), Errc::ParseError);
  EXPECT_ERRC(sql::tokenize("SELECT a ` b"), Errc::ParseError);
}

TEST(Parse, RejectsNonSelect) {
  EXPECT_ERRC(sql::parse_select("DROP TABLE singer"), Errc::UnsupportedStatement);
  EXPECT_ERRC(sql::parse_select("INSERT INTO t VALUES (1)"), Errc::UnsupportedStatement);
  EXPECT_ERRC(sql::parse_select("SELECT FROM"), Errc::ParseError);
  EXPECT_ERRC(sql::parse_select("SELECT a FROM t WHERE"), Errc::ParseError);
  EXPECT_ERRC(sql::parse_select("SELECT 1; SELECT 2"), Errc::ParseError);
  EXPECT_ERRC(sql::parse_select("SELECT a IN (1, 2) || 's' FROM t"), Errc::ParseError);
  EXPECT_NO_THROW(sql::parse_select("SELECT (a IN (1, 2)) || 's' FROM t"));
}

TEST(Parse, Structure) {
  auto stmt = sql::parse_select("SELECT T1.name FROM singer AS T1 JOIN concert T2 ON T1.id = T2.singer_id "
                                "WHERE T2.year = 2020 ORDER BY T1.name DESC LIMIT 5");
  ASSERT_EQ(stmt.cores.size(), 1u);
  const auto& core = stmt.cores[0];
  ASSERT_EQ(core.from.size(), 2u);
  EXPECT_EQ(core.from[0].alias, "T1");
  EXPECT_EQ(core.from[1].join, "JOIN");
  EXPECT_TRUE(core.from[1].on.has_value());
  ASSERT_EQ(stmt.order_by.size(), 1u);
  EXPECT_EQ(stmt.order_by[0].direction, "DESC");
  EXPECT_TRUE(stmt.limit.has_value());
}

TEST(Print, FixedPointOnCorpusAndExtras) {
  std::vector<std::string> queries;
  for (const auto& s : music_corpus()) queries.push_back(s.sql);
  for (const char* q : kExtra) queries.push_back(q);
  for (const auto& q : queries) {
    std::string once = sql::print(sql::parse_select(q));
    std::string twice = sql::print(sql::parse_select(once));
    EXPECT_EQ(once, twice) << q;
  }
}

TEST(Print, PreservesExecutionResults) {
  Database db = music_db();
  for (const auto& s : music_corpus()) {
    std::string printed = sql::print(sql::parse_select(s.sql));
    ResultTable a = execute(db, s.sql);
    ResultTable b = execute(db, printed);
    EXPECT_TRUE(results_equal(a, b, true, 0.0)) << s.sql << "\n" << printed;
  }
}

TEST(Print, RandomExpressionsReachFixedPoint) {
  Rng rng(5);
  for (int i = 0; i < 500; ++i) {
    std::string q = "SELECT " + random_expr(rng, 4) + " FROM t WHERE " + random_expr(rng, 3);
    std::string once;
    try {
      once = sql::print(sql::parse_select(q));
    } catch (const Error& e) {
      FAIL() << q << ": " << e.what();
    }
    ASSERT_EQ(once, sql::print(sql::parse_select(once))) << q;
  }
}

TEST(Print, QuotingHelpers) {
  EXPECT_EQ(sql::quote_string("O'Brien"), "'O''Brien'");
  EXPECT_EQ(sql::print_identifier("name"), "name");
  EXPECT_EQ(sql::print_identifier("odd name"), "\"odd name\"");
  EXPECT_EQ(sql::print_identifier("select"), "\"select\"");
}

TEST(Placeholder, GrammarRoundTrip) {
  for (DataType t : {DataType::Number, DataType::Text, DataType::Time, DataType::Boolean, DataType::Other})
    for (bool fk : {false, true})
      for (int n : {1, 2, 17}) {
        std::string name = sql::placeholder_name(t, fk, n);
        auto p = sql::parse_placeholder(name);
        ASSERT_TRUE(p.has_value()) << name;
        EXPECT_EQ(p->type, t);
        EXPECT_EQ(p->is_fk, fk);
        EXPECT_EQ(p->ordinal, n);
      }
  EXPECT_EQ(sql::placeholder_name(DataType::Number, true, 1), "col_number_key_fk_1");
  EXPECT_FALSE(sql::parse_placeholder("col_number").has_value());
  EXPECT_FALSE(sql::parse_placeholder("col_number_0").has_value());
  EXPECT_FALSE(sql::parse_placeholder("col_widget_1").has_value());
  EXPECT_FALSE(sql::parse_placeholder("name").has_value());
}

TEST(ForEachExpr, VisitsInPrintOrder) {
  auto stmt = sql::parse_select("SELECT a FROM t JOIN u ON t.x = u.y WHERE b > 1 ORDER BY c LIMIT 2");
  std::vector<std::string> columns;
  sql::for_each_expr(stmt, [&](const sql::Expr& e) {
    if (e.kind == sql::ExprKind::Column) columns.push_back(e.text);
  });
  EXPECT_EQ(columns, (std::vector<std::string>{"a", "b", "c"}));
}
