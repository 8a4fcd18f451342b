#include <set>

#include "expect.hpp"
#include "fixtures.hpp"
#include "spft/sql.hpp"
#include "spft/template.hpp"

using namespace spft;
using namespace spft::testing;

namespace {

Slot col(int id, DataType t, int ordinal, bool fk = false) { return {id, SlotKind::Column, t, fk, ordinal}; }
Slot val(int id, DataType t) { return {id, SlotKind::Value, t, false, 0}; }

SynthSample corpus_item(const std::string& sql, const std::string& db = "toy") { return {"q", sql, db, Origin::Corpus}; }

}  // namespace

TEST(ExtractTemplate, SimpleWhere) {
  SqlTemplate t = extract_template("SELECT name FROM singer WHERE age > 20", toy_schema());
  EXPECT_EQ(t.skeleton, "SELECT col_text_1 WHERE col_number_1 > [NUM]");
  EXPECT_EQ(t.slots, (std::vector<Slot>{col(1, DataType::Text, 1), col(2, DataType::Number, 1),
                                        val(1, DataType::Number)}));
  EXPECT_EQ(t.source_count, 1u);
}

TEST(ExtractTemplate, JoinDropped) {
  DatabaseSchema s = load_schema(fixture_src("toy_year.json"));
  SqlTemplate t = extract_template(
      "SELECT T1.name FROM singer T1 JOIN concert T2 ON T1.id = T2.singer_id WHERE T2.year = 2020", s);
  EXPECT_EQ(t.skeleton, "SELECT col_text_1 WHERE col_number_1 = [NUM]");
  EXPECT_EQ(t.slots, (std::vector<Slot>{col(1, DataType::Text, 1), col(2, DataType::Number, 1),
                                        val(1, DataType::Number)}));
  SqlTemplate fk = extract_template("SELECT T2.singer_id FROM singer T1 JOIN concert T2 ON T1.id = T2.singer_id", s);
  EXPECT_EQ(fk.skeleton, "SELECT col_number_key_fk_1");
  EXPECT_EQ(fk.slots, (std::vector<Slot>{col(1, DataType::Number, 1, true)}));
}

TEST(ExtractTemplate, CountStarHasNoSlots) {
  SqlTemplate t = extract_template("SELECT count(*) FROM singer", toy_schema());
  EXPECT_EQ(t.skeleton, "SELECT count(*)");
  EXPECT_TRUE(t.slots.empty());
}

TEST(ExtractTemplate, LiteralsAndStructure) {
  DatabaseSchema s = music_schema();
  EXPECT_EQ(extract_template("SELECT name FROM stadium WHERE opened < '1900-01-01' ORDER BY capacity DESC LIMIT 3", s)
                .skeleton,
            "SELECT col_text_1 WHERE col_time_1 < [TIME] ORDER BY col_number_1 DESC LIMIT 3");
  EXPECT_EQ(extract_template("SELECT count(*) FROM singer WHERE is_male = 1", s).skeleton,
            "SELECT count(*) WHERE col_boolean_1 = [BOOL]");
  EXPECT_EQ(extract_template("SELECT name FROM singer WHERE country = 'France' AND age BETWEEN 20 AND 30", s).skeleton,
            "SELECT col_text_1 WHERE col_text_2 = [STR] AND col_number_1 BETWEEN [NUM] AND [NUM]");
  // the same column keeps its placeholder
  EXPECT_EQ(extract_template("SELECT country, count(*) FROM singer GROUP BY country", s).skeleton,
            "SELECT col_text_1, count(*) GROUP BY col_text_1");
  // select-list aliases stay verbatim
  EXPECT_EQ(extract_template("SELECT age AS a FROM singer ORDER BY a", s).skeleton,
            "SELECT col_number_1 AS a ORDER BY a");
}

TEST(ExtractTemplate, NestedQueriesAreTableFree) {
  DatabaseSchema s = music_schema();
  SqlTemplate t = extract_template(
      "SELECT name FROM singer WHERE singer_id NOT IN (SELECT T1.singer_id FROM singer_in_concert AS T1 "
      "JOIN concert AS T2 ON T1.concert_id = T2.concert_id WHERE T2.year = 2014)",
      s);
  EXPECT_EQ(t.skeleton,
            "SELECT col_text_1 WHERE col_number_key_fk_1 NOT IN (SELECT col_number_key_fk_2 WHERE col_number_1 = [NUM])");
  // correlated reference to the outer scope
  SqlTemplate c = extract_template(
      "SELECT name FROM stadium AS S WHERE EXISTS (SELECT 1 FROM concert WHERE concert.stadium_id = S.stadium_id)", s);
  EXPECT_EQ(c.skeleton, "SELECT col_text_1 WHERE EXISTS (SELECT [NUM] WHERE col_number_key_fk_1 = col_number_key_fk_2)");
}

TEST(ExtractTemplate, Errors) {
  DatabaseSchema s = toy_schema();
  EXPECT_ERRC(extract_template("DROP TABLE singer", s), Errc::UnsupportedStatement);
  EXPECT_ERRC(extract_template("SELECT FROM", s), Errc::ParseError);
  EXPECT_ERRC(extract_template("SELECT height FROM singer", s), Errc::UnresolvedColumn);
  EXPECT_ERRC(extract_template("SELECT name FROM nowhere", s), Errc::UnresolvedColumn);
  EXPECT_ERRC(extract_template("SELECT x.name FROM singer", s), Errc::UnresolvedColumn);
  EXPECT_ERRC(extract_template("SELECT n FROM (SELECT name AS n FROM singer)", s), Errc::UnsupportedStatement);
}

TEST(ExtractTemplate, CorpusInvariants) {
  DatabaseSchema s = music_schema();
  std::set<std::string> schema_names;
  for (const auto& t : s.tables()) {
    schema_names.insert(to_lower(t.name));
    for (const auto& c : t.columns) schema_names.insert(to_lower(c.name));
  }
  for (const auto& item : music_corpus()) {
    SqlTemplate t = extract_template(item.sql, s);
    std::size_t placeholders = 0, values = 0;
    std::set<std::string> distinct;
    for (const auto& tok : sql::tokenize(t.skeleton)) {
      if (tok.kind == sql::TokenKind::ValueSlot) ++values;
      if (tok.kind != sql::TokenKind::Word && tok.kind != sql::TokenKind::QuotedIdent) continue;
      std::string upper = tok.text;
      for (char& ch : upper) ch = static_cast<char>(std::toupper(static_cast<unsigned char>(ch)));
      EXPECT_NE(upper, "FROM") << t.skeleton;
      EXPECT_NE(upper, "JOIN") << t.skeleton;
      EXPECT_FALSE(schema_names.count(to_lower(tok.text))) << tok.text << " in " << t.skeleton;
      if (sql::parse_placeholder(tok.text)) {
        ++placeholders;
        distinct.insert(tok.text);
      }
    }
    EXPECT_EQ(t.column_slots().size(), distinct.size()) << t.skeleton;
    EXPECT_EQ(t.value_slots().size(), values) << t.skeleton;
    EXPECT_EQ(slots_from_skeleton(t.skeleton), t.slots) << t.skeleton;
    for (const auto& slot : t.slots) EXPECT_TRUE(!slot.is_fk || slot.kind == SlotKind::Column);
  }
}

TEST(ExtractTemplate, SlotIdsConsecutivePerKind) {
  for (const auto& item : music_corpus()) {
    SqlTemplate t = extract_template(item.sql, music_schema());
    int next_col = 1, next_val = 1;
    for (const auto& slot : t.slots) {
      if (slot.kind == SlotKind::Column) EXPECT_EQ(slot.id, next_col++);
      else EXPECT_EQ(slot.id, next_val++);
    }
  }
}

TEST(BuildPool, Counting) {
  DatabaseSchema s = toy_schema();
  std::map<std::string, DatabaseSchema> schemas{{"toy", s}};
  std::vector<SynthSample> corpus{corpus_item("SELECT name FROM singer WHERE age > 20"),
                                  corpus_item("SELECT venue FROM concert WHERE id > 2"),
                                  corpus_item("SELECT count(*) FROM singer")};
  PoolReport report;
  TemplatePool pool = build_pool(corpus, schemas, &report);
  ASSERT_EQ(pool.size(), 2u);
  EXPECT_EQ(pool.at(0).source_count, 2u);
  EXPECT_EQ(pool.at(1).source_count, 1u);
  EXPECT_EQ(pool.total_count(), 3u);
  EXPECT_EQ(report.items, 3u);
  EXPECT_EQ(report.extracted, 3u);

  std::vector<SynthSample> same(5, corpus_item("SELECT count(*) FROM concert"));
  TemplatePool single = build_pool(same, schemas);
  ASSERT_EQ(single.size(), 1u);
  EXPECT_EQ(single.at(0).source_count, 5u);
}

TEST(BuildPool, FailuresReportedAndAllFailed) {
  std::map<std::string, DatabaseSchema> schemas{{"toy", toy_schema()}};
  std::vector<SynthSample> corpus{corpus_item("DELETE FROM singer"), corpus_item("SELECT name FROM singer"),
                                  corpus_item("SELECT 1", "unknown_db")};
  PoolReport report;
  TemplatePool pool = build_pool(corpus, schemas, &report);
  EXPECT_EQ(pool.size(), 1u);
  ASSERT_EQ(report.failures.size(), 2u);
  EXPECT_EQ(report.failures[0].line, 0u);
  EXPECT_EQ(report.failures[1].line, 2u);
  std::vector<SynthSample> writes{corpus_item("DROP TABLE singer"), corpus_item("UPDATE singer SET age = 1")};
  EXPECT_ERRC(build_pool(writes, schemas), Errc::AllItemsFailed);
  EXPECT_ERRC(build_pool(std::vector<SynthSample>{}, schemas), Errc::AllItemsFailed);
}

TEST(BuildPool, DoublingCorpusDoublesCounts) {
  DatabaseSchema s = music_schema();
  auto corpus = music_corpus();
  TemplatePool once = build_pool(corpus, {{"music", s}});
  auto doubled = corpus;
  doubled.insert(doubled.end(), corpus.begin(), corpus.end());
  TemplatePool twice = build_pool(doubled, {{"music", s}});
  ASSERT_EQ(once.size(), twice.size());
  for (std::size_t i = 0; i < once.size(); ++i) {
    EXPECT_TRUE(once.at(i).same_shape(twice.at(i)));
    EXPECT_EQ(twice.at(i).source_count, 2 * once.at(i).source_count);
  }
  EXPECT_EQ(twice.total_count(), 2 * once.total_count());
}

TEST(BuildPool, TotalIsSumOfCounts) {
  TemplatePool pool = music_pool();
  std::size_t sum = 0;
  for (const auto& t : pool.templates()) sum += t.source_count;
  EXPECT_EQ(pool.total_count(), sum);
  pool.add_count(0, 3);
  EXPECT_EQ(pool.total_count(), sum + 3);
  EXPECT_THROW(pool.add_count(pool.size(), 1), std::exception);
}

TEST(SampleTemplate, Distribution) {
  TemplatePool empty;
  Rng rng(1);
  EXPECT_ERRC(sample_template(empty, rng), Errc::EmptyPool);

  TemplatePool one;
  one.add({"SELECT count(*)", {}, 4});
  for (int i = 0; i < 100; ++i) EXPECT_EQ(sample_template_index(one, rng), 0u);

  TemplatePool two;
  two.add({"SELECT count(*)", {}, 3});
  two.add({"SELECT max(col_number_1)", {col(1, DataType::Number, 1)}, 1});
  std::size_t first = 0;
  const int draws = 10000;
  for (int i = 0; i < draws; ++i) first += sample_template_index(two, rng) == 0;
  EXPECT_NEAR(static_cast<double>(first) / draws, 0.75, 0.03);
}

TEST(PoolJson, RoundTripAndValidation) {
  TemplatePool pool = music_pool();
  auto doc = pool_to_json(pool);
  EXPECT_TRUE(doc.contains("templates"));
  auto first = doc["templates"][0];
  std::vector<std::string> keys;
  for (const auto& [k, v] : first.items()) keys.push_back(k);
  EXPECT_EQ(keys, (std::vector<std::string>{"skeleton", "slots", "count"}));
  EXPECT_EQ(pool_from_json(nlohmann::ordered_json::parse(doc.dump())), pool);

  auto mismatched = doc;
  mismatched["templates"][0]["slots"].push_back({{"kind", "value"}, {"type", "number"}, {"fk", false}});
  EXPECT_ERRC(pool_from_json(mismatched), Errc::FormatError);
  auto with_from = nlohmann::ordered_json::parse(R"({"templates": [{"skeleton": "SELECT col_text_1 FROM singer",
      "slots": [{"kind": "column", "type": "text", "fk": false}], "count": 1}]})");
  EXPECT_ERRC(pool_from_json(with_from), Errc::FormatError);
  auto dup = doc;
  dup["templates"].push_back(doc["templates"][0]);
  EXPECT_ERRC(pool_from_json(dup), Errc::FormatError);
  EXPECT_ERRC(pool_from_json(nlohmann::ordered_json::parse("[1]")), Errc::FormatError);
}
