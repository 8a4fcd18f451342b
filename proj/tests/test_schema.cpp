#include <algorithm>
#include <limits>

#include "expect.hpp"
#include "fixtures.hpp"
#include "spft/rng.hpp"
#include "spft/schema.hpp"

using namespace spft;
using namespace spft::testing;

namespace {

constexpr DataType kTypes[] = {DataType::Number, DataType::Text, DataType::Time, DataType::Boolean, DataType::Other};

// Random schema: 2..7 tables, 1..5 columns each, a handful of FKs between id columns.
DatabaseSchema random_schema(Rng& rng) {
  std::size_t n_tables = 2 + rng.uniform_index(6);
  std::vector<TableDef> tables;
  for (std::size_t t = 0; t < n_tables; ++t) {
    TableDef table{"t" + std::to_string(t), {}};
    table.columns.push_back({"id", DataType::Number, true, std::nullopt});
    std::size_t extra = rng.uniform_index(5);
    for (std::size_t c = 0; c < extra; ++c)
      table.columns.push_back({"c" + std::to_string(c), kTypes[rng.uniform_index(5)], false,
                               rng.uniform_index(3) == 0 ? std::optional<std::string>("note " + std::to_string(c))
                                                         : std::nullopt});
    tables.push_back(std::move(table));
  }
  std::vector<ForeignKey> fks;
  std::size_t n_fks = rng.uniform_index(n_tables + 1);
  for (std::size_t i = 0; i < n_fks; ++i) {
    std::size_t a = rng.uniform_index(n_tables), b = rng.uniform_index(n_tables);
    if (a == b) continue;
    std::string col = "fk" + std::to_string(i);
    tables[a].columns.push_back({col, DataType::Number, false, std::nullopt});
    fks.push_back({tables[a].name, col, tables[b].name, "id"});
  }
  return DatabaseSchema("random", std::move(tables), std::move(fks));
}

// Floyd-Warshall over the undirected FK graph.
std::vector<std::vector<int>> all_pairs(const DatabaseSchema& s) {
  const int inf = std::numeric_limits<int>::max() / 4;
  std::size_t n = s.tables().size();
  std::vector<std::vector<int>> d(n, std::vector<int>(n, inf));
  for (std::size_t i = 0; i < n; ++i) d[i][i] = 0;
  for (const auto& fk : s.foreign_keys()) {
    std::size_t a = *s.table_index(fk.from_table), b = *s.table_index(fk.to_table);
    d[a][b] = d[b][a] = std::min(d[a][b], 1);
  }
  for (std::size_t k = 0; k < n; ++k)
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j) d[i][j] = std::min(d[i][j], d[i][k] + d[k][j]);
  for (auto& row : d)
    for (int& x : row)
      if (x >= inf) x = -1;
  return d;
}

}  // namespace

TEST(LoadSchema, ToyDatabaseFile) {
  DatabaseSchema s = toy_schema();
  EXPECT_EQ(s.db_id(), "toy");
  ASSERT_EQ(s.tables().size(), 2u);
  EXPECT_EQ(s.tables()[0].name, "singer");
  EXPECT_EQ(s.tables()[1].name, "concert");
  ASSERT_EQ(s.foreign_keys().size(), 1u);
  EXPECT_EQ(s.foreign_keys()[0], (ForeignKey{"concert", "singer_id", "singer", "id"}));
  EXPECT_TRUE(s.tables()[0].columns[0].is_primary_key);
  EXPECT_EQ(s.tables()[0].columns[1].data_type, DataType::Text);
}

TEST(LoadSchema, TypeAffinities) {
  DatabaseSchema s = music_schema();
  EXPECT_EQ(s.table("stadium").find_column("opened")->data_type, DataType::Time);
  EXPECT_EQ(s.table("stadium").find_column("average_attendance")->data_type, DataType::Number);
  EXPECT_EQ(s.table("stadium").find_column("name")->data_type, DataType::Text);
  EXPECT_EQ(s.table("singer").find_column("is_male")->data_type, DataType::Boolean);
  EXPECT_EQ(s.table("concert").find_column("concert_date")->data_type, DataType::Time);
  EXPECT_EQ(data_type_from_declared("BLOB"), DataType::Other);
  EXPECT_EQ(data_type_from_declared("timestamp"), DataType::Time);
  EXPECT_EQ(data_type_from_declared("varchar(20)"), DataType::Text);
}

TEST(LoadSchema, JsonErrors) {
  EXPECT_ERRC(load_schema(fixture_src("no_tables.json")), Errc::FormatError);
  EXPECT_ERRC(load_schema(fixture_src("bad_fk.json")), Errc::UnresolvedFk);
  EXPECT_ERRC(load_schema(fixture_src("does_not_exist.json")), Errc::IoError);
  EXPECT_ERRC(load_schema(fixture_src("does_not_exist.sqlite"), SchemaSource::DatabaseFile), Errc::IoError);
}

TEST(LoadSchema, DuplicateNamesRejected) {
  TableDef t{"t", {{"a", DataType::Number, false, std::nullopt}, {"A", DataType::Text, false, std::nullopt}}};
  EXPECT_ERRC(DatabaseSchema("x", {t}, {}), Errc::FormatError);
  TableDef u{"u", {{"a", DataType::Number, false, std::nullopt}}};
  EXPECT_ERRC(DatabaseSchema("x", {u, u}, {}), Errc::FormatError);
  EXPECT_ERRC(DatabaseSchema("x", {TableDef{"empty", {}}}, {}), Errc::FormatError);
  EXPECT_ERRC(DatabaseSchema("x", {u}, {{"u", "a", "u", "a"}}), Errc::FormatError);
}

TEST(FkDistance, ToyExamples) {
  DatabaseSchema s = toy_schema();
  EXPECT_EQ(s.fk_distance("singer", "singer"), 0);
  EXPECT_EQ(s.fk_distance("singer", "concert"), 1);
  EXPECT_EQ(s.fk_distance("SINGER", "Concert"), 1);
  EXPECT_ERRC(s.fk_distance("singer", "nope"), Errc::UnknownTable);
  DatabaseSchema d = load_schema(fixture_src("disconnected.json"));
  EXPECT_FALSE(d.fk_distance("a", "c").has_value());
  EXPECT_EQ(d.fk_distance("b", "a"), 1);
}

TEST(FkDistance, MusicTwoHops) {
  DatabaseSchema s = music_schema();
  EXPECT_EQ(s.fk_distance("stadium", "singer"), 3);
  EXPECT_EQ(s.fk_distance("concert", "singer"), 2);
}

TEST(FkDistance, MatchesFloydWarshallAndIsAMetric) {
  Rng rng(7);
  for (int trial = 0; trial < 200; ++trial) {
    DatabaseSchema s = random_schema(rng);
    auto oracle = all_pairs(s);
    std::size_t n = s.tables().size();
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j) {
        auto d = s.fk_distance(s.tables()[i].name, s.tables()[j].name);
        ASSERT_EQ(d.value_or(-1), oracle[i][j]);
        ASSERT_EQ(d, s.fk_distance(s.tables()[j].name, s.tables()[i].name));
        for (std::size_t k = 0; k < n; ++k) {
          auto a = s.fk_distance(s.tables()[i].name, s.tables()[k].name);
          auto b = s.fk_distance(s.tables()[k].name, s.tables()[j].name);
          if (a && b) {
            ASSERT_TRUE(d.has_value() && *d <= *a + *b);
          }
        }
      }
  }
}

TEST(ShortestPath, StepsReachTarget) {
  DatabaseSchema s = music_schema();
  auto stadium = *s.table_index("stadium");
  auto singer = *s.table_index("singer");
  auto path = s.shortest_path({stadium}, singer);
  ASSERT_TRUE(path.has_value());
  ASSERT_EQ(path->size(), 3u);
  EXPECT_EQ(path->back().second, singer);
  EXPECT_TRUE(s.shortest_path({singer}, singer)->empty());
}

TEST(ColumnsOfType, ToyNumber) {
  DatabaseSchema s = toy_schema();
  auto cols = s.columns_of_type(DataType::Number);
  std::vector<std::pair<std::string, std::string>> names;
  for (const auto& [t, c] : cols) names.emplace_back(t, c.name);
  std::vector<std::pair<std::string, std::string>> want{
      {"singer", "id"}, {"singer", "age"}, {"concert", "id"}, {"concert", "singer_id"}};
  EXPECT_EQ(names, want);
  EXPECT_TRUE(s.columns_of_type(DataType::Boolean).empty());
  auto text = s.columns_of_type(DataType::Text);
  ASSERT_EQ(text.size(), 2u);
  EXPECT_EQ(text[0].second.name, "name");
  EXPECT_EQ(text[1].second.name, "venue");
}

TEST(ColumnsOfType, PartitionsEveryColumn) {
  Rng rng(11);
  for (int trial = 0; trial < 100; ++trial) {
    DatabaseSchema s = random_schema(rng);
    std::size_t total = 0;
    for (const auto& t : s.tables()) total += t.columns.size();
    std::size_t seen = 0;
    for (DataType type : kTypes)
      for (const auto& [table, col] : s.columns_of_type(type)) {
        ASSERT_EQ(col.data_type, type);
        ++seen;
      }
    ASSERT_EQ(seen, total);
  }
}

TEST(SchemaJson, RoundTrip) {
  EXPECT_EQ(schema_from_json(schema_to_json(toy_schema())), toy_schema());
  EXPECT_EQ(schema_from_json(schema_to_json(music_schema())), music_schema());
  DatabaseSchema year = load_schema(fixture_src("toy_year.json"));
  EXPECT_EQ(schema_from_json(schema_to_json(year)), year);
  Rng rng(3);
  for (int trial = 0; trial < 100; ++trial) {
    DatabaseSchema s = random_schema(rng);
    ASSERT_EQ(schema_from_json(nlohmann::ordered_json::parse(schema_to_json(s).dump())), s);
  }
}

TEST(SchemaJson, KeyOrder) {
  auto doc = schema_to_json(toy_schema());
  std::vector<std::string> keys;
  for (const auto& [k, v] : doc.items()) keys.push_back(k);
  EXPECT_EQ(keys, (std::vector<std::string>{"db_id", "tables", "foreign_keys"}));
  std::vector<std::string> col_keys;
  for (const auto& [k, v] : doc["tables"][0]["columns"][0].items()) col_keys.push_back(k);
  EXPECT_EQ(col_keys, (std::vector<std::string>{"name", "type", "pk", "comment"}));
}

TEST(Schema, FkColumns) {
  DatabaseSchema s = toy_schema();
  EXPECT_TRUE(s.is_fk_column("concert", "singer_id"));
  EXPECT_TRUE(s.is_fk_column("singer", "id"));
  EXPECT_FALSE(s.is_fk_column("concert", "id"));
  EXPECT_FALSE(s.is_fk_column("singer", "age"));
}
