#include <algorithm>
#include <chrono>
#include <numeric>

#include "expect.hpp"
#include "fixtures.hpp"
#include "spft/executor.hpp"
#include "spft/rng.hpp"

using namespace spft;
using namespace spft::testing;

namespace {

ResultTable table(std::size_t cols, std::vector<std::vector<Cell>> rows) {
  ResultTable t;
  t.column_count = cols;
  t.rows = std::move(rows);
  return t;
}

Cell random_cell(Rng& rng) {
  switch (rng.uniform_index(6)) {
    case 0: return std::monostate{};
    case 1: return static_cast<double>(rng.uniform_index(3));
    case 2: return 1.5;
    case 3: return std::string("a");
    case 4: return std::string(rng.uniform_index(2) ? "b" : "");
    default: return 0.5 + 1e-9 * static_cast<double>(rng.uniform_index(3));
  }
}

ResultTable random_table(Rng& rng, std::size_t cols, std::size_t rows) {
  ResultTable t;
  t.column_count = cols;
  for (std::size_t r = 0; r < rows; ++r) {
    std::vector<Cell> row;
    for (std::size_t c = 0; c < cols; ++c) row.push_back(random_cell(rng));
    t.rows.push_back(std::move(row));
  }
  return t;
}

ResultTable shuffled(ResultTable t, Rng& rng) {
  for (std::size_t i = t.rows.size(); i > 1; --i) std::swap(t.rows[i - 1], t.rows[rng.uniform_index(i)]);
  return t;
}

// A pair that is equal, a permutation, a near-permutation, or unrelated.
std::pair<ResultTable, ResultTable> random_pair(Rng& rng) {
  std::size_t cols = 1 + rng.uniform_index(3), rows = rng.uniform_index(6);
  ResultTable a = random_table(rng, cols, rows);
  switch (rng.uniform_index(4)) {
    case 0: return {a, a};
    case 1: return {a, shuffled(a, rng)};
    case 2: {
      ResultTable b = shuffled(a, rng);
      if (!b.rows.empty()) b.rows[rng.uniform_index(b.rows.size())][0] = random_cell(rng);
      return {a, b};
    }
    default: return {a, random_table(rng, rng.uniform_index(4) == 0 ? cols + 1 : cols, rows)};
  }
}

// Oracle: canonical text per row, sorted, compared as lists.
bool sorted_multiset_oracle(const ResultTable& a, const ResultTable& b) {
  if (a.column_count != b.column_count || a.rows.size() != b.rows.size()) return false;
  auto canon = [](const ResultTable& t) {
    std::vector<std::string> rows;
    for (const auto& row : t.rows) {
      std::string s;
      for (const auto& c : row) {
        if (std::holds_alternative<std::monostate>(c)) s += "N|";
        else if (auto* d = std::get_if<double>(&c)) s += "D" + std::to_string(*d) + std::to_string(*d * 1e9) + "|";
        else s += "S" + std::get<std::string>(c) + "|";
      }
      rows.push_back(s);
    }
    std::sort(rows.begin(), rows.end());
    return rows;
  };
  return canon(a) == canon(b);
}

bool cell_close(const Cell& x, const Cell& y, double tol) {
  if (x.index() != y.index()) return false;
  if (auto* d = std::get_if<double>(&x)) return std::fabs(*d - std::get<double>(y)) <= tol;
  return x == y;
}

// Oracle for tolerance > 0: try every row permutation.
bool permutation_oracle(const ResultTable& a, const ResultTable& b, double tol) {
  if (a.column_count != b.column_count || a.rows.size() != b.rows.size()) return false;
  std::vector<std::size_t> perm(a.rows.size());
  std::iota(perm.begin(), perm.end(), 0);
  do {
    bool ok = true;
    for (std::size_t i = 0; i < perm.size() && ok; ++i)
      for (std::size_t c = 0; c < a.column_count && ok; ++c) ok = cell_close(a.rows[i][c], b.rows[perm[i]][c], tol);
    if (ok) return true;
  } while (std::next_permutation(perm.begin(), perm.end()));
  return false;
}

}  // namespace

TEST(Execute, SelectOne) {
  Database db = toy_db();
  ResultTable t = execute(db, "SELECT 1");
  EXPECT_EQ(t.column_count, 1u);
  ASSERT_EQ(t.rows.size(), 1u);
  EXPECT_EQ(t.rows[0][0], Cell(1.0));
  EXPECT_FALSE(t.truncated);
}

TEST(Execute, RowsInOrder) {
  Database db = toy_db();
  ResultTable t = execute(db, "SELECT name FROM singer ORDER BY id");
  ASSERT_EQ(t.rows.size(), 3u);
  EXPECT_EQ(t.rows[0][0], Cell(std::string("John Mayer")));
  EXPECT_EQ(t.rows[1][0], Cell(std::string("Adele")));
  EXPECT_EQ(t.rows[2][0], Cell(std::string("Sean O'Brien")));
}

TEST(Execute, Cells) {
  Database db = toy_db();
  ResultTable t = execute(db, "SELECT NULL, '', -0.0, 2.5, x'41'");
  ASSERT_EQ(t.rows.size(), 1u);
  EXPECT_TRUE(std::holds_alternative<std::monostate>(t.rows[0][0]));
  EXPECT_EQ(t.rows[0][1], Cell(std::string()));
  EXPECT_FALSE(std::signbit(std::get<double>(t.rows[0][2])));
  EXPECT_EQ(t.rows[0][3], Cell(2.5));
  EXPECT_EQ(t.rows[0][4], Cell(std::string("A")));
}

TEST(Execute, WritesRejected) {
  Database db = toy_db();
  EXPECT_ERRC(execute(db, "DROP TABLE singer"), Errc::WriteRejected);
  EXPECT_ERRC(execute(db, "DELETE FROM singer"), Errc::WriteRejected);
  EXPECT_ERRC(execute(db, "SELECT 1; DROP TABLE singer"), Errc::WriteRejected);
  EXPECT_ERRC(execute(db, "PRAGMA writable_schema = 1"), Errc::WriteRejected);
  EXPECT_NO_THROW(execute(db, "SELECT 1; -- trailing comment"));
  EXPECT_NO_THROW(execute(db, "WITH x AS (SELECT 1) SELECT * FROM x"));
  EXPECT_EQ(execute(db, "SELECT count(*) FROM singer").rows[0][0], Cell(3.0));
}

TEST(Execute, Errors) {
  Database db = toy_db();
  EXPECT_ERRC(execute(db, "SELECT FROM WHERE"), Errc::SyntaxError);
  EXPECT_ERRC(execute(db, "SELECT * FROM missing_table"), Errc::RuntimeError);
  EXPECT_ERRC(execute(db, "SELECT nope FROM singer"), Errc::RuntimeError);
}

TEST(Execute, TimeoutAndTruncation) {
  Database db = toy_db();
  ExecConfig cfg;
  cfg.timeout = std::chrono::milliseconds(50);
  auto start = std::chrono::steady_clock::now();
  EXPECT_ERRC(execute(db, "WITH RECURSIVE c(x) AS (SELECT 1 UNION ALL SELECT x + 1 FROM c) SELECT count(*) FROM c",
                      cfg),
              Errc::Timeout);
  EXPECT_LT(std::chrono::steady_clock::now() - start, std::chrono::seconds(5));
  cfg.max_rows = 2;
  ResultTable t = execute(db, "SELECT id FROM concert", cfg);
  EXPECT_EQ(t.rows.size(), 2u);
  EXPECT_TRUE(t.truncated);
}

TEST(ExecConfig, Validation) {
  ExecConfig cfg;
  EXPECT_NO_THROW(cfg.validate());
  cfg.max_rows = 0;
  EXPECT_ERRC(cfg.validate(), Errc::InvalidArgument);
  cfg = {};
  cfg.timeout = std::chrono::milliseconds(0);
  EXPECT_ERRC(cfg.validate(), Errc::InvalidArgument);
  cfg = {};
  cfg.float_tolerance = -1;
  EXPECT_ERRC(cfg.validate(), Errc::InvalidArgument);
}

TEST(ResultsEqual, Examples) {
  ResultTable a = table(2, {{1.0, std::string("x")}, {2.0, std::string("y")}});
  ResultTable permuted = table(2, {{2.0, std::string("y")}, {1.0, std::string("x")}});
  ResultTable changed = table(2, {{1.0, std::string("x")}, {2.0, std::string("z")}});
  EXPECT_TRUE(results_equal(a, a, false, 0.0));
  EXPECT_TRUE(results_equal(a, permuted, false, 0.0));
  EXPECT_FALSE(results_equal(a, permuted, true, 0.0));
  EXPECT_FALSE(results_equal(a, changed, false, 0.0));
  EXPECT_FALSE(results_equal(table(1, {}), table(2, {}), false, 0.0));
  EXPECT_TRUE(results_equal(table(1, {}), table(1, {}), true, 0.0));
  // null is distinct from the empty string; duplicates count
  EXPECT_FALSE(results_equal(table(1, {{std::monostate{}}}), table(1, {{std::string()}}), false, 0.0));
  EXPECT_FALSE(results_equal(table(1, {{1.0}, {1.0}, {2.0}}), table(1, {{1.0}, {2.0}, {2.0}}), false, 0.0));
  // tolerance
  EXPECT_TRUE(results_equal(table(1, {{1.0}}), table(1, {{1.0 + 1e-7}}), false, 1e-6));
  EXPECT_FALSE(results_equal(table(1, {{1.0}}), table(1, {{1.0 + 1e-5}}), false, 1e-6));
  EXPECT_FALSE(results_equal(table(1, {{1.0}}), table(1, {{std::string("1")}}), false, 1e-6));
}

TEST(ResultsEqual, ToleranceNeedsMatchingNotSorting) {
  // sorting pairs 0.9999999 with 1.0000001 only under a matching
  ResultTable a = table(2, {{1.0, std::string("b")}, {1.0000001, std::string("a")}});
  ResultTable b = table(2, {{0.9999999, std::string("a")}, {1.0, std::string("b")}});
  EXPECT_TRUE(results_equal(a, b, false, 1e-6));
  EXPECT_TRUE(permutation_oracle(a, b, 1e-6));
}

TEST(ResultsEqual, AgreesWithSortedMultisetOracle) {
  Rng rng(2024);
  for (int i = 0; i < 1000; ++i) {
    auto [a, b] = random_pair(rng);
    ASSERT_EQ(results_equal(a, b, false, 0.0), sorted_multiset_oracle(a, b)) << "case " << i;
  }
}

TEST(ResultsEqual, AgreesWithPermutationOracleUnderTolerance) {
  Rng rng(99);
  for (int i = 0; i < 1000; ++i) {
    auto [a, b] = random_pair(rng);
    ASSERT_EQ(results_equal(a, b, false, 1e-6), permutation_oracle(a, b, 1e-6)) << "case " << i;
  }
}

TEST(ResultsEqual, EquivalenceAndPermutationInvariance) {
  Rng rng(17);
  for (int i = 0; i < 300; ++i) {
    auto [a, b] = random_pair(rng);
    ResultTable c = shuffled(b, rng);
    for (double tol : {0.0, 1e-6}) {
      ASSERT_TRUE(results_equal(a, a, false, tol));
      ASSERT_TRUE(results_equal(a, a, true, tol));
      ASSERT_EQ(results_equal(a, b, false, tol), results_equal(b, a, false, tol));
      ASSERT_EQ(results_equal(a, b, true, tol), results_equal(b, a, true, tol));
      ASSERT_EQ(results_equal(a, b, false, tol), results_equal(shuffled(a, rng), c, false, tol));
    }
    if (results_equal(a, b, false, 0.0) && results_equal(b, c, false, 0.0)) {
      ASSERT_TRUE(results_equal(a, c, false, 0.0));
    }
  }
}

TEST(TopLevelOrderBy, Detection) {
  EXPECT_TRUE(has_top_level_order_by("SELECT a FROM t ORDER BY a"));
  EXPECT_TRUE(has_top_level_order_by("select a from t order\nby a"));
  EXPECT_FALSE(has_top_level_order_by("SELECT a FROM t WHERE a IN (SELECT b FROM u ORDER BY b LIMIT 1)"));
  EXPECT_FALSE(has_top_level_order_by("SELECT 'ORDER BY' FROM t"));
  EXPECT_FALSE(has_top_level_order_by("SELECT \"order by\" FROM t"));
  EXPECT_FALSE(has_top_level_order_by("SELECT a FROM t -- ORDER BY a"));
  EXPECT_FALSE(has_top_level_order_by("SELECT a FROM t /* ORDER BY a */"));
  EXPECT_TRUE(has_top_level_order_by("SELECT a FROM t ORDER/* x */BY a"));
}

TEST(Classify, Examples) {
  Database db = toy_db();
  EXPECT_EQ(classify(db, "SELECT name FROM singer", "SELECT name FROM singer").kind, VerdictKind::Correct);
  Verdict wrong = classify(db, "SELECT name FROM singer WHERE age > 20", "SELECT name FROM singer WHERE age > 99");
  EXPECT_EQ(wrong.kind, VerdictKind::Incorrect);
  EXPECT_FALSE(wrong.error_detail.has_value());
  Verdict err = classify(db, "SELECT name FROM singer", "SELECT name FROM nowhere");
  EXPECT_EQ(err.kind, VerdictKind::ExecError);
  EXPECT_TRUE(err.error_detail.has_value());
  EXPECT_EQ(classify(db, "SELECT name FROM singer", "DROP TABLE singer").kind, VerdictKind::ExecError);
  EXPECT_ERRC(classify(db, "SELECT name FROM nowhere", "SELECT 1"), Errc::GoldExecFailed);
}

TEST(Classify, OrderSensitivityFollowsGold) {
  Database db = toy_db();
  EXPECT_EQ(classify(db, "SELECT name FROM singer", "SELECT name FROM singer ORDER BY age DESC").kind,
            VerdictKind::Correct);
  EXPECT_EQ(classify(db, "SELECT name FROM singer ORDER BY age", "SELECT name FROM singer ORDER BY age DESC").kind,
            VerdictKind::Incorrect);
  // column names never matter
  EXPECT_EQ(classify(db, "SELECT name AS n FROM singer", "SELECT name FROM singer").kind, VerdictKind::Correct);
}

TEST(Classify, EveryFixtureGoldIsSelfCorrect) {
  Database db = music_db();
  for (const auto& s : music_corpus()) EXPECT_TRUE(classify(db, s.sql, s.sql).correct()) << s.sql;
}

namespace {

std::vector<EvalItem> music_items(std::size_t wrong_every) {
  std::vector<EvalItem> items;
  auto corpus = music_corpus();
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    std::string pred = corpus[i].sql;
    if (wrong_every && i % wrong_every == 0) pred = "SELECT 'nothing like gold'";
    if (wrong_every && i % wrong_every == 1) pred = "SELECT * FROM no_such_table";
    items.push_back({corpus[i], pred});
  }
  return items;
}

}  // namespace

TEST(Accuracy, Ex) {
  DbCatalog catalog = DbCatalog::from_directory(fixture_db(""));
  auto all_gold = music_items(0);
  EXPECT_DOUBLE_EQ(ex_accuracy(catalog, all_gold), 1.0);
  std::vector<EvalItem> four(all_gold.begin(), all_gold.begin() + 4);
  four[0].pred_sql = "SELECT 42";
  four[3].pred_sql = "SELECT broken FROM";
  EXPECT_DOUBLE_EQ(ex_accuracy(catalog, four), 0.5);
  EXPECT_ERRC(ex_accuracy(catalog, std::vector<EvalItem>{}), Errc::EmptyInput);
}

TEST(Accuracy, ParallelMatchesSerial) {
  DbCatalog catalog = DbCatalog::from_directory(fixture_db(""));
  auto items = music_items(5);
  auto serial = serial::classify_batch(catalog, items);
  for (int jobs : {1, 2, 4}) EXPECT_EQ(classify_batch(catalog, items, {}, jobs), serial);
  EXPECT_DOUBLE_EQ(ex_accuracy(catalog, items), serial::ex_accuracy(catalog, items));
  EXPECT_NEAR(ex_accuracy(catalog, items), 30.0 / 50.0, 1e-12);
}

TEST(Accuracy, ParallelRethrowsGoldFailure) {
  DbCatalog catalog = DbCatalog::from_directory(fixture_db(""));
  auto items = music_items(0);
  items[7].sample.sql = "SELECT * FROM no_such_table";
  EXPECT_ERRC(classify_batch(catalog, items, {}, 2), Errc::GoldExecFailed);
  EXPECT_ERRC(serial::classify_batch(catalog, items), Errc::GoldExecFailed);
}

TEST(Accuracy, TestSuite) {
  DbCatalog v1 = DbCatalog::from_directory(fixture_db("variants/v1"));
  DbCatalog v2 = DbCatalog::from_directory(fixture_db("variants/v2"));
  SynthSample gold{"", "SELECT name FROM singer WHERE age > 43", "music"};
  // equal on v1; on v2 a 44-year-old singer separates them
  std::vector<EvalItem> items{{gold, "SELECT name FROM singer WHERE age > 44"}, {gold, gold.sql}};
  std::vector<DbCatalog> one{v1}, both{v1, v2};
  EXPECT_DOUBLE_EQ(ts_accuracy(one, items), ex_accuracy(v1, items));
  EXPECT_DOUBLE_EQ(ex_accuracy(v1, items), 1.0);
  EXPECT_DOUBLE_EQ(ts_accuracy(both, items), 0.5);
  EXPECT_DOUBLE_EQ(serial::ts_accuracy(both, items), 0.5);
  std::vector<DbCatalog> three{v1, v2, v1};
  std::vector<EvalItem> golds{{gold, gold.sql}};
  EXPECT_DOUBLE_EQ(ts_accuracy(three, golds), 1.0);
  EXPECT_ERRC(ts_accuracy(std::vector<DbCatalog>{}, items), Errc::EmptyInput);
}

TEST(Accuracy, TsNeverExceedsExOnFirstVariant) {
  DbCatalog v1 = DbCatalog::from_directory(fixture_db("variants/v1"));
  DbCatalog v2 = DbCatalog::from_directory(fixture_db("variants/v2"));
  std::vector<DbCatalog> both{v1, v2};
  auto corpus = music_corpus();
  Rng rng(8);
  for (int trial = 0; trial < 10; ++trial) {
    std::vector<EvalItem> items;
    for (const auto& s : corpus) items.push_back({s, corpus[rng.uniform_index(corpus.size())].sql});
    EXPECT_LE(ts_accuracy(both, items), ex_accuracy(v1, items));
  }
}

TEST(Verifier, CachesVerdicts) {
  Database db = toy_db();
  Verifier v;
  v.attach("toy", db);
  EXPECT_TRUE(v.classify("toy", "SELECT id FROM singer", "SELECT id FROM singer").correct());
  EXPECT_EQ(v.classify("toy", "SELECT id FROM singer", "SELECT 1").kind, VerdictKind::Incorrect);
  EXPECT_EQ(v.cache_size(), 2u);
  EXPECT_EQ(v.classify("toy", "SELECT id FROM singer", "SELECT 1").kind, VerdictKind::Incorrect);
  EXPECT_EQ(v.cache_size(), 2u);
  EXPECT_ERRC(v.classify("other", "SELECT 1", "SELECT 1"), Errc::InvalidArgument);
  EXPECT_ERRC(v.classify("toy", "SELECT * FROM nowhere", "SELECT 1"), Errc::GoldExecFailed);
}

TEST(DbCatalog, Layouts) {
  DbCatalog flat = DbCatalog::from_directory(fixture_db(""));
  EXPECT_TRUE(flat.contains("toy"));
  EXPECT_TRUE(flat.contains("music"));
  auto dir = scratch_dir("nested_catalog");
  std::filesystem::create_directories(dir / "toy");
  std::filesystem::copy_file(fixture_db("toy.sqlite"), dir / "toy" / "toy.sqlite");
  DbCatalog nested = DbCatalog::from_directory(dir);
  EXPECT_TRUE(nested.contains("toy"));
  EXPECT_ERRC(nested.path("absent"), Errc::InvalidArgument);
}
