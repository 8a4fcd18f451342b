#pragma once

#include <chrono>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <tuple>
#include <utility>
#include <variant>
#include <vector>

#include "spft/database.hpp"
#include "spft/sample.hpp"

namespace spft {

/// null | number | text. Integers and reals share the numeric alternative.
using Cell = std::variant<std::monostate, double, std::string>;

struct ResultTable {
  std::size_t column_count = 0;
  std::vector<std::vector<Cell>> rows;
  bool truncated = false;
};

enum class VerdictKind { Correct, Incorrect, ExecError };

std::string_view to_string(VerdictKind kind) noexcept;

struct Verdict {
  VerdictKind kind = VerdictKind::Incorrect;
  std::optional<std::string> error_detail;  // present iff kind == ExecError

  bool correct() const noexcept { return kind == VerdictKind::Correct; }
  friend bool operator==(const Verdict&, const Verdict&) = default;
};

struct ExecConfig {
  std::chrono::milliseconds timeout{5000};
  double float_tolerance = 1e-6;
  std::size_t max_rows = 10000;

  void validate() const;  // throws InvalidArgument
};

/// Runs one read-only SELECT. Throws WriteRejected, SyntaxError, RuntimeError
/// or Timeout.
ResultTable execute(Database& db, std::string_view sql, const ExecConfig& config = {});

/// Positional comparison of two result tables; column names never matter.
/// Bag semantics unless order_sensitive.
bool results_equal(const ResultTable& a, const ResultTable& b, bool order_sensitive, double float_tolerance);

/// ORDER BY outside any parentheses.
bool has_top_level_order_by(std::string_view sql);

/// Execution-equivalence verdict of pred against gold. Throws GoldExecFailed
/// when gold itself does not execute.
Verdict classify(Database& db, std::string_view gold_sql, std::string_view pred_sql, const ExecConfig& config = {});

struct EvalItem {
  SynthSample sample;  // gold lives in sample.sql
  std::string pred_sql;
};

/// Parallel batch classification: each OpenMP worker opens its own read-only
/// handles from the catalog. Output order matches input order. jobs <= 0 uses
/// the OpenMP default.
std::vector<Verdict> classify_batch(const DbCatalog& catalog, std::span<const EvalItem> items,
                                    const ExecConfig& config = {}, int jobs = 0);

double ex_accuracy(const DbCatalog& catalog, std::span<const EvalItem> items, const ExecConfig& config = {},
                   int jobs = 0);

/// Simplified test-suite accuracy: a prediction counts only when it is correct
/// on every database variant.
double ts_accuracy(std::span<const DbCatalog> variants, std::span<const EvalItem> items,
                   const ExecConfig& config = {}, int jobs = 0);

namespace serial {

// Single-threaded reference implementations kept for tests and benchmarks.
std::vector<Verdict> classify_batch(const DbCatalog& catalog, std::span<const EvalItem> items,
                                    const ExecConfig& config = {});
double ex_accuracy(const DbCatalog& catalog, std::span<const EvalItem> items, const ExecConfig& config = {});
double ts_accuracy(std::span<const DbCatalog> variants, std::span<const EvalItem> items,
                   const ExecConfig& config = {});

}  // namespace serial

/// Memoizing classifier over caller-owned handles, used where the same
/// (gold, prediction) pairs are judged many times (self-play, pipeline).
class Verifier {
 public:
  explicit Verifier(ExecConfig config = {}) : config_(config) {}

  void attach(const std::string& db_id, Database& db) { dbs_[db_id] = &db; }
  Database& db(const std::string& db_id) const;
  const ExecConfig& config() const noexcept { return config_; }

  Verdict classify(const std::string& db_id, const std::string& gold_sql, const std::string& pred_sql);
  std::size_t cache_size() const noexcept { return cache_.size(); }

 private:
  ExecConfig config_;
  std::map<std::string, Database*> dbs_;
  std::map<std::string, ResultTable> gold_results_;
  std::map<std::tuple<std::string, std::string, std::string>, Verdict> cache_;
};

}  // namespace spft
