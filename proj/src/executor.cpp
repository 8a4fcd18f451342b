#include "spft/executor.hpp"

#include <omp.h>
#include <sqlite3.h>

#include <algorithm>
#include <cctype>
#include <cmath>
#include <exception>
#include <functional>
#include <numeric>

#include "spft/error.hpp"

namespace spft {

std::string_view to_string(VerdictKind kind) noexcept {
  switch (kind) {
    case VerdictKind::Correct: return "correct";
    case VerdictKind::Incorrect: return "incorrect";
    case VerdictKind::ExecError: return "exec_error";
  }
  return "incorrect";
}

void ExecConfig::validate() const {
  if (timeout.count() <= 0) throw Error(Errc::InvalidArgument, "timeout must be positive");
  if (!(float_tolerance >= 0.0)) throw Error(Errc::InvalidArgument, "float_tolerance must be nonnegative");
  if (max_rows < 1) throw Error(Errc::InvalidArgument, "max_rows must be at least 1");
}

namespace {

// First keyword of the statement, skipping whitespace, comments and '('.
std::string leading_keyword(std::string_view sql) {
  std::size_t i = 0;
  while (i < sql.size()) {
    char c = sql[i];
    if (std::isspace(static_cast<unsigned char>(c)) || c == '(') {
      ++i;
    } else if (sql.substr(i, 2) == "--") {
      while (i < sql.size() && sql[i] != '\n') ++i;
    } else if (sql.substr(i, 2) == "/*") {
      std::size_t end = sql.find("*/", i + 2);
      i = end == std::string_view::npos ? sql.size() : end + 2;
    } else {
      break;
    }
  }
  std::string word;
  while (i < sql.size() && std::isalpha(static_cast<unsigned char>(sql[i])))
    word += static_cast<char>(std::toupper(static_cast<unsigned char>(sql[i++])));
  return word;
}

bool only_trailing_noise(const char* tail) {
  std::string_view rest(tail ? tail : "");
  std::size_t i = 0;
  while (i < rest.size()) {
    char c = rest[i];
    if (std::isspace(static_cast<unsigned char>(c)) || c == ';') {
      ++i;
    } else if (rest.substr(i, 2) == "--") {
      while (i < rest.size() && rest[i] != '\n') ++i;
    } else if (rest.substr(i, 2) == "/*") {
      std::size_t end = rest.find("*/", i + 2);
      if (end == std::string_view::npos) return false;
      i = end + 2;
    } else {
      return false;
    }
  }
  return true;
}

struct Deadline {
  std::chrono::steady_clock::time_point at;
  bool expired = false;
};

int progress_callback(void* arg) {
  auto* deadline = static_cast<Deadline*>(arg);
  if (std::chrono::steady_clock::now() >= deadline->at) {
    deadline->expired = true;
    return 1;
  }
  return 0;
}

Errc classify_sqlite_error(std::string_view message) {
  if (message.find("syntax error") != std::string_view::npos ||
      message.find("incomplete input") != std::string_view::npos ||
      message.find("unrecognized token") != std::string_view::npos)
    return Errc::SyntaxError;
  return Errc::RuntimeError;
}

struct StmtGuard {
  sqlite3_stmt* stmt = nullptr;
  ~StmtGuard() { sqlite3_finalize(stmt); }
};

struct ProgressGuard {
  sqlite3* db;
  ~ProgressGuard() { sqlite3_progress_handler(db, 0, nullptr, nullptr); }
};

double canonical_number(double x) { return x == 0.0 ? 0.0 : x; }

int kind_rank(const Cell& c) { return static_cast<int>(c.index()); }

// Strict ordering on canonical cells: null < number < text.
int compare_cells(const Cell& a, const Cell& b) {
  int ka = kind_rank(a), kb = kind_rank(b);
  if (ka != kb) return ka < kb ? -1 : 1;
  if (ka == 1) {
    double x = std::get<double>(a), y = std::get<double>(b);
    return x < y ? -1 : (x > y ? 1 : 0);
  }
  if (ka == 2) {
    int c = std::get<std::string>(a).compare(std::get<std::string>(b));
    return c < 0 ? -1 : (c > 0 ? 1 : 0);
  }
  return 0;
}

bool row_less(const std::vector<Cell>& a, const std::vector<Cell>& b) {
  for (std::size_t i = 0; i < a.size() && i < b.size(); ++i) {
    int c = compare_cells(a[i], b[i]);
    if (c != 0) return c < 0;
  }
  return a.size() < b.size();
}

bool cells_equal(const Cell& a, const Cell& b, double tol) {
  if (a.index() != b.index()) return false;
  if (a.index() == 1) return std::fabs(std::get<double>(a) - std::get<double>(b)) <= tol;
  if (a.index() == 2) return std::get<std::string>(a) == std::get<std::string>(b);
  return true;
}

bool rows_equal(const std::vector<Cell>& a, const std::vector<Cell>& b, double tol) {
  if (a.size() != b.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i)
    if (!cells_equal(a[i], b[i], tol)) return false;
  return true;
}

// Kuhn's augmenting-path bipartite matching between two row groups.
bool perfect_matching(const std::vector<const std::vector<Cell>*>& left,
                      const std::vector<const std::vector<Cell>*>& right, double tol) {
  const std::size_t n = left.size();
  std::vector<std::vector<std::size_t>> adj(n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j)
      if (rows_equal(*left[i], *right[j], tol)) adj[i].push_back(j);
    if (adj[i].empty()) return false;
  }
  std::vector<long> match_right(n, -1);
  std::vector<char> visited;
  std::function<bool(std::size_t)> augment = [&](std::size_t u) {
    for (std::size_t v : adj[u]) {
      if (visited[v]) continue;
      visited[v] = 1;
      if (match_right[v] < 0 || augment(static_cast<std::size_t>(match_right[v]))) {
        match_right[v] = static_cast<long>(u);
        return true;
      }
    }
    return false;
  };
  for (std::size_t u = 0; u < n; ++u) {
    visited.assign(n, 0);
    if (!augment(u)) return false;
  }
  return true;
}

// Non-numeric part of a row; rows can only match inside equal signatures.
std::vector<Cell> signature(const std::vector<Cell>& row) {
  std::vector<Cell> sig;
  sig.reserve(row.size());
  for (const auto& c : row) sig.push_back(c.index() == 1 ? Cell(0.0) : c);
  return sig;
}

bool bag_match_with_tolerance(const ResultTable& a, const ResultTable& b, double tol) {
  using Group = std::vector<const std::vector<Cell>*>;
  auto group = [](const ResultTable& t) {
    std::vector<std::pair<std::vector<Cell>, const std::vector<Cell>*>> keyed;
    keyed.reserve(t.rows.size());
    for (const auto& r : t.rows) keyed.emplace_back(signature(r), &r);
    std::stable_sort(keyed.begin(), keyed.end(),
                     [](const auto& x, const auto& y) { return row_less(x.first, y.first); });
    std::vector<std::pair<std::vector<Cell>, Group>> groups;
    for (auto& [sig, row] : keyed) {
      if (groups.empty() || row_less(groups.back().first, sig)) groups.push_back({sig, {}});
      groups.back().second.push_back(row);
    }
    return groups;
  };
  auto ga = group(a);
  auto gb = group(b);
  if (ga.size() != gb.size()) return false;
  for (std::size_t i = 0; i < ga.size(); ++i) {
    if (row_less(ga[i].first, gb[i].first) || row_less(gb[i].first, ga[i].first)) return false;
    if (ga[i].second.size() != gb[i].second.size()) return false;
    if (!perfect_matching(ga[i].second, gb[i].second, tol)) return false;
  }
  return true;
}

}  // namespace

ResultTable execute(Database& db, std::string_view sql, const ExecConfig& config) {
  std::string keyword = leading_keyword(sql);
  if (keyword != "SELECT" && keyword != "WITH" && keyword != "VALUES")
    throw Error(Errc::WriteRejected, "only a single SELECT may be executed");

  sqlite3* raw = db.raw();
  std::string text(sql);
  StmtGuard guard;
  const char* tail = nullptr;
  if (sqlite3_prepare_v2(raw, text.c_str(), static_cast<int>(text.size()), &guard.stmt, &tail) != SQLITE_OK) {
    std::string msg = sqlite3_errmsg(raw);
    throw Error(classify_sqlite_error(msg), msg);
  }
  if (!guard.stmt) throw Error(Errc::SyntaxError, "empty statement");
  if (!only_trailing_noise(tail)) throw Error(Errc::WriteRejected, "more than one statement");
  if (!sqlite3_stmt_readonly(guard.stmt)) throw Error(Errc::WriteRejected, "statement is not read-only");

  Deadline deadline{std::chrono::steady_clock::now() + config.timeout};
  sqlite3_progress_handler(raw, 1000, progress_callback, &deadline);
  ProgressGuard progress{raw};

  ResultTable table;
  table.column_count = static_cast<std::size_t>(sqlite3_column_count(guard.stmt));
  int rc;
  while ((rc = sqlite3_step(guard.stmt)) == SQLITE_ROW) {
    if (table.rows.size() >= config.max_rows) {
      table.truncated = true;
      break;
    }
    std::vector<Cell> row;
    row.reserve(table.column_count);
    for (int c = 0; c < static_cast<int>(table.column_count); ++c) {
      switch (sqlite3_column_type(guard.stmt, c)) {
        case SQLITE_NULL:
          row.emplace_back(std::monostate{});
          break;
        case SQLITE_INTEGER:
          row.emplace_back(canonical_number(static_cast<double>(sqlite3_column_int64(guard.stmt, c))));
          break;
        case SQLITE_FLOAT:
          row.emplace_back(canonical_number(sqlite3_column_double(guard.stmt, c)));
          break;
        default: {
          const void* bytes = sqlite3_column_blob(guard.stmt, c);
          int len = sqlite3_column_bytes(guard.stmt, c);
          row.emplace_back(std::string(static_cast<const char*>(bytes), bytes ? static_cast<std::size_t>(len) : 0));
          break;
        }
      }
    }
    table.rows.push_back(std::move(row));
  }
  if (rc != SQLITE_ROW && rc != SQLITE_DONE) {
    if (deadline.expired) throw Error(Errc::Timeout, "query exceeded " + std::to_string(config.timeout.count()) + " ms");
    std::string msg = sqlite3_errmsg(raw);
    throw Error(classify_sqlite_error(msg), msg);
  }
  return table;
}

bool results_equal(const ResultTable& a, const ResultTable& b, bool order_sensitive, double float_tolerance) {
  if (a.column_count != b.column_count) return false;
  if (a.rows.size() != b.rows.size()) return false;
  if (order_sensitive) {
    for (std::size_t i = 0; i < a.rows.size(); ++i)
      if (!rows_equal(a.rows[i], b.rows[i], float_tolerance)) return false;
    return true;
  }
  std::vector<const std::vector<Cell>*> sa, sb;
  for (const auto& r : a.rows) sa.push_back(&r);
  for (const auto& r : b.rows) sb.push_back(&r);
  auto less = [](const std::vector<Cell>* x, const std::vector<Cell>* y) { return row_less(*x, *y); };
  std::sort(sa.begin(), sa.end(), less);
  std::sort(sb.begin(), sb.end(), less);
  bool aligned = true;
  for (std::size_t i = 0; i < sa.size() && aligned; ++i) aligned = rows_equal(*sa[i], *sb[i], float_tolerance);
  if (aligned) return true;
  if (float_tolerance == 0.0) return false;
  // near-equal numbers can sort in different orders; fall back to matching
  return bag_match_with_tolerance(a, b, float_tolerance);
}

bool has_top_level_order_by(std::string_view sql) {
  int depth = 0;
  std::string previous;
  std::size_t i = 0;
  while (i < sql.size()) {
    char c = sql[i];
    if (c == '\'' || c == '"' || c == '`') {
      std::size_t j = i + 1;
      while (j < sql.size()) {
        if (sql[j] == c) {
          if (j + 1 < sql.size() && sql[j + 1] == c) {
            j += 2;
            continue;
          }
          break;
        }
        ++j;
      }
      i = j + 1;
      previous.clear();
      continue;
    }
    // comments separate words like whitespace
    if (sql.substr(i, 2) == "--") {
      std::size_t end = sql.find('\n', i);
      i = end == std::string_view::npos ? sql.size() : end + 1;
      continue;
    }
    if (sql.substr(i, 2) == "/*") {
      std::size_t end = sql.find("*/", i + 2);
      i = end == std::string_view::npos ? sql.size() : end + 2;
      continue;
    }
    if (c == '(') ++depth;
    if (c == ')') --depth;
    if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
      std::string word;
      while (i < sql.size() && (std::isalnum(static_cast<unsigned char>(sql[i])) || sql[i] == '_'))
        word += static_cast<char>(std::toupper(static_cast<unsigned char>(sql[i++])));
      if (depth == 0 && previous == "ORDER" && word == "BY") return true;
      previous = std::move(word);
      continue;
    }
    if (!std::isspace(static_cast<unsigned char>(c))) previous.clear();
    ++i;
  }
  return false;
}

Verdict classify(Database& db, std::string_view gold_sql, std::string_view pred_sql, const ExecConfig& config) {
  ResultTable gold;
  try {
    gold = execute(db, gold_sql, config);
  } catch (const Error& e) {
    throw Error(Errc::GoldExecFailed, e.what());
  }
  ResultTable pred;
  try {
    pred = execute(db, pred_sql, config);
  } catch (const Error& e) {
    return Verdict{VerdictKind::ExecError, std::string(e.what())};
  }
  bool same = results_equal(gold, pred, has_top_level_order_by(gold_sql), config.float_tolerance);
  return Verdict{same ? VerdictKind::Correct : VerdictKind::Incorrect, std::nullopt};
}

namespace {

double fraction_correct(const std::vector<Verdict>& verdicts) {
  std::size_t correct = 0;
  for (const auto& v : verdicts) correct += v.correct() ? 1 : 0;
  return static_cast<double>(correct) / static_cast<double>(verdicts.size());
}

void require_items(std::span<const EvalItem> items) {
  if (items.empty()) throw Error(Errc::EmptyInput, "no samples to evaluate");
}

}  // namespace

std::vector<Verdict> classify_batch(const DbCatalog& catalog, std::span<const EvalItem> items,
                                    const ExecConfig& config, int jobs) {
  const long n = static_cast<long>(items.size());
  std::vector<Verdict> out(items.size());
  std::vector<std::exception_ptr> errors(items.size());
  const int threads = jobs > 0 ? jobs : omp_get_max_threads();
#pragma omp parallel num_threads(threads)
  {
    HandleCache handles(catalog);
#pragma omp for schedule(dynamic, 8)
    for (long i = 0; i < n; ++i) {
      try {
        const EvalItem& item = items[static_cast<std::size_t>(i)];
        out[static_cast<std::size_t>(i)] = classify(handles.get(item.sample.db_id), item.sample.sql, item.pred_sql, config);
      } catch (...) {
        errors[static_cast<std::size_t>(i)] = std::current_exception();
      }
    }
  }
  for (const auto& e : errors)
    if (e) std::rethrow_exception(e);
  return out;
}

double ex_accuracy(const DbCatalog& catalog, std::span<const EvalItem> items, const ExecConfig& config, int jobs) {
  require_items(items);
  return fraction_correct(classify_batch(catalog, items, config, jobs));
}

double ts_accuracy(std::span<const DbCatalog> variants, std::span<const EvalItem> items, const ExecConfig& config,
                   int jobs) {
  require_items(items);
  if (variants.empty()) throw Error(Errc::EmptyInput, "no database variants");
  std::vector<char> all_correct(items.size(), 1);
  for (const auto& variant : variants) {
    auto verdicts = classify_batch(variant, items, config, jobs);
    for (std::size_t i = 0; i < items.size(); ++i) all_correct[i] &= verdicts[i].correct() ? 1 : 0;
  }
  return static_cast<double>(std::accumulate(all_correct.begin(), all_correct.end(), 0L)) /
         static_cast<double>(items.size());
}

namespace serial {

std::vector<Verdict> classify_batch(const DbCatalog& catalog, std::span<const EvalItem> items,
                                    const ExecConfig& config) {
  HandleCache handles(catalog);
  std::vector<Verdict> out;
  out.reserve(items.size());
  for (const auto& item : items)
    out.push_back(classify(handles.get(item.sample.db_id), item.sample.sql, item.pred_sql, config));
  return out;
}

double ex_accuracy(const DbCatalog& catalog, std::span<const EvalItem> items, const ExecConfig& config) {
  require_items(items);
  return fraction_correct(serial::classify_batch(catalog, items, config));
}

double ts_accuracy(std::span<const DbCatalog> variants, std::span<const EvalItem> items,
                   const ExecConfig& config) {
  require_items(items);
  if (variants.empty()) throw Error(Errc::EmptyInput, "no database variants");
  std::size_t correct = 0;
  for (const auto& item : items) {
    bool ok = true;
    for (const auto& variant : variants) {
      HandleCache handles(variant);
      ok = classify(handles.get(item.sample.db_id), item.sample.sql, item.pred_sql, config).correct() && ok;
    }
    correct += ok ? 1 : 0;
  }
  return static_cast<double>(correct) / static_cast<double>(items.size());
}

}  // namespace serial

Database& Verifier::db(const std::string& db_id) const {
  auto it = dbs_.find(db_id);
  if (it == dbs_.end()) throw Error(Errc::InvalidArgument, "no database attached for '" + db_id + "'");
  return *it->second;
}

Verdict Verifier::classify(const std::string& db_id, const std::string& gold_sql, const std::string& pred_sql) {
  auto key = std::make_tuple(db_id, gold_sql, pred_sql);
  if (auto it = cache_.find(key); it != cache_.end()) return it->second;

  Database& handle = db(db_id);
  auto gold_key = db_id + '\x1f' + gold_sql;
  auto git = gold_results_.find(gold_key);
  if (git == gold_results_.end()) {
    try {
      git = gold_results_.emplace(gold_key, execute(handle, gold_sql, config_)).first;
    } catch (const Error& e) {
      throw Error(Errc::GoldExecFailed, e.what());
    }
  }
  Verdict verdict;
  try {
    ResultTable pred = execute(handle, pred_sql, config_);
    bool same = results_equal(git->second, pred, has_top_level_order_by(gold_sql), config_.float_tolerance);
    verdict.kind = same ? VerdictKind::Correct : VerdictKind::Incorrect;
  } catch (const Error& e) {
    verdict = Verdict{VerdictKind::ExecError, std::string(e.what())};
  }
  cache_.emplace(std::move(key), verdict);
  return verdict;
}

}  // namespace spft
