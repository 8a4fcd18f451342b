#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "spft/database.hpp"
#include "spft/rng.hpp"
#include "spft/sample.hpp"
#include "spft/schema.hpp"
#include "spft/sql.hpp"
#include "spft/template.hpp"

namespace spft {

/// Column slot id -> physical column.
using Bindings = std::map<int, ColumnRef>;

struct ColumnCandidate {
  std::string table;
  std::string column;
  double weight = 0.0;  // accumulated over the slots of one instantiation
};

/// Candidate weights at the moment one column slot was drawn.
struct SelectionStep {
  int slot_id = 0;
  std::vector<ColumnCandidate> candidates;
  ColumnRef chosen;
};

inline constexpr double kDisconnectedWeight = 0.01;

/// Fills column slots in order. The first slot draws uniformly; later slots
/// set weight 1 for candidates in an already selected table and otherwise add
/// 1/(1+d) (d = FK distance to the nearest selected table, kDisconnectedWeight
/// when unreachable), then draw proportionally. Slots only take columns whose
/// FK participation matches the slot, and no column is used twice.
/// Throws NoCompatibleColumn or ExhaustedCandidates.
Bindings select_columns(const SqlTemplate& tmpl, const DatabaseSchema& schema, Rng& rng,
                        std::vector<SelectionStep>* trace = nullptr);

/// Replaces every value token of a skeleton (column placeholders still in
/// place) with a literal drawn uniformly from the distinct non-null values of
/// its associated column: the nearest preceding placeholder of compatible
/// type, else the nearest following one. Throws NoValuesAvailable.
std::string fill_values(std::string_view sql_partial, const Bindings& bindings, Database& db, Rng& rng);

/// FROM items joining `tables` (first-use order) along shortest FK paths.
/// Throws DisconnectedTables.
std::vector<sql::FromItem> join_tables(const std::vector<std::string>& tables, const DatabaseSchema& schema);

/// "FROM t1 JOIN t2 ON t1.a = t2.b ..." over the tables of the bindings in slot order.
std::string reconstruct_from_clause(const Bindings& bindings, const DatabaseSchema& schema);

/// Builds an executable query from a skeleton whose value tokens are already
/// filled: substitutes qualified column names and inserts a FROM clause into
/// every SELECT core. Cores without columns draw a table uniformly.
std::string compose_sql(std::string_view filled_skeleton, const Bindings& bindings, const DatabaseSchema& schema,
                        Rng& rng);

/// Full instantiation with execution check and retries. The returned sample's
/// seed is the seed of `rng`. Throws NoCompatibleColumn / ExhaustedCandidates
/// straight away and InstantiationFailed once max_retries attempts failed.
SynthSample instantiate(const SqlTemplate& tmpl, const DatabaseSchema& schema, Database& db, Rng& rng,
                        std::size_t max_retries, std::optional<std::size_t> template_id = std::nullopt);

/// Rule-based English rendering of a query. Throws ParseError (including for
/// non-SELECT input).
std::string render_nlq(std::string_view sql, const DatabaseSchema& schema);

struct SynthesisStats {
  std::size_t attempts = 0;
  std::size_t duplicates = 0;
  std::map<std::size_t, std::size_t> failures_by_template;
  std::map<std::string, std::size_t> failures_by_error;
};

struct SynthesisOptions {
  std::size_t max_retries = 10;
  /// Extra rejection rule, e.g. to keep a training split disjoint from validation.
  std::function<bool(const SynthSample&)> reject;
};

/// n distinct samples (distinct SQL and distinct questions). Attempt i uses
/// the random stream (seed, i), so output depends only on the inputs.
/// Throws InvalidArgument for n = 0 and SynthesisStalled after n * max_retries
/// attempts.
std::vector<SynthSample> synthesize_dataset(const TemplatePool& pool, const DatabaseSchema& schema, Database& db,
                                            std::size_t n, std::uint64_t seed, const SynthesisOptions& options = {},
                                            SynthesisStats* stats = nullptr);

}  // namespace spft
