#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "json.hpp"
#include "spft/rng.hpp"
#include "spft/sample.hpp"
#include "spft/schema.hpp"

namespace spft {

enum class SlotKind { Column, Value };

std::string_view to_string(SlotKind kind) noexcept;

/// One typed hole of a template. Column slots carry the ordinal of their
/// placeholder within its (type, fk) class, so slot 2 of a template may be
/// spelled col_text_1.
struct Slot {
  int id = 0;  // 1-based, consecutive per kind
  SlotKind kind = SlotKind::Column;
  DataType data_type = DataType::Other;
  bool is_fk = false;
  int ordinal = 0;  // column slots only

  std::string placeholder() const;  // column slots: col_<type>[_key_fk]_<n>

  friend bool operator==(const Slot&, const Slot&) = default;
};

struct SqlTemplate {
  std::string skeleton;
  std::vector<Slot> slots;  // order of appearance in the skeleton
  std::size_t source_count = 0;

  std::vector<Slot> column_slots() const;
  std::vector<Slot> value_slots() const;
  /// Same skeleton and slot list; counts are ignored.
  bool same_shape(const SqlTemplate& other) const { return skeleton == other.skeleton && slots == other.slots; }
};

/// Re-derives the slot list from a skeleton's placeholders: one column slot per
/// distinct placeholder at its first appearance, one value slot per value token.
/// Throws ParseError if the skeleton does not parse.
std::vector<Slot> slots_from_skeleton(std::string_view skeleton);

/// Normalizes a SELECT into a table-free skeleton. Column references become
/// placeholders numbered per (type, fk) class in print order; literals become
/// value tokens; FROM/JOIN clauses are dropped at every nesting level. LIMIT
/// and OFFSET counts are structure and stay verbatim.
/// Throws ParseError, UnresolvedColumn or UnsupportedStatement.
SqlTemplate extract_template(std::string_view sql, const DatabaseSchema& schema);

class TemplatePool {
 public:
  TemplatePool() = default;

  /// Merges into an existing template with the same shape (adding counts) or
  /// appends. Returns the template's index.
  std::size_t add(SqlTemplate tmpl);
  std::optional<std::size_t> find(const SqlTemplate& shape) const;
  void add_count(std::size_t index, std::size_t delta);

  const std::vector<SqlTemplate>& templates() const noexcept { return templates_; }
  const SqlTemplate& at(std::size_t index) const { return templates_.at(index); }
  std::size_t size() const noexcept { return templates_.size(); }
  bool empty() const noexcept { return templates_.empty(); }
  std::size_t total_count() const noexcept { return total_count_; }

  friend bool operator==(const TemplatePool& a, const TemplatePool& b);

 private:
  std::vector<SqlTemplate> templates_;
  std::map<std::string, std::size_t> by_skeleton_;
  std::size_t total_count_ = 0;
};

struct PoolFailure {
  std::size_t line = 0;  // 0-based corpus index
  std::string reason;
};

struct PoolReport {
  std::size_t items = 0;
  std::size_t extracted = 0;
  std::vector<PoolFailure> failures;
};

/// Extracts every corpus item against its database's schema and counts
/// duplicates. Items that fail are skipped and listed in the report.
/// Throws AllItemsFailed when nothing was extracted (including an empty corpus).
TemplatePool build_pool(std::span<const SynthSample> corpus, const std::map<std::string, DatabaseSchema>& schemas,
                        PoolReport* report = nullptr);

/// Index drawn with probability source_count / total_count. Throws EmptyPool.
std::size_t sample_template_index(const TemplatePool& pool, Rng& rng);
const SqlTemplate& sample_template(const TemplatePool& pool, Rng& rng);

nlohmann::ordered_json pool_to_json(const TemplatePool& pool);
/// Validates that each slot list matches its skeleton. Throws FormatError.
TemplatePool pool_from_json(const nlohmann::ordered_json& doc);

}  // namespace spft
