#pragma once

#include <array>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "json.hpp"

namespace spft {

enum class DataType { Number, Text, Time, Boolean, Other };

inline constexpr std::array<DataType, 5> kAllDataTypes = {
    DataType::Number, DataType::Text, DataType::Time, DataType::Boolean, DataType::Other};

std::string_view to_string(DataType type) noexcept;
/// Throws Error(FormatError) for anything outside the five names.
DataType parse_data_type(std::string_view name);
/// Maps a declared column type (as written in CREATE TABLE) onto the coarse enum.
DataType data_type_from_declared(std::string_view declared);

struct ColumnDef {
  std::string name;
  DataType data_type = DataType::Other;
  bool is_primary_key = false;
  std::optional<std::string> comment;

  friend bool operator==(const ColumnDef&, const ColumnDef&) = default;
};

struct TableDef {
  std::string name;
  std::vector<ColumnDef> columns;

  const ColumnDef* find_column(std::string_view column) const;

  friend bool operator==(const TableDef&, const TableDef&) = default;
};

struct ForeignKey {
  std::string from_table;
  std::string from_column;
  std::string to_table;
  std::string to_column;

  friend bool operator==(const ForeignKey&, const ForeignKey&) = default;
};

struct ColumnRef {
  std::string table;
  std::string column;

  friend bool operator==(const ColumnRef&, const ColumnRef&) = default;
  friend auto operator<=>(const ColumnRef&, const ColumnRef&) = default;
};

/// Immutable relational schema plus its foreign-key graph. Identifier lookups
/// are case-insensitive, matching SQLite.
class DatabaseSchema {
 public:
  DatabaseSchema() = default;
  /// Validates every invariant; throws FormatError / UnresolvedFk.
  DatabaseSchema(std::string db_id, std::vector<TableDef> tables, std::vector<ForeignKey> foreign_keys);

  const std::string& db_id() const noexcept { return db_id_; }
  const std::vector<TableDef>& tables() const noexcept { return tables_; }
  const std::vector<ForeignKey>& foreign_keys() const noexcept { return foreign_keys_; }

  std::optional<std::size_t> table_index(std::string_view table) const;
  const TableDef* find_table(std::string_view table) const;
  const TableDef& table(std::string_view table) const;  // throws UnknownTable

  /// True when the column sits on either side of some foreign key.
  bool is_fk_column(std::string_view table, std::string_view column) const;

  /// Hop count over the undirected FK graph; nullopt when disconnected.
  std::optional<int> fk_distance(std::string_view table_a, std::string_view table_b) const;

  /// Shortest FK path from any table in `sources` to `target` as a list of
  /// (foreign key index, table reached) steps. Empty when target is a source.
  std::optional<std::vector<std::pair<std::size_t, std::size_t>>> shortest_path(
      const std::vector<std::size_t>& sources, std::size_t target) const;

  std::vector<std::pair<std::string, ColumnDef>> columns_of_type(DataType type) const;

  friend bool operator==(const DatabaseSchema& a, const DatabaseSchema& b) {
    return a.db_id_ == b.db_id_ && a.tables_ == b.tables_ && a.foreign_keys_ == b.foreign_keys_;
  }

 private:
  std::string db_id_;
  std::vector<TableDef> tables_;
  std::vector<ForeignKey> foreign_keys_;
  // adjacency[table] = (fk index, neighbour table), FK declaration order
  std::vector<std::vector<std::pair<std::size_t, std::size_t>>> adjacency_;
  std::vector<std::vector<int>> distance_;  // -1 = disconnected
};

enum class SchemaSource { DatabaseFile, SchemaJson };

DatabaseSchema load_schema(const std::filesystem::path& path, SchemaSource kind);
/// Picks the source kind from the file extension (.json vs anything else).
DatabaseSchema load_schema(const std::filesystem::path& path);

nlohmann::ordered_json schema_to_json(const DatabaseSchema& schema);
DatabaseSchema schema_from_json(const nlohmann::ordered_json& doc);

/// Case-insensitive identifier comparison.
bool iequals(std::string_view a, std::string_view b) noexcept;
std::string to_lower(std::string_view s);

}  // namespace spft
