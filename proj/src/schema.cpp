#include "spft/schema.hpp"

#include <sqlite3.h>

#include <algorithm>
#include <cctype>
#include <deque>
#include <fstream>
#include <set>

#include "spft/database.hpp"
#include "spft/error.hpp"

namespace spft {

using nlohmann::ordered_json;

bool iequals(std::string_view a, std::string_view b) noexcept {
  return a.size() == b.size() && std::equal(a.begin(), a.end(), b.begin(), [](char x, char y) {
           return std::tolower(static_cast<unsigned char>(x)) == std::tolower(static_cast<unsigned char>(y));
         });
}

std::string to_lower(std::string_view s) {
  std::string out(s);
  for (auto& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

std::string_view to_string(DataType type) noexcept {
  switch (type) {
    case DataType::Number: return "number";
    case DataType::Text: return "text";
    case DataType::Time: return "time";
    case DataType::Boolean: return "boolean";
    case DataType::Other: return "other";
  }
  return "other";
}

DataType parse_data_type(std::string_view name) {
  for (DataType t : kAllDataTypes)
    if (name == to_string(t)) return t;
  throw Error(Errc::FormatError, "unknown column type '" + std::string(name) + "'");
}

DataType data_type_from_declared(std::string_view declared) {
  std::string d = to_lower(declared);
  auto has = [&](std::string_view needle) { return d.find(needle) != std::string::npos; };
  if (has("bool")) return DataType::Boolean;
  if (has("date") || has("time")) return DataType::Time;
  if (has("int") || has("real") || has("floa") || has("doub") || has("numeric") || has("decimal") ||
      has("number"))
    return DataType::Number;
  if (has("char") || has("text") || has("clob") || has("string")) return DataType::Text;
  return DataType::Other;
}

const ColumnDef* TableDef::find_column(std::string_view column) const {
  for (const auto& c : columns)
    if (iequals(c.name, column)) return &c;
  return nullptr;
}

DatabaseSchema::DatabaseSchema(std::string db_id, std::vector<TableDef> tables,
                               std::vector<ForeignKey> foreign_keys)
    : db_id_(std::move(db_id)), tables_(std::move(tables)) {
  if (tables_.empty()) throw Error(Errc::FormatError, "schema '" + db_id_ + "' has no tables");
  std::set<std::string> table_names;
  for (const auto& t : tables_) {
    if (t.name.empty()) throw Error(Errc::FormatError, "table with empty name");
    if (!table_names.insert(to_lower(t.name)).second)
      throw Error(Errc::FormatError, "duplicate table '" + t.name + "'");
    if (t.columns.empty()) throw Error(Errc::FormatError, "table '" + t.name + "' has no columns");
    std::set<std::string> column_names;
    for (const auto& c : t.columns) {
      if (c.name.empty()) throw Error(Errc::FormatError, "column with empty name in '" + t.name + "'");
      if (!column_names.insert(to_lower(c.name)).second)
        throw Error(Errc::FormatError, "duplicate column '" + t.name + "." + c.name + "'");
    }
  }
  for (auto& fk : foreign_keys) {
    const TableDef* from = find_table(fk.from_table);
    const TableDef* to = find_table(fk.to_table);
    if (!from || !to)
      throw Error(Errc::UnresolvedFk, "foreign key names a missing table: " + fk.from_table + " -> " + fk.to_table);
    const ColumnDef* from_col = from->find_column(fk.from_column);
    const ColumnDef* to_col = to->find_column(fk.to_column);
    if (!from_col || !to_col)
      throw Error(Errc::UnresolvedFk, "foreign key names a missing column: " + fk.from_table + "." + fk.from_column +
                                          " -> " + fk.to_table + "." + fk.to_column);
    ForeignKey resolved{from->name, from_col->name, to->name, to_col->name};
    if (iequals(resolved.from_table, resolved.to_table) && iequals(resolved.from_column, resolved.to_column))
      throw Error(Errc::FormatError, "foreign key references itself: " + resolved.from_table + "." + resolved.from_column);
    foreign_keys_.push_back(std::move(resolved));
  }

  const std::size_t n = tables_.size();
  adjacency_.assign(n, {});
  for (std::size_t i = 0; i < foreign_keys_.size(); ++i) {
    std::size_t a = *table_index(foreign_keys_[i].from_table);
    std::size_t b = *table_index(foreign_keys_[i].to_table);
    if (a == b) continue;  // self references do not connect tables
    adjacency_[a].emplace_back(i, b);
    adjacency_[b].emplace_back(i, a);
  }
  distance_.assign(n, std::vector<int>(n, -1));
  for (std::size_t s = 0; s < n; ++s) {
    std::deque<std::size_t> queue{s};
    distance_[s][s] = 0;
    while (!queue.empty()) {
      std::size_t u = queue.front();
      queue.pop_front();
      for (auto [fk, v] : adjacency_[u]) {
        if (distance_[s][v] >= 0) continue;
        distance_[s][v] = distance_[s][u] + 1;
        queue.push_back(v);
      }
    }
  }
}

std::optional<std::size_t> DatabaseSchema::table_index(std::string_view table) const {
  for (std::size_t i = 0; i < tables_.size(); ++i)
    if (iequals(tables_[i].name, table)) return i;
  return std::nullopt;
}

const TableDef* DatabaseSchema::find_table(std::string_view table) const {
  auto idx = table_index(table);
  return idx ? &tables_[*idx] : nullptr;
}

const TableDef& DatabaseSchema::table(std::string_view table) const {
  const TableDef* t = find_table(table);
  if (!t) throw Error(Errc::UnknownTable, "no table '" + std::string(table) + "' in " + db_id_);
  return *t;
}

bool DatabaseSchema::is_fk_column(std::string_view table, std::string_view column) const {
  return std::any_of(foreign_keys_.begin(), foreign_keys_.end(), [&](const ForeignKey& fk) {
    return (iequals(fk.from_table, table) && iequals(fk.from_column, column)) ||
           (iequals(fk.to_table, table) && iequals(fk.to_column, column));
  });
}

std::optional<int> DatabaseSchema::fk_distance(std::string_view table_a, std::string_view table_b) const {
  auto a = table_index(table_a);
  auto b = table_index(table_b);
  if (!a) throw Error(Errc::UnknownTable, "no table '" + std::string(table_a) + "' in " + db_id_);
  if (!b) throw Error(Errc::UnknownTable, "no table '" + std::string(table_b) + "' in " + db_id_);
  int d = distance_[*a][*b];
  if (d < 0) return std::nullopt;
  return d;
}

std::optional<std::vector<std::pair<std::size_t, std::size_t>>> DatabaseSchema::shortest_path(
    const std::vector<std::size_t>& sources, std::size_t target) const {
  const std::size_t n = tables_.size();
  std::vector<long> parent_fk(n, -1);
  std::vector<long> parent(n, -1);
  std::vector<bool> seen(n, false);
  std::deque<std::size_t> queue;
  for (std::size_t s : sources) {
    if (s == target) return std::vector<std::pair<std::size_t, std::size_t>>{};
    if (!seen[s]) {
      seen[s] = true;
      queue.push_back(s);
    }
  }
  while (!queue.empty()) {
    std::size_t u = queue.front();
    queue.pop_front();
    for (auto [fk, v] : adjacency_[u]) {
      if (seen[v]) continue;
      seen[v] = true;
      parent[v] = static_cast<long>(u);
      parent_fk[v] = static_cast<long>(fk);
      if (v == target) {
        std::vector<std::pair<std::size_t, std::size_t>> steps;
        for (std::size_t cur = v; parent[cur] >= 0; cur = static_cast<std::size_t>(parent[cur]))
          steps.emplace_back(static_cast<std::size_t>(parent_fk[cur]), cur);
        std::reverse(steps.begin(), steps.end());
        return steps;
      }
      queue.push_back(v);
    }
  }
  return std::nullopt;
}

std::vector<std::pair<std::string, ColumnDef>> DatabaseSchema::columns_of_type(DataType type) const {
  std::vector<std::pair<std::string, ColumnDef>> out;
  for (const auto& t : tables_)
    for (const auto& c : t.columns)
      if (c.data_type == type) out.emplace_back(t.name, c);
  return out;
}

// ---------------------------------------------------------------------------

ordered_json schema_to_json(const DatabaseSchema& schema) {
  ordered_json doc;
  doc["db_id"] = schema.db_id();
  ordered_json tables = ordered_json::array();
  for (const auto& t : schema.tables()) {
    ordered_json table;
    table["name"] = t.name;
    ordered_json columns = ordered_json::array();
    for (const auto& c : t.columns) {
      ordered_json col;
      col["name"] = c.name;
      col["type"] = std::string(to_string(c.data_type));
      col["pk"] = c.is_primary_key;
      col["comment"] = c.comment ? ordered_json(*c.comment) : ordered_json(nullptr);
      columns.push_back(std::move(col));
    }
    table["columns"] = std::move(columns);
    tables.push_back(std::move(table));
  }
  doc["tables"] = std::move(tables);
  ordered_json fks = ordered_json::array();
  for (const auto& fk : schema.foreign_keys()) {
    ordered_json j;
    j["from_table"] = fk.from_table;
    j["from_column"] = fk.from_column;
    j["to_table"] = fk.to_table;
    j["to_column"] = fk.to_column;
    fks.push_back(std::move(j));
  }
  doc["foreign_keys"] = std::move(fks);
  return doc;
}

DatabaseSchema schema_from_json(const ordered_json& doc) {
  try {
    if (!doc.is_object()) throw Error(Errc::FormatError, "schema document must be an object");
    std::vector<TableDef> tables;
    for (const auto& t : doc.at("tables")) {
      TableDef table;
      table.name = t.at("name").get<std::string>();
      for (const auto& c : t.at("columns")) {
        ColumnDef col;
        col.name = c.at("name").get<std::string>();
        col.data_type = parse_data_type(c.at("type").get<std::string>());
        col.is_primary_key = c.value("pk", false);
        if (c.contains("comment") && !c.at("comment").is_null()) col.comment = c.at("comment").get<std::string>();
        table.columns.push_back(std::move(col));
      }
      tables.push_back(std::move(table));
    }
    std::vector<ForeignKey> fks;
    if (doc.contains("foreign_keys")) {
      for (const auto& f : doc.at("foreign_keys")) {
        fks.push_back({f.at("from_table").get<std::string>(), f.at("from_column").get<std::string>(),
                       f.at("to_table").get<std::string>(), f.at("to_column").get<std::string>()});
      }
    }
    return DatabaseSchema(doc.at("db_id").get<std::string>(), std::move(tables), std::move(fks));
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::FormatError, std::string("malformed schema json: ") + e.what());
  }
}

namespace {

DatabaseSchema load_schema_json(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::IoError, "cannot read " + path.string());
  ordered_json doc;
  try {
    doc = ordered_json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::FormatError, path.string() + ": " + e.what());
  }
  return schema_from_json(doc);
}

std::string column_text(sqlite3_stmt* stmt, int col) {
  const unsigned char* text = sqlite3_column_text(stmt, col);
  return text ? reinterpret_cast<const char*>(text) : "";
}

DatabaseSchema load_schema_db(const std::filesystem::path& path) {
  Database db = Database::open_readonly(path);
  sqlite3* raw = db.raw();
  auto query = [&](const std::string& sql, auto&& on_row) {
    sqlite3_stmt* stmt = nullptr;
    if (sqlite3_prepare_v2(raw, sql.c_str(), -1, &stmt, nullptr) != SQLITE_OK)
      throw Error(Errc::FormatError, path.string() + ": " + sqlite3_errmsg(raw));
    int rc;
    while ((rc = sqlite3_step(stmt)) == SQLITE_ROW) on_row(stmt);
    sqlite3_finalize(stmt);
    if (rc != SQLITE_DONE) throw Error(Errc::FormatError, path.string() + ": " + sqlite3_errmsg(raw));
  };

  std::vector<std::string> names;
  query("SELECT name FROM sqlite_master WHERE type = 'table' AND name NOT LIKE 'sqlite_%' ORDER BY rowid",
        [&](sqlite3_stmt* s) { names.push_back(column_text(s, 0)); });

  std::vector<TableDef> tables;
  std::vector<ForeignKey> fks;
  for (const auto& name : names) {
    TableDef table;
    table.name = name;
    std::string quoted = "\"";
    for (char c : name) {
      if (c == '"') quoted += '"';
      quoted += c;
    }
    quoted += '"';
    query("PRAGMA table_info(" + quoted + ")", [&](sqlite3_stmt* s) {
      ColumnDef col;
      col.name = column_text(s, 1);
      col.data_type = data_type_from_declared(column_text(s, 2));
      col.is_primary_key = sqlite3_column_int(s, 5) != 0;
      table.columns.push_back(std::move(col));
    });
    std::vector<ForeignKey> table_fks;
    query("PRAGMA foreign_key_list(" + quoted + ")", [&](sqlite3_stmt* s) {
      ForeignKey fk;
      fk.from_table = name;
      fk.to_table = column_text(s, 2);
      fk.from_column = column_text(s, 3);
      fk.to_column = sqlite3_column_type(s, 4) == SQLITE_NULL ? "" : column_text(s, 4);
      table_fks.push_back(std::move(fk));
    });
    // the pragma lists constraints in reverse declaration order
    std::reverse(table_fks.begin(), table_fks.end());
    for (auto& fk : table_fks) fks.push_back(std::move(fk));
    tables.push_back(std::move(table));
  }
  // "REFERENCES t" without a column means t's primary key
  for (auto& fk : fks) {
    if (!fk.to_column.empty()) continue;
    for (const auto& t : tables) {
      if (!iequals(t.name, fk.to_table)) continue;
      for (const auto& c : t.columns)
        if (c.is_primary_key) {
          fk.to_column = c.name;
          break;
        }
    }
  }
  return DatabaseSchema(db.id(), std::move(tables), std::move(fks));
}

}  // namespace

DatabaseSchema load_schema(const std::filesystem::path& path, SchemaSource kind) {
  std::error_code ec;
  if (!std::filesystem::is_regular_file(path, ec))
    throw Error(Errc::IoError, "cannot read " + path.string());
  return kind == SchemaSource::SchemaJson ? load_schema_json(path) : load_schema_db(path);
}

DatabaseSchema load_schema(const std::filesystem::path& path) {
  return load_schema(path, path.extension() == ".json" ? SchemaSource::SchemaJson : SchemaSource::DatabaseFile);
}

}  // namespace spft
