#pragma once

#include <filesystem>
#include <map>
#include <memory>
#include <string>
#include <string_view>
#include <vector>

struct sqlite3;

namespace spft {

/// Owning handle to a SQLite connection. Move-only; one handle per worker.
class Database {
 public:
  static Database open_readonly(const std::filesystem::path& path);
  /// Creates (or truncates) a writable database file; used to build fixtures.
  static Database create(const std::filesystem::path& path);
  static Database open_memory();

  Database(Database&&) noexcept = default;
  Database& operator=(Database&&) noexcept = default;
  ~Database() = default;

  /// Runs a multi-statement script (DDL/DML). Not subject to read-only checks.
  void exec_script(std::string_view sql);

  sqlite3* raw() const noexcept { return db_.get(); }
  const std::filesystem::path& path() const noexcept { return path_; }
  /// Stem of the file name; "memory" for in-memory handles.
  std::string id() const;

 private:
  struct Closer {
    void operator()(sqlite3* db) const noexcept;
  };
  Database(sqlite3* db, std::filesystem::path path) : db_(db), path_(std::move(path)) {}

  std::unique_ptr<sqlite3, Closer> db_;
  std::filesystem::path path_;
};

/// Maps db_id to a database file. Workers open their own handles from it.
class DbCatalog {
 public:
  DbCatalog() = default;
  explicit DbCatalog(std::map<std::string, std::filesystem::path> files) : files_(std::move(files)) {}

  /// Accepts both <dir>/<db_id>.sqlite and the benchmark layout <dir>/<db_id>/<db_id>.sqlite
  /// (.db and .sqlite3 extensions too).
  static DbCatalog from_directory(const std::filesystem::path& dir);

  void add(std::string db_id, std::filesystem::path file) { files_[std::move(db_id)] = std::move(file); }
  bool contains(const std::string& db_id) const { return files_.count(db_id) != 0; }
  const std::filesystem::path& path(const std::string& db_id) const;  // throws InvalidArgument
  const std::map<std::string, std::filesystem::path>& files() const noexcept { return files_; }
  bool empty() const noexcept { return files_.empty(); }

 private:
  std::map<std::string, std::filesystem::path> files_;
};

/// Lazily opened read-only handles for one worker.
class HandleCache {
 public:
  explicit HandleCache(const DbCatalog& catalog) : catalog_(&catalog) {}
  Database& get(const std::string& db_id);

 private:
  const DbCatalog* catalog_;
  std::map<std::string, Database> handles_;
};

bool is_database_file(const std::filesystem::path& path);

}  // namespace spft
