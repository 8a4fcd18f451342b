#include "spft/database.hpp"

#include <sqlite3.h>

#include "spft/error.hpp"

namespace spft {

void Database::Closer::operator()(sqlite3* db) const noexcept { sqlite3_close_v2(db); }

Database Database::open_readonly(const std::filesystem::path& path) {
  std::error_code ec;
  if (!std::filesystem::is_regular_file(path, ec)) throw Error(Errc::IoError, "no database file " + path.string());
  sqlite3* db = nullptr;
  int rc = sqlite3_open_v2(path.c_str(), &db, SQLITE_OPEN_READONLY | SQLITE_OPEN_NOMUTEX, nullptr);
  if (rc != SQLITE_OK) {
    std::string msg = db ? sqlite3_errmsg(db) : "out of memory";
    sqlite3_close_v2(db);
    throw Error(Errc::IoError, "cannot open " + path.string() + ": " + msg);
  }
  return Database(db, path);
}

Database Database::create(const std::filesystem::path& path) {
  std::error_code ec;
  std::filesystem::remove(path, ec);
  sqlite3* db = nullptr;
  int rc = sqlite3_open_v2(path.c_str(), &db, SQLITE_OPEN_READWRITE | SQLITE_OPEN_CREATE, nullptr);
  if (rc != SQLITE_OK) {
    std::string msg = db ? sqlite3_errmsg(db) : "out of memory";
    sqlite3_close_v2(db);
    throw Error(Errc::IoError, "cannot create " + path.string() + ": " + msg);
  }
  return Database(db, path);
}

Database Database::open_memory() {
  sqlite3* db = nullptr;
  if (sqlite3_open(":memory:", &db) != SQLITE_OK) {
    sqlite3_close_v2(db);
    throw Error(Errc::IoError, "cannot open in-memory database");
  }
  return Database(db, {});
}

void Database::exec_script(std::string_view sql) {
  std::string script(sql);
  char* err = nullptr;
  if (sqlite3_exec(db_.get(), script.c_str(), nullptr, nullptr, &err) != SQLITE_OK) {
    std::string msg = err ? err : "unknown error";
    sqlite3_free(err);
    throw Error(Errc::RuntimeError, msg);
  }
}

std::string Database::id() const { return path_.empty() ? "memory" : path_.stem().string(); }

bool is_database_file(const std::filesystem::path& path) {
  auto ext = path.extension();
  return ext == ".sqlite" || ext == ".db" || ext == ".sqlite3";
}

DbCatalog DbCatalog::from_directory(const std::filesystem::path& dir) {
  namespace fs = std::filesystem;
  std::error_code ec;
  if (!fs::is_directory(dir, ec)) throw Error(Errc::IoError, "not a directory: " + dir.string());
  DbCatalog catalog;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (entry.is_regular_file() && is_database_file(entry.path())) {
      catalog.add(entry.path().stem().string(), entry.path());
    } else if (entry.is_directory()) {
      std::string id = entry.path().filename().string();
      for (const char* ext : {".sqlite", ".db", ".sqlite3"}) {
        fs::path candidate = entry.path() / (id + ext);
        if (fs::is_regular_file(candidate, ec)) {
          catalog.add(id, candidate);
          break;
        }
      }
    }
  }
  return catalog;
}

const std::filesystem::path& DbCatalog::path(const std::string& db_id) const {
  auto it = files_.find(db_id);
  if (it == files_.end()) throw Error(Errc::InvalidArgument, "no database for db_id '" + db_id + "'");
  return it->second;
}

Database& HandleCache::get(const std::string& db_id) {
  auto it = handles_.find(db_id);
  if (it == handles_.end()) it = handles_.emplace(db_id, Database::open_readonly(catalog_->path(db_id))).first;
  return it->second;
}

}  // namespace spft
