#include "fixtures.hpp"

#include <sys/wait.h>

#include <cstdlib>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace spft::testing {

namespace fs = std::filesystem;

fs::path fixture_src(const std::string& name) { return fs::path(SPFT_FIXTURE_SRC) / name; }
fs::path fixture_db(const std::string& name) { return fs::path(SPFT_FIXTURE_DB) / name; }
fs::path golden(const std::string& name) { return fs::path(SPFT_GOLDEN_DIR) / name; }

fs::path scratch_dir(const std::string& name) {
  fs::path dir = fs::path(SPFT_SCRATCH) / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

DatabaseSchema toy_schema() { return load_schema(fixture_db("toy.sqlite"), SchemaSource::DatabaseFile); }
Database toy_db() { return Database::open_readonly(fixture_db("toy.sqlite")); }
DatabaseSchema music_schema() { return load_schema(fixture_db("music.sqlite"), SchemaSource::DatabaseFile); }
Database music_db() { return Database::open_readonly(fixture_db("music.sqlite")); }

std::vector<SynthSample> music_corpus() {
  std::ifstream in(fixture_src("music_corpus.jsonl"));
  if (!in) throw std::runtime_error("missing music corpus fixture");
  std::vector<SynthSample> out;
  std::string line;
  while (std::getline(in, line))
    if (!line.empty()) out.push_back(sample_from_json(nlohmann::ordered_json::parse(line)));
  return out;
}

TemplatePool music_pool() {
  DatabaseSchema schema = music_schema();
  return build_pool(music_corpus(), {{schema.db_id(), schema}});
}

std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out << text;
  if (!out) throw std::runtime_error("cannot write " + path.string());
}

CliResult run_cli(const std::string& args) {
  fs::path dir = fs::path(SPFT_SCRATCH) / "cli_io";
  fs::create_directories(dir);
  fs::path out = dir / "stdout.txt";
  fs::path err = dir / "stderr.txt";
  std::string cmd = std::string("\"") + SPFT_CLI + "\" " + args + " >\"" + out.string() + "\" 2>\"" + err.string() + "\"";
  int status = std::system(cmd.c_str());
  CliResult r;
  r.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  r.out = read_text(out);
  r.err = read_text(err);
  return r;
}

}  // namespace spft::testing
