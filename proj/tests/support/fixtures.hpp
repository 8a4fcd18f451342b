#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "spft/database.hpp"
#include "spft/sample.hpp"
#include "spft/schema.hpp"
#include "spft/template.hpp"

namespace spft::testing {

std::filesystem::path fixture_src(const std::string& name);
std::filesystem::path fixture_db(const std::string& name);
std::filesystem::path golden(const std::string& name);
/// Fresh empty directory under the build tree.
std::filesystem::path scratch_dir(const std::string& name);

DatabaseSchema toy_schema();
Database toy_db();
DatabaseSchema music_schema();
Database music_db();
std::vector<SynthSample> music_corpus();
TemplatePool music_pool();

std::string read_text(const std::filesystem::path& path);
void write_text(const std::filesystem::path& path, const std::string& text);

struct CliResult {
  int exit_code = -1;
  std::string out;
  std::string err;
};
/// Runs the spft binary with the given argument string (shell-quoted by the caller).
CliResult run_cli(const std::string& args);

}  // namespace spft::testing
