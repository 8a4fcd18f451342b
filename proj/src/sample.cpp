#include "spft/sample.hpp"

#include "spft/error.hpp"

namespace spft {

nlohmann::ordered_json sample_to_json(const SynthSample& sample) {
  nlohmann::ordered_json row;
  row["question"] = sample.question;
  row["sql"] = sample.sql;
  row["db_id"] = sample.db_id;
  row["origin"] = sample.origin == Origin::Corpus ? "corpus" : "synthetic";
  row["template_skeleton"] = sample.template_skeleton;
  row["seed"] = sample.seed;
  return row;
}

SynthSample sample_from_json(const nlohmann::ordered_json& row) {
  if (!row.is_object()) throw Error(Errc::FormatError, "sample row is not a JSON object");
  auto text = [&](const char* key, bool required) -> std::string {
    auto it = row.find(key);
    if (it == row.end() || it->is_null()) {
      if (required) throw Error(Errc::FormatError, std::string("sample row lacks \"") + key + "\"");
      return {};
    }
    if (!it->is_string()) throw Error(Errc::FormatError, std::string("\"") + key + "\" must be a string");
    return it->get<std::string>();
  };
  SynthSample s;
  s.question = text("question", false);
  if (row.contains("sql"))
    s.sql = text("sql", true);
  else
    s.sql = text("query", true);
  s.db_id = text("db_id", true);
  std::string origin = text("origin", false);
  if (origin.empty())
    s.origin = row.contains("template_skeleton") ? Origin::Synthetic : Origin::Corpus;
  else if (origin == "synthetic")
    s.origin = Origin::Synthetic;
  else if (origin == "corpus")
    s.origin = Origin::Corpus;
  else
    throw Error(Errc::FormatError, "unknown origin '" + origin + "'");
  s.template_skeleton = text("template_skeleton", false);
  if (auto it = row.find("seed"); it != row.end() && !it->is_null()) {
    if (!it->is_number_unsigned() && !it->is_number_integer())
      throw Error(Errc::FormatError, "\"seed\" must be an integer");
    s.seed = it->get<std::uint64_t>();
  }
  return s;
}

}  // namespace spft
