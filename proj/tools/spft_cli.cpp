#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "spft/context.hpp"
#include "spft/database.hpp"
#include "spft/error.hpp"
#include "spft/executor.hpp"
#include "spft/pipeline.hpp"
#include "spft/policy.hpp"
#include "spft/sample.hpp"
#include "spft/schema.hpp"
#include "spft/selfplay.hpp"
#include "spft/synthesizer.hpp"
#include "spft/template.hpp"

namespace fs = std::filesystem;
using ojson = nlohmann::ordered_json;
using spft::Errc;
using spft::Error;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitInput = 2;
constexpr int kExitInvariant = 3;

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::IoError, "cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const fs::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(Errc::IoError, "cannot write " + path.string());
  out << content;
  if (!out) throw Error(Errc::IoError, "write failed for " + path.string());
}

ojson parse_json_file(const fs::path& path) {
  std::string text = read_file(path);
  try {
    return ojson::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw Error(Errc::FormatError, path.string() + ": " + e.what());
  }
}

// Blank lines are skipped; line numbers in errors are 1-based.
template <class F>
void for_each_jsonl(const fs::path& path, F&& fn) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::IoError, "cannot read " + path.string());
  std::string line;
  std::size_t number = 0;
  while (std::getline(in, line)) {
    ++number;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      fn(ojson::parse(line), number);
    } catch (const nlohmann::json::exception& e) {
      throw Error(Errc::FormatError, path.string() + " line " + std::to_string(number) + ": " + e.what());
    } catch (const Error& e) {
      if (e.code() != Errc::FormatError) throw;
      throw Error(Errc::FormatError, path.string() + " line " + std::to_string(number) + ": " + e.what());
    }
  }
}

std::vector<spft::SynthSample> read_samples(const fs::path& path) {
  std::vector<spft::SynthSample> out;
  for_each_jsonl(path, [&](const ojson& row, std::size_t) { out.push_back(spft::sample_from_json(row)); });
  return out;
}

std::string dump(const ojson& doc) { return doc.dump(2) + "\n"; }

std::string dump_jsonl(const std::vector<ojson>& rows) {
  std::string out;
  for (const auto& r : rows) out += r.dump() + "\n";
  return out;
}

void require_file(const fs::path& path, const char* what) {
  if (!fs::is_regular_file(path)) throw Error(Errc::IoError, std::string(what) + " not found: " + path.string());
}

void require_dir(const fs::path& path, const char* what) {
  if (!fs::is_directory(path)) throw Error(Errc::IoError, std::string(what) + " not found: " + path.string());
}

// A prediction row: gold as "sql"/"query"/"gold_sql", prediction as
// "pred"/"pred_sql"/"prediction".
spft::EvalItem eval_item_from_json(const ojson& row) {
  if (!row.is_object()) throw Error(Errc::FormatError, "row is not a JSON object");
  ojson copy = row;
  if (!copy.contains("sql") && !copy.contains("query") && copy.contains("gold_sql")) copy["sql"] = row["gold_sql"];
  spft::EvalItem item;
  item.sample = spft::sample_from_json(copy);
  for (const char* key : {"pred", "pred_sql", "prediction"}) {
    if (!row.contains(key)) continue;
    if (!row[key].is_string()) throw Error(Errc::FormatError, std::string("\"") + key + "\" must be a string");
    item.pred_sql = row[key].get<std::string>();
    return item;
  }
  throw Error(Errc::FormatError, "row lacks a prediction (\"pred\")");
}

std::vector<spft::EvalItem> read_eval_items(const fs::path& path, const spft::DbCatalog& catalog) {
  std::vector<spft::EvalItem> items;
  for_each_jsonl(path, [&](const ojson& row, std::size_t) {
    spft::EvalItem item = eval_item_from_json(row);
    if (!catalog.contains(item.sample.db_id))
      throw Error(Errc::FormatError, "no database for db_id '" + item.sample.db_id + "'");
    items.push_back(std::move(item));
  });
  if (items.empty()) throw Error(Errc::EmptyInput, "no predictions in " + path.string());
  return items;
}

// Each subdirectory is one variant; database files directly inside `dir`
// form one more.
std::vector<spft::DbCatalog> load_variants(const fs::path& dir) {
  require_dir(dir, "variants directory");
  std::vector<fs::path> subdirs;
  bool loose_files = false;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (entry.is_directory())
      subdirs.push_back(entry.path());
    else if (spft::is_database_file(entry.path()))
      loose_files = true;
  }
  std::sort(subdirs.begin(), subdirs.end());
  std::vector<spft::DbCatalog> variants;
  if (loose_files) variants.push_back(spft::DbCatalog::from_directory(dir));
  for (const auto& sub : subdirs) {
    spft::DbCatalog c = spft::DbCatalog::from_directory(sub);
    if (!c.empty()) variants.push_back(std::move(c));
  }
  if (variants.empty()) throw Error(Errc::IoError, "no database variants under " + dir.string());
  return variants;
}

// Applies flag overrides on top of the config document before validation.
spft::PipelineConfig load_config(const fs::path& path, std::optional<std::uint64_t> seed, std::optional<int> jobs) {
  require_file(path, "config");
  ojson doc = parse_json_file(path);
  if (!doc.is_object()) throw Error(Errc::InvalidArgument, "config must be a JSON object");
  if (seed) doc["seed"] = *seed;
  if (jobs) doc["jobs"] = *jobs;
  return spft::pipeline_config_from_json(doc);
}

struct Globals {
  int jobs = 0;
  bool jobs_set = false;
};

int cmd_extract_templates(const fs::path& corpus_path, const fs::path& schema_path, const fs::path& out) {
  require_file(corpus_path, "corpus");
  require_file(schema_path, "schema");
  spft::DatabaseSchema schema = spft::load_schema(schema_path);
  std::vector<spft::SynthSample> corpus = read_samples(corpus_path);
  spft::PoolReport report;
  spft::TemplatePool pool = spft::build_pool(corpus, {{schema.db_id(), schema}}, &report);
  write_file(out, dump(spft::pool_to_json(pool)));
  ojson stats;
  stats["items"] = report.items;
  stats["extracted"] = report.extracted;
  stats["templates"] = pool.size();
  ojson failures = ojson::array();
  for (const auto& f : report.failures) failures.push_back({{"line", f.line + 1}, {"reason", f.reason}});
  stats["failures"] = std::move(failures);
  std::cout << stats.dump() << "\n";
  std::cerr << report.extracted << " of " << report.items << " corpus items extracted into " << pool.size()
            << " templates\n";
  return kExitOk;
}

int cmd_synthesize(const fs::path& pool_path, const fs::path& db_path, std::size_t n, std::uint64_t seed,
                   std::size_t max_retries, const fs::path& out) {
  if (n == 0) throw Error(Errc::InvalidArgument, "--n must be positive");
  require_file(pool_path, "pool");
  require_file(db_path, "database");
  spft::TemplatePool pool = spft::pool_from_json(parse_json_file(pool_path));
  spft::DatabaseSchema schema = spft::load_schema(db_path, spft::SchemaSource::DatabaseFile);
  spft::Database db = spft::Database::open_readonly(db_path);
  spft::SynthesisOptions options;
  options.max_retries = max_retries;
  spft::SynthesisStats stats;
  std::vector<spft::SynthSample> samples = spft::synthesize_dataset(pool, schema, db, n, seed, options, &stats);
  std::vector<ojson> rows;
  for (const auto& s : samples) rows.push_back(spft::sample_to_json(s));
  write_file(out, dump_jsonl(rows));
  ojson doc;
  doc["samples"] = samples.size();
  doc["attempts"] = stats.attempts;
  doc["duplicates"] = stats.duplicates;
  doc["failures_by_error"] = stats.failures_by_error;
  std::cout << doc.dump() << "\n";
  return kExitOk;
}

int cmd_verify(const fs::path& pred_path, const fs::path& db_dir, const spft::ExecConfig& exec, const Globals& g) {
  require_file(pred_path, "predictions");
  require_dir(db_dir, "database directory");
  spft::DbCatalog catalog = spft::DbCatalog::from_directory(db_dir);
  std::vector<spft::EvalItem> items = read_eval_items(pred_path, catalog);
  std::vector<spft::Verdict> verdicts = spft::classify_batch(catalog, items, exec, g.jobs);
  for (std::size_t i = 0; i < verdicts.size(); ++i) {
    ojson row;
    row["index"] = i;
    row["db_id"] = items[i].sample.db_id;
    row["verdict"] = std::string(spft::to_string(verdicts[i].kind));
    if (verdicts[i].error_detail) row["error"] = *verdicts[i].error_detail;
    std::cout << row.dump() << "\n";
  }
  return kExitOk;
}

int cmd_eval(const fs::path& pred_path, const fs::path& db_dir, const std::optional<fs::path>& variants_dir,
             const spft::ExecConfig& exec, const Globals& g) {
  require_file(pred_path, "predictions");
  require_dir(db_dir, "database directory");
  spft::DbCatalog catalog = spft::DbCatalog::from_directory(db_dir);
  std::vector<spft::EvalItem> items = read_eval_items(pred_path, catalog);
  ojson doc;
  doc["ex"] = spft::ex_accuracy(catalog, items, exec, g.jobs);
  if (variants_dir) {
    std::vector<spft::DbCatalog> variants = load_variants(*variants_dir);
    doc["ts"] = spft::ts_accuracy(variants, items, exec, g.jobs);
    std::cerr << variants.size() << " database variants\n";
  }
  std::cout << doc.dump() << "\n";
  std::cerr << items.size() << " predictions scored\n";
  return kExitOk;
}

ojson checkpoint_json(const spft::PolicyRecord& record) {
  ojson doc = spft::policy_to_json(record.policy);
  doc["label"] = record.label;
  doc["round"] = record.round;
  doc["val_accuracy"] = record.val_accuracy;
  return doc;
}

int cmd_selfplay(const fs::path& checkpoints_dir, const fs::path& val_path, const fs::path& config_path,
                 const fs::path& db_dir, const fs::path& out, std::optional<std::uint64_t> seed, const Globals& g) {
  require_dir(checkpoints_dir, "checkpoint directory");
  require_file(val_path, "validation set");
  require_dir(db_dir, "database directory");
  spft::PipelineConfig config =
      load_config(config_path, seed, g.jobs_set ? std::optional<int>(g.jobs) : std::nullopt);

  spft::DbCatalog catalog = spft::DbCatalog::from_directory(db_dir);
  std::map<std::string, spft::Database> handles;
  spft::Verifier verifier(config.exec);
  spft::CandidateSpace space;
  std::vector<spft::ValQuestion> val;
  for_each_jsonl(val_path, [&](const ojson& row, std::size_t) {
    spft::ValEntry e = spft::val_entry_from_json(row);
    const std::string& db_id = e.sample.db_id;
    if (!catalog.contains(db_id)) throw Error(Errc::FormatError, "no database for db_id '" + db_id + "'");
    if (!handles.count(db_id)) {
      auto [it, inserted] = handles.emplace(db_id, spft::Database::open_readonly(catalog.path(db_id)));
      verifier.attach(db_id, it->second);
    }
    try {
      space.add_question(e.key, e.candidates, e.sample.sql);
    } catch (const Error& err) {
      throw Error(Errc::FormatError, err.what());
    }
    val.push_back({e.key, db_id, e.sample.sql});
  });
  if (val.empty()) throw Error(Errc::EmptyInput, "no validation questions in " + val_path.string());

  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(checkpoints_dir))
    if (entry.is_regular_file() && entry.path().extension() == ".json") files.push_back(entry.path());
  std::sort(files.begin(), files.end());
  if (files.empty()) throw Error(Errc::EmptyPool, "no checkpoints in " + checkpoints_dir.string());
  std::vector<spft::PolicyRecord> pool;
  for (const auto& f : files) {
    spft::SoftmaxPolicy policy = spft::policy_from_json(parse_json_file(f));
    for (const auto& q : val)
      if (!policy.contains(q.key))
        throw Error(Errc::FormatError, f.string() + " has no logits for question '" + q.key + "'");
    double acc = spft::val_accuracy(policy, val, space, verifier);
    pool.push_back({std::move(policy), acc, 0, f.stem().string()});
  }

  spft::SelfPlayResult result = spft::run_self_play(std::move(pool), val, space, config.selfplay, verifier);
  fs::create_directories(out);
  ojson trajectory;
  trajectory["config"] = spft::pipeline_config_to_json(config);
  ojson rounds = ojson::array();
  for (const auto& r : result.trajectory) rounds.push_back(spft::report_to_json(r));
  trajectory["selfplay"] = std::move(rounds);
  write_file(out / "trajectory.json", dump(trajectory));
  write_file(out / "final_policy.json", dump(checkpoint_json(result.final_main)));
  ojson summary;
  summary["final_main"] = result.final_main.label;
  summary["final_val_accuracy"] = result.final_main.val_accuracy;
  summary["iterations"] = result.trajectory.size();
  std::cout << summary.dump() << "\n";
  return kExitOk;
}

int cmd_pipeline(const fs::path& schema_path, const fs::path& db_path, const fs::path& corpus_path,
                 const fs::path& config_path, const fs::path& out, std::optional<std::uint64_t> seed,
                 const Globals& g) {
  require_file(schema_path, "schema");
  require_file(db_path, "database");
  require_file(corpus_path, "corpus");
  spft::PipelineConfig config =
      load_config(config_path, seed, g.jobs_set ? std::optional<int>(g.jobs) : std::nullopt);
  spft::DatabaseSchema schema = spft::load_schema(schema_path);
  spft::Database db = spft::Database::open_readonly(db_path);
  std::vector<spft::SynthSample> corpus = read_samples(corpus_path);

  spft::PoolReport report;
  spft::PipelineResult result = spft::run_pipeline(schema, db, corpus, config, &report);
  fs::create_directories(out);
  write_file(out / "template_pool.json", dump(spft::pool_to_json(result.state.template_pool)));
  std::vector<ojson> train;
  for (const auto& s : result.state.train_history) train.push_back(spft::sample_to_json(s));
  write_file(out / "train.jsonl", dump_jsonl(train));
  std::vector<ojson> val;
  for (const auto& v : result.state.val) val.push_back(spft::val_entry_to_json(v));
  write_file(out / "val.jsonl", dump_jsonl(val));
  write_file(out / "final_policy.json", dump(checkpoint_json(result.selfplay.final_main)));
  write_file(out / "trajectory.json", dump(spft::pipeline_trajectory(result, config)));
  std::cout << spft::pipeline_summary(result).dump() << "\n";
  for (const auto& m : result.state.metrics)
    std::cerr << "round " << m.round << ": val accuracy " << m.val_accuracy << " (" << m.failed << " failures)\n";
  return kExitOk;
}

int exit_code_for(Errc code) { return code == Errc::InvariantViolation ? kExitInvariant : kExitInput; }

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Schema-driven text-to-SQL data synthesis, verification and self-play"};
  app.require_subcommand(1);
  app.fallthrough();  // --jobs may follow the subcommand
  Globals globals;
  auto* jobs_opt = app.add_option("--jobs", globals.jobs, "worker threads (default: available parallelism)")
                       ->check(CLI::NonNegativeNumber);

  spft::ExecConfig exec;
  long long timeout_ms = exec.timeout.count();
  auto add_exec = [&](CLI::App* sub) {
    sub->add_option("--timeout-ms", timeout_ms, "per-query timeout")->check(CLI::PositiveNumber);
    sub->add_option("--float-tolerance", exec.float_tolerance, "relative float tolerance");
  };

  fs::path corpus, schema, out, pool, db, pred, db_dir, variants, checkpoints, val, config;
  std::size_t n = 0, max_retries = 10;
  std::uint64_t seed = 0;

  auto* extract = app.add_subcommand("extract-templates", "build a template pool from a SQL corpus");
  extract->add_option("--corpus", corpus, "corpus JSONL")->required();
  extract->add_option("--schema", schema, "schema JSON or database file")->required();
  extract->add_option("--out", out, "template pool JSON")->required();

  auto* synth = app.add_subcommand("synthesize", "instantiate templates into (question, SQL) pairs");
  synth->add_option("--pool", pool, "template pool JSON")->required();
  synth->add_option("--db", db, "database file")->required();
  synth->add_option("--n", n, "number of samples")->required();
  synth->add_option("--seed", seed, "random seed")->required();
  synth->add_option("--max-retries", max_retries, "attempts per requested sample")->check(CLI::PositiveNumber);
  synth->add_option("--out", out, "output JSONL")->required();

  auto* verify = app.add_subcommand("verify", "per-item execution verdicts as JSONL");
  verify->add_option("--pred", pred, "predictions JSONL")->required();
  verify->add_option("--db-dir", db_dir, "directory of databases")->required();
  add_exec(verify);

  std::optional<fs::path> variants_opt;
  auto* eval = app.add_subcommand("eval", "execution accuracy (and test-suite accuracy with --variants)");
  eval->add_option("--pred", pred, "predictions JSONL")->required();
  eval->add_option("--db-dir", db_dir, "directory of databases")->required();
  eval->add_option("--variants", variants, "directory of database variants");
  add_exec(eval);

  std::optional<std::uint64_t> seed_override;
  auto* selfplay = app.add_subcommand("selfplay", "error-driven self-play over a pool of policy checkpoints");
  selfplay->add_option("--pool-checkpoints", checkpoints, "directory of policy checkpoints")->required();
  selfplay->add_option("--val", val, "validation JSONL with candidates")->required();
  selfplay->add_option("--config", config, "run configuration JSON")->required();
  selfplay->add_option("--db-dir", db_dir, "directory of databases")->required();
  selfplay->add_option("--out", out, "output directory")->required();
  auto* selfplay_seed = selfplay->add_option("--seed", seed, "overrides the config seed");

  auto* pipeline = app.add_subcommand("pipeline", "full synthesis, verification and self-play run");
  pipeline->add_option("--schema", schema, "schema JSON or database file")->required();
  pipeline->add_option("--db", db, "database file")->required();
  pipeline->add_option("--corpus", corpus, "corpus JSONL")->required();
  pipeline->add_option("--config", config, "run configuration JSON")->required();
  pipeline->add_option("--out", out, "output directory")->required();
  auto* pipeline_seed = pipeline->add_option("--seed", seed, "overrides the config seed");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitInput;
  }
  globals.jobs_set = jobs_opt->count() > 0;
  if (selfplay_seed->count() > 0 || pipeline_seed->count() > 0) seed_override = seed;

  try {
    exec.timeout = std::chrono::milliseconds(timeout_ms);
    exec.validate();
    if (*extract) return cmd_extract_templates(corpus, schema, out);
    if (*synth) return cmd_synthesize(pool, db, n, seed, max_retries, out);
    if (*verify) return cmd_verify(pred, db_dir, exec, globals);
    if (*eval) {
      if (!variants.empty()) variants_opt = variants;
      return cmd_eval(pred, db_dir, variants_opt, exec, globals);
    }
    if (*selfplay) return cmd_selfplay(checkpoints, val, config, db_dir, out, seed_override, globals);
    if (*pipeline) return cmd_pipeline(schema, db, corpus, config, out, seed_override, globals);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return exit_code_for(e.code());
  } catch (const fs::filesystem_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitInput;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << "\n";
    return kExitInvariant;
  }
  return kExitInput;
}
