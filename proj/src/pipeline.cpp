#include "spft/pipeline.hpp"

#include <set>

#include "spft/error.hpp"
#include "spft/synthesizer.hpp"

namespace spft {

void PipelineConfig::validate() const {
  if (n_train < 1 || n_val < 1) throw Error(Errc::InvalidArgument, "n_train and n_val must be positive");
  if (rounds < 1) throw Error(Errc::InvalidArgument, "rounds must be positive");
  if (!(lr_train > 0.0)) throw Error(Errc::InvalidArgument, "lr_train must be positive");
  if (candidates_k < 2) throw Error(Errc::InvalidArgument, "candidates_k must be at least 2");
  if (!(init_scale >= 0.0)) throw Error(Errc::InvalidArgument, "init_scale must be nonnegative");
  if (!(plateau_epsilon >= 0.0)) throw Error(Errc::InvalidArgument, "plateau_epsilon must be nonnegative");
  if (max_retries < 1) throw Error(Errc::InvalidArgument, "max_retries must be positive");
  exec.validate();
  selfplay.validate();
}

namespace {

using ojson = nlohmann::ordered_json;

template <class T>
T read_number(const ojson& doc, const std::string& key) {
  const ojson& v = doc.at(key);
  if constexpr (std::is_floating_point_v<T>) {
    if (!v.is_number()) throw Error(Errc::InvalidArgument, "config key '" + key + "' must be a number");
  } else if constexpr (std::is_signed_v<T>) {
    if (!v.is_number_integer()) throw Error(Errc::InvalidArgument, "config key '" + key + "' must be an integer");
  } else {
    // values built in code arrive as signed integers, parsed text as unsigned
    if (!v.is_number_unsigned() && !(v.is_number_integer() && v.get<std::int64_t>() >= 0))
      throw Error(Errc::InvalidArgument, "config key '" + key + "' must be a nonnegative integer");
  }
  return v.get<T>();
}

}  // namespace

PipelineConfig pipeline_config_from_json(const ojson& doc) {
  if (!doc.is_object()) throw Error(Errc::InvalidArgument, "config must be a JSON object");
  PipelineConfig c;
  for (const auto& [key, value] : doc.items()) {
    if (key == "seed") c.seed = read_number<std::uint64_t>(doc, key);
    else if (key == "n_train") c.n_train = read_number<std::size_t>(doc, key);
    else if (key == "n_val") c.n_val = read_number<std::size_t>(doc, key);
    else if (key == "rounds") c.rounds = read_number<int>(doc, key);
    else if (key == "lr_train") c.lr_train = read_number<double>(doc, key);
    else if (key == "train_steps") c.train_steps = read_number<std::size_t>(doc, key);
    else if (key == "candidates_k") c.candidates_k = read_number<std::size_t>(doc, key);
    else if (key == "init_scale") c.init_scale = read_number<double>(doc, key);
    else if (key == "plateau_epsilon") c.plateau_epsilon = read_number<double>(doc, key);
    else if (key == "max_retries") c.max_retries = read_number<std::size_t>(doc, key);
    else if (key == "jobs") c.jobs = read_number<int>(doc, key);
    else if (key == "selfplay_T") c.selfplay.max_iterations = read_number<int>(doc, key);
    else if (key == "lambda" || key == "beta") c.selfplay.lambda = read_number<double>(doc, key);
    else if (key == "lr_selfplay") c.selfplay.learning_rate = read_number<double>(doc, key);
    else if (key == "selfplay_steps") c.selfplay.steps = read_number<std::size_t>(doc, key);
    else if (key == "samples_per_question") c.selfplay.samples_per_question = read_number<std::size_t>(doc, key);
    else if (key == "exec") {
      if (!value.is_object()) throw Error(Errc::InvalidArgument, "config key 'exec' must be an object");
      for (const auto& [ekey, evalue] : value.items()) {
        if (ekey == "timeout_ms") c.exec.timeout = std::chrono::milliseconds(read_number<std::int64_t>(value, ekey));
        else if (ekey == "float_tolerance") c.exec.float_tolerance = read_number<double>(value, ekey);
        else if (ekey == "max_rows") c.exec.max_rows = read_number<std::size_t>(value, ekey);
        else throw Error(Errc::InvalidArgument, "unknown config key 'exec." + ekey + "'");
      }
    } else {
      throw Error(Errc::InvalidArgument, "unknown config key '" + key + "'");
    }
  }
  if (doc.contains("lambda") && doc.contains("beta") && doc["lambda"] != doc["beta"])
    throw Error(Errc::InvalidArgument, "'lambda' and its alias 'beta' disagree");
  c.selfplay.seed = Rng::mix(c.seed, 0x73706c6179ULL);
  c.selfplay.jobs = c.jobs;
  c.validate();
  return c;
}

ojson pipeline_config_to_json(const PipelineConfig& c) {
  ojson doc;
  doc["seed"] = c.seed;
  doc["n_train"] = c.n_train;
  doc["n_val"] = c.n_val;
  doc["rounds"] = c.rounds;
  doc["lr_train"] = c.lr_train;
  doc["train_steps"] = c.train_steps;
  doc["candidates_k"] = c.candidates_k;
  doc["init_scale"] = c.init_scale;
  doc["plateau_epsilon"] = c.plateau_epsilon;
  doc["max_retries"] = c.max_retries;
  doc["selfplay_T"] = c.selfplay.max_iterations;
  doc["lambda"] = c.selfplay.lambda;
  doc["lr_selfplay"] = c.selfplay.learning_rate;
  doc["selfplay_steps"] = c.selfplay.steps;
  doc["samples_per_question"] = c.selfplay.samples_per_question;
  doc["exec"] = {{"timeout_ms", c.exec.timeout.count()},
                 {"float_tolerance", c.exec.float_tolerance},
                 {"max_rows", c.exec.max_rows}};
  return doc;
}

bool PlateauDetector::observe(double accuracy) {
  if (previous_) {
    if (accuracy - *previous_ < epsilon_)
      ++flat_rounds_;
    else
      flat_rounds_ = 0;
  }
  previous_ = accuracy;
  return flat_rounds_ >= patience_;
}

ojson metrics_to_json(const RoundMetrics& m) {
  ojson doc;
  doc["round"] = m.round;
  doc["train_samples"] = m.train_samples;
  doc["val_accuracy"] = m.val_accuracy;
  doc["correct"] = m.correct;
  doc["failed"] = m.failed;
  doc["failed_templates"] = m.failed_templates;
  doc["pool_total_before"] = m.pool_total_before;
  doc["pool_total_after"] = m.pool_total_after;
  return doc;
}

ojson val_entry_to_json(const ValEntry& entry) {
  ojson doc = sample_to_json(entry.sample);
  doc["key"] = entry.key;
  doc["candidates"] = entry.candidates;
  return doc;
}

ValEntry val_entry_from_json(const ojson& row) {
  ValEntry e;
  if (row.is_object() && !row.contains("sql") && row.contains("gold_sql")) {
    ojson copy = row;
    copy["sql"] = row["gold_sql"];
    e.sample = sample_from_json(copy);
  } else {
    e.sample = sample_from_json(row);
  }
  if (!row.contains("candidates") || !row["candidates"].is_array())
    throw Error(Errc::FormatError, "validation row lacks a \"candidates\" array");
  for (const auto& c : row["candidates"]) {
    if (!c.is_string()) throw Error(Errc::FormatError, "candidates must be strings");
    e.candidates.push_back(c.get<std::string>());
  }
  if (row.contains("key")) {
    if (!row["key"].is_string()) throw Error(Errc::FormatError, "\"key\" must be a string");
    e.key = row["key"].get<std::string>();
  } else {
    e.key = question_key(e.sample.question);
  }
  return e;
}

std::optional<std::vector<std::string>> build_candidates(const SynthSample& sample, const TemplatePool& pool,
                                                         const DatabaseSchema& schema, Database& db, std::size_t k,
                                                         std::size_t max_retries, std::uint64_t seed) {
  if (!sample.template_id || *sample.template_id >= pool.size()) return std::nullopt;
  const SqlTemplate& tmpl = pool.at(*sample.template_id);
  Rng rng(seed);
  std::vector<std::string> candidates{sample.sql};
  std::set<std::string> seen{sample.sql};
  const std::size_t budget = (k - 1) * max_retries;
  for (std::size_t attempt = 0; attempt < budget && candidates.size() < k; ++attempt) {
    try {
      SynthSample alt = instantiate(tmpl, schema, db, rng, 1);
      if (seen.insert(alt.sql).second) candidates.push_back(std::move(alt.sql));
    } catch (const Error&) {
      // a failed alternative just costs one attempt
    }
  }
  if (candidates.size() < 2) return std::nullopt;
  for (std::size_t i = candidates.size() - 1; i > 0; --i) std::swap(candidates[i], candidates[rng.uniform_index(i + 1)]);
  return candidates;
}

namespace {

struct Prepared {
  std::string key;
  std::vector<std::string> candidates;
};

// Synthesizes n samples that each come with a usable candidate list and a
// fresh question key.
std::vector<std::pair<SynthSample, Prepared>> synthesize_with_candidates(
    const TemplatePool& pool, const DatabaseSchema& schema, Database& db, const PipelineConfig& config,
    std::size_t n, std::uint64_t seed, std::set<std::string>& taken_keys,
    const std::set<std::string>& excluded_sql) {
  std::map<std::string, Prepared> prepared;
  SynthesisOptions options;
  options.max_retries = config.max_retries;
  options.reject = [&](const SynthSample& s) {
    if (excluded_sql.count(s.sql)) return true;
    auto candidates = build_candidates(s, pool, schema, db, config.candidates_k, config.max_retries,
                                       Rng::mix(s.seed, 0x63616e64ULL));
    if (!candidates) return true;
    std::string key = question_key(serialize_context(s.question, build_context(s.question, schema, db, config.context)));
    if (taken_keys.count(key)) return true;
    taken_keys.insert(key);
    prepared[s.sql] = {std::move(key), std::move(*candidates)};
    return false;
  };
  std::vector<SynthSample> samples = synthesize_dataset(pool, schema, db, n, seed, options);
  std::vector<std::pair<SynthSample, Prepared>> out;
  for (auto& s : samples) {
    Prepared p = std::move(prepared.at(s.sql));
    out.emplace_back(std::move(s), std::move(p));
  }
  return out;
}

}  // namespace

void vbift_round(RoundState& state, const DatabaseSchema& schema, Database& db, const PipelineConfig& config,
                 Verifier& verifier) {
  if (state.template_pool.empty()) throw Error(Errc::EmptyPool, "template pool is empty");
  const int r = state.round + 1;
  std::set<std::string> taken_keys(state.val_space.keys().begin(), state.val_space.keys().end());
  std::set<std::string> val_sql;
  for (const auto& v : state.val) val_sql.insert(v.sample.sql);

  if (state.val.empty()) {
    auto val = synthesize_with_candidates(state.template_pool, schema, db, config, config.n_val,
                                          Rng::mix(config.seed, 0x76616cULL), taken_keys, val_sql);
    for (auto& [sample, prepared] : val) {
      state.val_space.add_question(prepared.key, prepared.candidates, sample.sql);
      state.val_questions.push_back({prepared.key, sample.db_id, sample.sql});
      val_sql.insert(sample.sql);
      state.val.push_back({std::move(sample), std::move(prepared.key), std::move(prepared.candidates)});
    }
  }

  auto train = synthesize_with_candidates(state.template_pool, schema, db, config, config.n_train,
                                          Rng::mix(config.seed, 0x747261696eULL + static_cast<std::uint64_t>(r)),
                                          taken_keys, val_sql);
  CandidateSpace train_space;
  for (const auto& [sample, prepared] : train) train_space.add_question(prepared.key, prepared.candidates, sample.sql);

  // fresh policy: seeded random logits everywhere, then descent on -log p(gold)
  // over the training questions
  Rng init = Rng::stream(config.seed, 0x706f6c0000ULL + static_cast<std::uint64_t>(r));
  SoftmaxPolicy policy(config.lr_train);
  for (const CandidateSpace* space : {&train_space, &state.val_space})
    for (const auto& key : space->keys()) {
      std::vector<double> logits(space->candidates(key).size());
      for (double& x : logits) x = config.init_scale * init.normal();
      policy.set_logits(key, std::move(logits));
    }
  for (std::size_t step = 0; step < config.train_steps; ++step) {
    PolicyGradient grads;
    for (const auto& key : train_space.keys()) {
      std::vector<double> g = policy.grad_log_prob(key, train_space.gold_index(key));
      for (double& x : g) x = -x;
      grads.emplace(key, std::move(g));
    }
    policy.apply_gradients(grads);
  }

  RoundMetrics m;
  m.round = r;
  m.train_samples = train.size();
  for (const auto& v : state.val) {
    const std::string& pred = state.val_space.candidates(v.key)[policy.argmax(v.key)];
    if (verifier.classify(v.sample.db_id, v.sample.sql, pred).correct()) {
      state.renderer_corpus.push_back({v.sample, pred});
      ++m.correct;
    } else {
      m.failed_templates.push_back(*v.sample.template_id);
      ++m.failed;
    }
  }
  m.val_accuracy = static_cast<double>(m.correct) / static_cast<double>(state.val.size());
  m.pool_total_before = state.template_pool.total_count();
  for (std::size_t id : m.failed_templates) state.template_pool.add_count(id, 1);
  m.pool_total_after = state.template_pool.total_count();

  // the pool keeps only the validation logits: those are what accuracy and
  // self-play read
  SoftmaxPolicy record(config.selfplay.learning_rate);
  for (const auto& key : state.val_space.keys()) record.set_logits(key, policy.logits(key));
  state.model_pool.push_back({std::move(record), m.val_accuracy, r, "vbift-" + std::to_string(r)});

  for (auto& [sample, prepared] : train) state.train_history.push_back(std::move(sample));
  state.metrics.push_back(std::move(m));
  state.round = r;
}

PipelineResult run_pipeline(const DatabaseSchema& schema, Database& db, std::span<const SynthSample> corpus,
                            const PipelineConfig& config, PoolReport* pool_report) {
  config.validate();
  PipelineResult result;
  result.state.template_pool = build_pool(corpus, {{schema.db_id(), schema}}, pool_report);
  Verifier verifier(config.exec);
  verifier.attach(schema.db_id(), db);
  PlateauDetector plateau(config.plateau_epsilon);
  for (int r = 0; r < config.rounds; ++r) {
    vbift_round(result.state, schema, db, config, verifier);
    if (plateau.observe(result.state.metrics.back().val_accuracy) && r + 1 < config.rounds) {
      result.stopped_early = true;
      break;
    }
  }
  result.selfplay =
      run_self_play(result.state.model_pool, result.state.val_questions, result.state.val_space, config.selfplay, verifier);
  return result;
}

ojson pipeline_summary(const PipelineResult& result) {
  ojson doc;
  doc["rounds_run"] = result.state.round;
  doc["stopped_early"] = result.stopped_early;
  ojson acc = ojson::array();
  for (const auto& m : result.state.metrics) acc.push_back(m.val_accuracy);
  doc["val_accuracy"] = std::move(acc);
  doc["renderer_corpus"] = result.state.renderer_corpus.size();
  doc["template_pool_total"] = result.state.template_pool.total_count();
  doc["final_main"] = result.selfplay.final_main.label;
  doc["final_val_accuracy"] = result.selfplay.final_main.val_accuracy;
  return doc;
}

ojson pipeline_trajectory(const PipelineResult& result, const PipelineConfig& config) {
  ojson doc;
  doc["config"] = pipeline_config_to_json(config);
  ojson rounds = ojson::array();
  for (const auto& m : result.state.metrics) rounds.push_back(metrics_to_json(m));
  doc["rounds"] = std::move(rounds);
  ojson selfplay = ojson::array();
  for (const auto& r : result.selfplay.trajectory) selfplay.push_back(report_to_json(r));
  doc["selfplay"] = std::move(selfplay);
  doc["summary"] = pipeline_summary(result);
  return doc;
}

}  // namespace spft
