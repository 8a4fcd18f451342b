#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "spft/context.hpp"
#include "spft/database.hpp"
#include "spft/executor.hpp"
#include "spft/policy.hpp"
#include "spft/sample.hpp"
#include "spft/schema.hpp"
#include "spft/selfplay.hpp"
#include "spft/template.hpp"

namespace spft {

struct PipelineConfig {
  std::uint64_t seed = 0;
  std::size_t n_train = 300;
  std::size_t n_val = 100;
  int rounds = 3;
  double lr_train = 0.5;
  std::size_t train_steps = 20;
  std::size_t candidates_k = 8;
  double init_scale = 1.0;
  double plateau_epsilon = 0.001;
  std::size_t max_retries = 10;
  ExecConfig exec;
  ContextOptions context;
  SelfPlayConfig selfplay;  // seed and jobs follow the top-level values
  int jobs = 0;

  void validate() const;  // throws InvalidArgument
};

/// Recognized keys: seed, n_train, n_val, rounds, lr_train, train_steps,
/// candidates_k, init_scale, plateau_epsilon, max_retries, jobs, selfplay_T,
/// lambda (alias beta), lr_selfplay, selfplay_steps, samples_per_question,
/// exec {timeout_ms, float_tolerance, max_rows}. Any other key throws
/// InvalidArgument.
PipelineConfig pipeline_config_from_json(const nlohmann::ordered_json& doc);
/// Effective configuration with every key spelled out.
nlohmann::ordered_json pipeline_config_to_json(const PipelineConfig& config);

/// Stops once the improvement over the previous round stays below epsilon
/// for `patience` consecutive rounds.
class PlateauDetector {
 public:
  explicit PlateauDetector(double epsilon, int patience = 2) : epsilon_(epsilon), patience_(patience) {}
  /// Records one round's accuracy; true means stop now.
  bool observe(double accuracy);

 private:
  double epsilon_;
  int patience_;
  int flat_rounds_ = 0;
  std::optional<double> previous_;
};

struct RoundMetrics {
  int round = 0;
  std::size_t train_samples = 0;
  double val_accuracy = 0.0;
  std::size_t correct = 0;
  std::size_t failed = 0;
  std::vector<std::size_t> failed_templates;  // one entry per failed sample
  std::size_t pool_total_before = 0;
  std::size_t pool_total_after = 0;
};

nlohmann::ordered_json metrics_to_json(const RoundMetrics& metrics);

/// A validation question with its candidate list, as written to val.jsonl.
struct ValEntry {
  SynthSample sample;
  std::string key;
  std::vector<std::string> candidates;
};

nlohmann::ordered_json val_entry_to_json(const ValEntry& entry);
/// Reads {"question","sql"|"gold_sql","db_id","candidates",["key"]}; a missing
/// key is derived from the question text.
ValEntry val_entry_from_json(const nlohmann::ordered_json& row);

struct RoundState {
  int round = 0;  // rounds completed
  TemplatePool template_pool;
  std::vector<EvalItem> renderer_corpus;  // (gold sample, correct prediction)
  std::vector<PolicyRecord> model_pool;
  std::vector<RoundMetrics> metrics;
  // validation data, synthesized in the first round and then frozen
  std::vector<ValEntry> val;
  std::vector<ValQuestion> val_questions;
  CandidateSpace val_space;
  std::vector<SynthSample> train_history;
};

/// Builds a candidate list for a synthesized sample: gold plus up to k-1
/// distinct alternative instantiations of the same template, shuffled.
/// Returns nullopt when fewer than two distinct candidates exist.
std::optional<std::vector<std::string>> build_candidates(const SynthSample& sample, const TemplatePool& pool,
                                                         const DatabaseSchema& schema, Database& db, std::size_t k,
                                                         std::size_t max_retries, std::uint64_t seed);

/// One verification-based round: synthesize (validation only in the first
/// round), train a fresh policy on -log p(gold) over the training split,
/// classify its argmax predictions on the validation set, route correct pairs
/// to the renderer corpus and add +1 to the template count of every failure,
/// then append the policy to the model pool.
void vbift_round(RoundState& state, const DatabaseSchema& schema, Database& db, const PipelineConfig& config,
                 Verifier& verifier);

struct PipelineResult {
  RoundState state;
  bool stopped_early = false;
  SelfPlayResult selfplay;
};

/// Template pool from the corpus, up to config.rounds rounds (plateau stop),
/// then self-play over the model pool.
PipelineResult run_pipeline(const DatabaseSchema& schema, Database& db, std::span<const SynthSample> corpus,
                            const PipelineConfig& config, PoolReport* pool_report = nullptr);

nlohmann::ordered_json pipeline_summary(const PipelineResult& result);
/// {"config", "rounds": [...], "selfplay": [...], "summary"}
nlohmann::ordered_json pipeline_trajectory(const PipelineResult& result, const PipelineConfig& config);

}  // namespace spft
