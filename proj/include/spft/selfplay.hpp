#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "spft/executor.hpp"
#include "spft/policy.hpp"
#include "spft/rng.hpp"

namespace spft {

/// 1 iff the generated query's execution differs from gold (errors included).
int reward(const Verdict& verdict) noexcept;

/// ln(1 + e^-t), evaluated as max(0, -t) + log1p(e^-|t|).
double logistic_loss(double t) noexcept;
double sigmoid(double t) noexcept;

enum class PairSource { OpponentCorrect, GoldFallback };
std::string_view to_string(PairSource source) noexcept;

struct PreferencePair {
  std::string question;
  std::string y_plus;
  std::string y_minus;
  int reward = 1;
  PairSource source = PairSource::OpponentCorrect;

  friend bool operator==(const PreferencePair&, const PreferencePair&) = default;
};

/// One validation question as seen by self-play.
struct ValQuestion {
  std::string key;  // candidate-space key
  std::string db_id;
  std::string gold_sql;
};

struct PolicyRecord {
  SoftmaxPolicy policy;
  double val_accuracy = 0.0;
  int round = 0;
  std::string label;
};

struct SelfPlayConfig {
  double lambda = 1.0;  // also accepted as "beta"
  int max_iterations = 5;
  std::size_t samples_per_question = 4;
  double learning_rate = 0.05;
  std::size_t steps = 50;
  std::uint64_t seed = 0;
  int jobs = 0;  // OpenMP threads for the per-pair kernels; <= 0 = default

  void validate() const;  // throws InvalidArgument
};

/// Per question: n opponent samples classified against gold. Every incorrect
/// sample y- is paired with the first correct sample of the same question
/// (opponent_correct) or with gold (gold_fallback), reward 1. A question whose
/// samples are all correct yields one degenerate reward-0 pair (y+ = y-).
std::vector<PreferencePair> build_preference_pairs(const SoftmaxPolicy& opponent, std::span<const ValQuestion> val,
                                                   const CandidateSpace& space, Verifier& verifier, std::size_t n,
                                                   Rng& rng);

struct LossResult {
  double loss = 0.0;
  std::vector<double> terms;  // per pair, pair order
};

/// question key -> d loss / d logits of the main policy
using PolicyGradient = std::map<std::string, std::vector<double>>;

/// Mean over pairs of l(lambda R [log-ratio(y+) - log-ratio(y-)]), log-ratio =
/// log p_main - log p_opponent. Throws EmptyInput, UnknownQuestion, UnknownCandidate.
LossResult error_driven_loss(const SoftmaxPolicy& main, const SoftmaxPolicy& opponent, const CandidateSpace& space,
                             std::span<const PreferencePair> pairs, double lambda, int jobs = 0);

/// Exact gradient of error_driven_loss w.r.t. the main logits:
/// (1/N) sum -lambda R sigma(-t) [grad log p(y+) - grad log p(y-)].
/// Every question of the pair set has an entry; reward-0 pairs add exactly nothing.
PolicyGradient error_driven_grad(const SoftmaxPolicy& main, const SoftmaxPolicy& opponent, const CandidateSpace& space,
                                 std::span<const PreferencePair> pairs, double lambda, int jobs = 0);

struct DpoPair {
  std::string question;
  std::string y_w;
  std::string y_l;
};

/// Mean of -log sigma(beta * delta), delta = log-ratio(y_w) - log-ratio(y_l)
/// against the reference policy.
double dpo_loss(const SoftmaxPolicy& policy, const SoftmaxPolicy& reference, const CandidateSpace& space,
                std::span<const DpoPair> pairs, double beta);

struct DpoGradient {
  PolicyGradient logits;
  /// d loss / d log p(y_w) and d loss / d log p(y_l) per pair.
  std::vector<double> d_log_w;
  std::vector<double> d_log_l;
};
DpoGradient dpo_grad(const SoftmaxPolicy& policy, const SoftmaxPolicy& reference, const CandidateSpace& space,
                     std::span<const DpoPair> pairs, double beta);

struct GoldPair {
  std::string question;
  std::string y_gold;
  std::string y_opp;
};

/// Error-driven loss with R forced to 1, y+ = gold and y- = the opponent
/// sample, whatever its verdict. Throws EmptyInput for no pairs.
LossResult spin_style_loss(const SoftmaxPolicy& main, const SoftmaxPolicy& opponent, const CandidateSpace& space,
                           std::span<const GoldPair> pairs, double lambda = 1.0, int jobs = 0);
PolicyGradient spin_style_grad(const SoftmaxPolicy& main, const SoftmaxPolicy& opponent, const CandidateSpace& space,
                               std::span<const GoldPair> pairs, double lambda = 1.0, int jobs = 0);

namespace serial {

// Single-threaded references for the OpenMP kernels above.
LossResult error_driven_loss(const SoftmaxPolicy& main, const SoftmaxPolicy& opponent, const CandidateSpace& space,
                             std::span<const PreferencePair> pairs, double lambda);
PolicyGradient error_driven_grad(const SoftmaxPolicy& main, const SoftmaxPolicy& opponent, const CandidateSpace& space,
                                 std::span<const PreferencePair> pairs, double lambda);

}  // namespace serial

/// Fraction of questions whose argmax candidate classifies correct.
double val_accuracy(const SoftmaxPolicy& policy, std::span<const ValQuestion> val, const CandidateSpace& space,
                    Verifier& verifier);

/// Highest / lowest val_accuracy; ties go to the earliest round, then the
/// smallest label. Throws EmptyPool.
const PolicyRecord& select_main(std::span<const PolicyRecord> pool);
/// Skips the record labelled `excluded` unless that leaves nothing, in which
/// case the exclusion is waived and *waived is set.
const PolicyRecord& select_opponent(std::span<const PolicyRecord> pool, const std::optional<std::string>& excluded,
                                    bool* waived = nullptr);

struct RoundReport {
  int round = 0;
  std::string main;
  std::string opponent;
  double loss = 0.0;  // error-driven loss of the optimized clone after the last step
  std::size_t pairs_total = 0;
  std::size_t pairs_reward1 = 0;
  std::size_t pairs_gold_fallback = 0;
  double val_accuracy_before = 0.0;
  double val_accuracy_after = 0.0;
  bool exclusion_waived = false;  // not serialized

  friend bool operator==(const RoundReport&, const RoundReport&) = default;
};

nlohmann::ordered_json report_to_json(const RoundReport& report);

/// One self-play iteration: select main and opponent, build pairs from the
/// opponent, take config.steps gradient steps on a clone of main, evaluate the
/// clone and append it to the pool.
RoundReport self_play_round(std::vector<PolicyRecord>& pool, std::span<const ValQuestion> val,
                            const CandidateSpace& space, const SelfPlayConfig& config, Verifier& verifier,
                            int round, const std::optional<std::string>& excluded_opponent);

struct SelfPlayResult {
  PolicyRecord final_main;
  std::vector<RoundReport> trajectory;
  std::vector<PolicyRecord> pool;
};

SelfPlayResult run_self_play(std::vector<PolicyRecord> pool, std::span<const ValQuestion> val,
                             const CandidateSpace& space, const SelfPlayConfig& config, Verifier& verifier);

}  // namespace spft
