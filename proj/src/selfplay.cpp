#include "spft/selfplay.hpp"

#include <omp.h>

#include <algorithm>
#include <cmath>
#include <exception>

#include "spft/error.hpp"

namespace spft {

int reward(const Verdict& verdict) noexcept { return verdict.kind == VerdictKind::Correct ? 0 : 1; }

double logistic_loss(double t) noexcept { return std::max(0.0, -t) + std::log1p(std::exp(-std::fabs(t))); }

double sigmoid(double t) noexcept {
  if (t >= 0) return 1.0 / (1.0 + std::exp(-t));
  double e = std::exp(t);
  return e / (1.0 + e);
}

std::string_view to_string(PairSource source) noexcept {
  return source == PairSource::OpponentCorrect ? "opponent_correct" : "gold_fallback";
}

void SelfPlayConfig::validate() const {
  if (!(lambda > 0.0) || !std::isfinite(lambda)) throw Error(Errc::InvalidArgument, "lambda must be positive");
  if (max_iterations < 1) throw Error(Errc::InvalidArgument, "self-play needs at least one iteration");
  if (samples_per_question < 1) throw Error(Errc::InvalidArgument, "samples_per_question must be positive");
  if (!(learning_rate > 0.0) || !std::isfinite(learning_rate))
    throw Error(Errc::InvalidArgument, "learning rate must be positive");
}

std::vector<PreferencePair> build_preference_pairs(const SoftmaxPolicy& opponent, std::span<const ValQuestion> val,
                                                   const CandidateSpace& space, Verifier& verifier, std::size_t n,
                                                   Rng& rng) {
  if (n == 0) throw Error(Errc::InvalidArgument, "samples per question must be positive");
  std::vector<PreferencePair> pairs;
  for (const ValQuestion& q : val) {
    const auto& candidates = space.candidates(q.key);
    std::vector<std::size_t> draws = opponent.sample(q.key, rng, n);
    std::optional<std::size_t> first_correct;
    std::vector<std::size_t> incorrect;
    for (std::size_t idx : draws) {
      if (reward(verifier.classify(q.db_id, q.gold_sql, candidates[idx])) == 0) {
        if (!first_correct) first_correct = idx;
      } else {
        incorrect.push_back(idx);
      }
    }
    if (incorrect.empty()) {
      pairs.push_back({q.key, candidates[*first_correct], candidates[*first_correct], 0, PairSource::OpponentCorrect});
      continue;
    }
    for (std::size_t idx : incorrect) {
      if (first_correct)
        pairs.push_back({q.key, candidates[*first_correct], candidates[idx], 1, PairSource::OpponentCorrect});
      else
        pairs.push_back({q.key, q.gold_sql, candidates[idx], 1, PairSource::GoldFallback});
    }
  }
  return pairs;
}

namespace {

struct IndexedPair {
  const std::string* question;
  std::size_t plus;
  std::size_t minus;
  double reward;
};

std::vector<IndexedPair> index_pairs(const CandidateSpace& space, std::span<const PreferencePair> pairs) {
  if (pairs.empty()) throw Error(Errc::EmptyInput, "no preference pairs");
  std::vector<IndexedPair> out;
  out.reserve(pairs.size());
  for (const auto& p : pairs) {
    if (p.reward != 0 && p.reward != 1) throw Error(Errc::InvariantViolation, "reward must be 0 or 1");
    out.push_back({&p.question, space.index_of(p.question, p.y_plus), space.index_of(p.question, p.y_minus),
                   static_cast<double>(p.reward)});
  }
  return out;
}

// Argument t of the logistic loss for one pair.
double pair_argument(const SoftmaxPolicy& main, const SoftmaxPolicy& opponent, const IndexedPair& p, double lambda) {
  std::vector<double> lm = main.log_probs(*p.question);
  std::vector<double> lo = opponent.log_probs(*p.question);
  if (p.plus >= lo.size() || p.minus >= lo.size())
    throw Error(Errc::UnknownCandidate, "candidate outside the opponent's support for '" + *p.question + "'");
  return lambda * p.reward * ((lm[p.plus] - lo[p.plus]) - (lm[p.minus] - lo[p.minus]));
}

int thread_count(int jobs) { return jobs > 0 ? jobs : omp_get_max_threads(); }

// Parallel map over pairs; exceptions are captured per pair and the first one
// (in pair order) is rethrown.
template <class F>
void parallel_over_pairs(std::size_t n, int jobs, F&& fn) {
  std::vector<std::exception_ptr> errors(n);
  const long count = static_cast<long>(n);
#pragma omp parallel for schedule(static) num_threads(thread_count(jobs))
  for (long i = 0; i < count; ++i) {
    try {
      fn(static_cast<std::size_t>(i));
    } catch (...) {
      errors[static_cast<std::size_t>(i)] = std::current_exception();
    }
  }
  for (const auto& e : errors)
    if (e) std::rethrow_exception(e);
}

double mean(const std::vector<double>& terms) {
  double sum = 0.0;
  for (double t : terms) sum += t;  // pair order, so the value is thread-count independent
  return sum / static_cast<double>(terms.size());
}

// d loss / d logits for one pair is coef * (e_plus - e_minus): the softmax
// parts of grad log p(y+) and grad log p(y-) cancel exactly.
PolicyGradient reduce_gradient(const SoftmaxPolicy& main, const std::vector<IndexedPair>& pairs,
                               const std::vector<double>& coef) {
  PolicyGradient grad;
  for (const auto& p : pairs) grad.try_emplace(*p.question, main.logits(*p.question).size(), 0.0);
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    if (pairs[i].reward == 0.0) continue;
    auto& g = grad[*pairs[i].question];
    g[pairs[i].plus] += coef[i];
    g[pairs[i].minus] -= coef[i];
  }
  return grad;
}

double pair_coefficient(double t, double lambda, double reward, std::size_t n) {
  return -lambda * reward * sigmoid(-t) / static_cast<double>(n);
}

}  // namespace

LossResult error_driven_loss(const SoftmaxPolicy& main, const SoftmaxPolicy& opponent, const CandidateSpace& space,
                             std::span<const PreferencePair> pairs, double lambda, int jobs) {
  std::vector<IndexedPair> indexed = index_pairs(space, pairs);
  LossResult out;
  out.terms.resize(indexed.size());
  parallel_over_pairs(indexed.size(), jobs, [&](std::size_t i) {
    out.terms[i] = logistic_loss(pair_argument(main, opponent, indexed[i], lambda));
  });
  out.loss = mean(out.terms);
  return out;
}

PolicyGradient error_driven_grad(const SoftmaxPolicy& main, const SoftmaxPolicy& opponent, const CandidateSpace& space,
                                 std::span<const PreferencePair> pairs, double lambda, int jobs) {
  std::vector<IndexedPair> indexed = index_pairs(space, pairs);
  std::vector<double> coef(indexed.size(), 0.0);
  parallel_over_pairs(indexed.size(), jobs, [&](std::size_t i) {
    if (indexed[i].reward == 0.0) return;
    double t = pair_argument(main, opponent, indexed[i], lambda);
    coef[i] = pair_coefficient(t, lambda, indexed[i].reward, indexed.size());
  });
  return reduce_gradient(main, indexed, coef);
}

namespace serial {

LossResult error_driven_loss(const SoftmaxPolicy& main, const SoftmaxPolicy& opponent, const CandidateSpace& space,
                             std::span<const PreferencePair> pairs, double lambda) {
  std::vector<IndexedPair> indexed = index_pairs(space, pairs);
  LossResult out;
  for (const auto& p : indexed) out.terms.push_back(logistic_loss(pair_argument(main, opponent, p, lambda)));
  out.loss = mean(out.terms);
  return out;
}

PolicyGradient error_driven_grad(const SoftmaxPolicy& main, const SoftmaxPolicy& opponent, const CandidateSpace& space,
                                 std::span<const PreferencePair> pairs, double lambda) {
  std::vector<IndexedPair> indexed = index_pairs(space, pairs);
  std::vector<double> coef(indexed.size(), 0.0);
  for (std::size_t i = 0; i < indexed.size(); ++i) {
    if (indexed[i].reward == 0.0) continue;
    double t = pair_argument(main, opponent, indexed[i], lambda);
    coef[i] = pair_coefficient(t, lambda, indexed[i].reward, indexed.size());
  }
  return reduce_gradient(main, indexed, coef);
}

}  // namespace serial

namespace {

struct DpoTerms {
  std::vector<double> delta;
  std::vector<std::pair<std::size_t, std::size_t>> index;  // (w, l)
};

DpoTerms dpo_terms(const SoftmaxPolicy& policy, const SoftmaxPolicy& reference, const CandidateSpace& space,
                   std::span<const DpoPair> pairs) {
  if (pairs.empty()) throw Error(Errc::EmptyInput, "no preference pairs");
  DpoTerms out;
  for (const auto& p : pairs) {
    std::size_t w = space.index_of(p.question, p.y_w), l = space.index_of(p.question, p.y_l);
    std::vector<double> lp = policy.log_probs(p.question), lr = reference.log_probs(p.question);
    out.delta.push_back((lp[w] - lr[w]) - (lp[l] - lr[l]));
    out.index.emplace_back(w, l);
  }
  return out;
}

}  // namespace

double dpo_loss(const SoftmaxPolicy& policy, const SoftmaxPolicy& reference, const CandidateSpace& space,
                std::span<const DpoPair> pairs, double beta) {
  DpoTerms terms = dpo_terms(policy, reference, space, pairs);
  std::vector<double> losses;
  for (double d : terms.delta) losses.push_back(logistic_loss(beta * d));
  return mean(losses);
}

DpoGradient dpo_grad(const SoftmaxPolicy& policy, const SoftmaxPolicy& reference, const CandidateSpace& space,
                     std::span<const DpoPair> pairs, double beta) {
  DpoTerms terms = dpo_terms(policy, reference, space, pairs);
  const double n = static_cast<double>(pairs.size());
  DpoGradient out;
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    const std::string& q = pairs[i].question;
    double s = beta * sigmoid(-beta * terms.delta[i]) / n;
    out.d_log_w.push_back(-s);
    out.d_log_l.push_back(s);
    auto& g = out.logits.try_emplace(q, policy.logits(q).size(), 0.0).first->second;
    std::vector<double> gw = policy.grad_log_prob(q, terms.index[i].first);
    std::vector<double> gl = policy.grad_log_prob(q, terms.index[i].second);
    for (std::size_t j = 0; j < g.size(); ++j) g[j] += -s * gw[j] + s * gl[j];
  }
  return out;
}

namespace {

std::vector<PreferencePair> forced_pairs(std::span<const GoldPair> pairs) {
  if (pairs.empty()) throw Error(Errc::EmptyInput, "no pairs");
  std::vector<PreferencePair> out;
  out.reserve(pairs.size());
  for (const auto& p : pairs) out.push_back({p.question, p.y_gold, p.y_opp, 1, PairSource::GoldFallback});
  return out;
}

}  // namespace

LossResult spin_style_loss(const SoftmaxPolicy& main, const SoftmaxPolicy& opponent, const CandidateSpace& space,
                           std::span<const GoldPair> pairs, double lambda, int jobs) {
  return error_driven_loss(main, opponent, space, forced_pairs(pairs), lambda, jobs);
}

PolicyGradient spin_style_grad(const SoftmaxPolicy& main, const SoftmaxPolicy& opponent, const CandidateSpace& space,
                               std::span<const GoldPair> pairs, double lambda, int jobs) {
  return error_driven_grad(main, opponent, space, forced_pairs(pairs), lambda, jobs);
}

double val_accuracy(const SoftmaxPolicy& policy, std::span<const ValQuestion> val, const CandidateSpace& space,
                    Verifier& verifier) {
  if (val.empty()) throw Error(Errc::EmptyInput, "empty validation set");
  std::size_t correct = 0;
  for (const auto& q : val) {
    const std::string& pred = space.candidates(q.key)[policy.argmax(q.key)];
    correct += verifier.classify(q.db_id, q.gold_sql, pred).correct() ? 1 : 0;
  }
  return static_cast<double>(correct) / static_cast<double>(val.size());
}

namespace {

bool earlier(const PolicyRecord& a, const PolicyRecord& b) {
  if (a.round != b.round) return a.round < b.round;
  return a.label < b.label;
}

}  // namespace

const PolicyRecord& select_main(std::span<const PolicyRecord> pool) {
  if (pool.empty()) throw Error(Errc::EmptyPool, "model pool is empty");
  const PolicyRecord* best = &pool[0];
  for (const auto& r : pool)
    if (r.val_accuracy > best->val_accuracy || (r.val_accuracy == best->val_accuracy && earlier(r, *best))) best = &r;
  return *best;
}

const PolicyRecord& select_opponent(std::span<const PolicyRecord> pool, const std::optional<std::string>& excluded,
                                    bool* waived) {
  if (pool.empty()) throw Error(Errc::EmptyPool, "model pool is empty");
  if (waived) *waived = false;
  const PolicyRecord* worst = nullptr;
  for (const auto& r : pool) {
    if (excluded && r.label == *excluded) continue;
    if (!worst || r.val_accuracy < worst->val_accuracy ||
        (r.val_accuracy == worst->val_accuracy && earlier(r, *worst)))
      worst = &r;
  }
  if (worst) return *worst;
  if (waived) *waived = true;
  return select_opponent(pool, std::nullopt, nullptr);
}

nlohmann::ordered_json report_to_json(const RoundReport& r) {
  nlohmann::ordered_json doc;
  doc["round"] = r.round;
  doc["main"] = r.main;
  doc["opponent"] = r.opponent;
  doc["loss"] = r.loss;
  doc["pairs"] = {{"total", r.pairs_total}, {"reward1", r.pairs_reward1}, {"gold_fallback", r.pairs_gold_fallback}};
  doc["val_accuracy_before"] = r.val_accuracy_before;
  doc["val_accuracy_after"] = r.val_accuracy_after;
  return doc;
}

RoundReport self_play_round(std::vector<PolicyRecord>& pool, std::span<const ValQuestion> val,
                            const CandidateSpace& space, const SelfPlayConfig& config, Verifier& verifier,
                            int round, const std::optional<std::string>& excluded_opponent) {
  config.validate();
  RoundReport report;
  report.round = round;
  const PolicyRecord main = select_main(pool);
  const PolicyRecord opponent = select_opponent(pool, excluded_opponent, &report.exclusion_waived);
  report.main = main.label;
  report.opponent = opponent.label;
  report.val_accuracy_before = main.val_accuracy;

  Rng rng = Rng::stream(config.seed, static_cast<std::uint64_t>(round));
  std::vector<PreferencePair> pairs =
      build_preference_pairs(opponent.policy, val, space, verifier, config.samples_per_question, rng);
  report.pairs_total = pairs.size();
  for (const auto& p : pairs) {
    report.pairs_reward1 += p.reward == 1 ? 1 : 0;
    report.pairs_gold_fallback += p.source == PairSource::GoldFallback ? 1 : 0;
  }

  SoftmaxPolicy clone = clone_policy(main.policy);
  clone.set_learning_rate(config.learning_rate);
  for (std::size_t s = 0; s < config.steps; ++s)
    clone.apply_gradients(error_driven_grad(clone, opponent.policy, space, pairs, config.lambda, config.jobs));
  report.loss = error_driven_loss(clone, opponent.policy, space, pairs, config.lambda, config.jobs).loss;
  report.val_accuracy_after = val_accuracy(clone, val, space, verifier);

  int next_round = 0;
  for (const auto& r : pool) next_round = std::max(next_round, r.round);
  pool.push_back({std::move(clone), report.val_accuracy_after, next_round + 1, "selfplay-" + std::to_string(round)});
  return report;
}

SelfPlayResult run_self_play(std::vector<PolicyRecord> pool, std::span<const ValQuestion> val,
                             const CandidateSpace& space, const SelfPlayConfig& config, Verifier& verifier) {
  config.validate();
  if (pool.empty()) throw Error(Errc::EmptyPool, "model pool is empty");
  SelfPlayResult result;
  std::optional<std::string> previous_opponent;
  for (int t = 1; t <= config.max_iterations; ++t) {
    result.trajectory.push_back(self_play_round(pool, val, space, config, verifier, t, previous_opponent));
    previous_opponent = result.trajectory.back().opponent;
  }
  result.final_main = select_main(pool);
  result.pool = std::move(pool);
  return result;
}

}  // namespace spft
