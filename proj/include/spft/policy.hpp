#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "spft/rng.hpp"

namespace spft {

/// Finite per-question output space: ordered, distinct candidate SQL texts
/// with the gold query present exactly once.
class CandidateSpace {
 public:
  /// Throws InvalidArgument when the candidates break the invariants.
  void add_question(const std::string& key, std::vector<std::string> candidates, const std::string& gold);

  bool contains(const std::string& key) const { return entries_.count(key) != 0; }
  const std::vector<std::string>& candidates(const std::string& key) const;  // throws UnknownQuestion
  std::size_t gold_index(const std::string& key) const;
  const std::string& gold(const std::string& key) const;
  /// Throws UnknownQuestion / UnknownCandidate.
  std::size_t index_of(const std::string& key, const std::string& sql) const;
  const std::vector<std::string>& keys() const noexcept { return keys_; }  // insertion order
  std::size_t size() const noexcept { return keys_.size(); }

 private:
  struct Entry {
    std::vector<std::string> candidates;
    std::size_t gold = 0;
  };
  const Entry& entry(const std::string& key) const;

  std::map<std::string, Entry> entries_;
  std::vector<std::string> keys_;
};

/// Independent softmax over each question's candidates.
class SoftmaxPolicy {
 public:
  explicit SoftmaxPolicy(double learning_rate = 0.05);

  /// All-zero logits for every question of the space.
  static SoftmaxPolicy uniform(const CandidateSpace& space, double learning_rate);
  /// Logits drawn i.i.d. from N(0, scale^2), questions in key order.
  static SoftmaxPolicy gaussian(const CandidateSpace& space, double learning_rate, double scale, Rng& rng);

  void set_logits(const std::string& key, std::vector<double> logits);  // throws InvalidArgument on non-finite
  bool contains(const std::string& key) const { return logits_.count(key) != 0; }
  const std::vector<double>& logits(const std::string& key) const;  // throws UnknownQuestion
  const std::map<std::string, std::vector<double>>& all_logits() const noexcept { return logits_; }

  std::vector<double> log_probs(const std::string& key) const;
  std::vector<double> probabilities(const std::string& key) const;
  double log_prob(const std::string& key, std::size_t candidate) const;  // throws UnknownCandidate
  double log_prob(const CandidateSpace& space, const std::string& key, const std::string& sql) const;
  /// d log p(candidate) / d logit_j = 1[j = candidate] - softmax_j.
  std::vector<double> grad_log_prob(const std::string& key, std::size_t candidate) const;

  std::vector<std::size_t> sample(const std::string& key, Rng& rng, std::size_t n) const;
  /// Highest-probability candidate; the lowest index wins ties.
  std::size_t argmax(const std::string& key) const;

  /// logit_j -= learning_rate * grad_j for one question; bumps the version.
  /// Throws UnknownQuestion or InvalidArgument (size mismatch / non-finite result).
  void apply_gradient(const std::string& key, const std::vector<double>& grad);
  void apply_gradient(const std::string& key, const std::map<std::size_t, double>& grad);
  /// One update over several questions; bumps the version once.
  void apply_gradients(const std::map<std::string, std::vector<double>>& grads);

  double learning_rate() const noexcept { return learning_rate_; }
  void set_learning_rate(double lr);
  std::uint64_t version() const noexcept { return version_; }

  friend bool operator==(const SoftmaxPolicy&, const SoftmaxPolicy&) = default;
  friend SoftmaxPolicy policy_from_json(const nlohmann::ordered_json& doc);

 private:
  void step(const std::string& key, const std::vector<double>& grad);

  std::map<std::string, std::vector<double>> logits_;
  double learning_rate_;
  std::uint64_t version_ = 0;
};

/// Deep copy; kept as a named operation because the pool snapshots policies.
inline SoftmaxPolicy clone_policy(const SoftmaxPolicy& policy) { return policy; }

/// {"version": int, "lr": float, "logits": {key: [float, ...]}}
nlohmann::ordered_json policy_to_json(const SoftmaxPolicy& policy);
SoftmaxPolicy policy_from_json(const nlohmann::ordered_json& doc);  // throws FormatError

}  // namespace spft
