#include "spft/policy.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "spft/error.hpp"

namespace spft {

void CandidateSpace::add_question(const std::string& key, std::vector<std::string> candidates,
                                  const std::string& gold) {
  if (entries_.count(key)) throw Error(Errc::InvalidArgument, "question '" + key + "' added twice");
  if (candidates.size() < 2) throw Error(Errc::InvalidArgument, "question '" + key + "' needs at least 2 candidates");
  std::set<std::string> distinct(candidates.begin(), candidates.end());
  if (distinct.size() != candidates.size())
    throw Error(Errc::InvalidArgument, "question '" + key + "' has duplicate candidates");
  auto it = std::find(candidates.begin(), candidates.end(), gold);
  if (it == candidates.end()) throw Error(Errc::InvalidArgument, "question '" + key + "' lacks its gold query");
  const auto gold_at = static_cast<std::size_t>(it - candidates.begin());
  Entry e{std::move(candidates), gold_at};
  entries_.emplace(key, std::move(e));
  keys_.push_back(key);
}

const CandidateSpace::Entry& CandidateSpace::entry(const std::string& key) const {
  auto it = entries_.find(key);
  if (it == entries_.end()) throw Error(Errc::UnknownQuestion, "unknown question '" + key + "'");
  return it->second;
}

const std::vector<std::string>& CandidateSpace::candidates(const std::string& key) const { return entry(key).candidates; }
std::size_t CandidateSpace::gold_index(const std::string& key) const { return entry(key).gold; }
const std::string& CandidateSpace::gold(const std::string& key) const {
  const Entry& e = entry(key);
  return e.candidates[e.gold];
}

std::size_t CandidateSpace::index_of(const std::string& key, const std::string& sql) const {
  const auto& c = entry(key).candidates;
  auto it = std::find(c.begin(), c.end(), sql);
  if (it == c.end()) throw Error(Errc::UnknownCandidate, "not a candidate of '" + key + "': " + sql);
  return static_cast<std::size_t>(it - c.begin());
}

SoftmaxPolicy::SoftmaxPolicy(double learning_rate) : learning_rate_(learning_rate) {
  set_learning_rate(learning_rate);
}

void SoftmaxPolicy::set_learning_rate(double lr) {
  if (!(lr > 0.0) || !std::isfinite(lr)) throw Error(Errc::InvalidArgument, "learning rate must be positive");
  learning_rate_ = lr;
}

SoftmaxPolicy SoftmaxPolicy::uniform(const CandidateSpace& space, double learning_rate) {
  SoftmaxPolicy p(learning_rate);
  for (const auto& key : space.keys()) p.logits_[key].assign(space.candidates(key).size(), 0.0);
  return p;
}

SoftmaxPolicy SoftmaxPolicy::gaussian(const CandidateSpace& space, double learning_rate, double scale, Rng& rng) {
  SoftmaxPolicy p(learning_rate);
  for (const auto& key : space.keys()) {
    std::vector<double> logits(space.candidates(key).size());
    for (double& x : logits) x = scale * rng.normal();
    p.logits_[key] = std::move(logits);
  }
  return p;
}

void SoftmaxPolicy::set_logits(const std::string& key, std::vector<double> logits) {
  if (logits.empty()) throw Error(Errc::InvalidArgument, "empty logit vector for '" + key + "'");
  for (double x : logits)
    if (!std::isfinite(x)) throw Error(Errc::InvalidArgument, "non-finite logit for '" + key + "'");
  logits_[key] = std::move(logits);
}

const std::vector<double>& SoftmaxPolicy::logits(const std::string& key) const {
  auto it = logits_.find(key);
  if (it == logits_.end()) throw Error(Errc::UnknownQuestion, "policy has no question '" + key + "'");
  return it->second;
}

std::vector<double> SoftmaxPolicy::log_probs(const std::string& key) const {
  const auto& z = logits(key);
  double m = *std::max_element(z.begin(), z.end());
  double sum = 0.0;
  for (double x : z) sum += std::exp(x - m);
  double log_norm = m + std::log(sum);
  std::vector<double> out(z.size());
  for (std::size_t i = 0; i < z.size(); ++i) out[i] = z[i] - log_norm;
  return out;
}

std::vector<double> SoftmaxPolicy::probabilities(const std::string& key) const {
  std::vector<double> out = log_probs(key);
  for (double& x : out) x = std::exp(x);
  return out;
}

double SoftmaxPolicy::log_prob(const std::string& key, std::size_t candidate) const {
  std::vector<double> lp = log_probs(key);
  if (candidate >= lp.size()) throw Error(Errc::UnknownCandidate, "candidate index out of range for '" + key + "'");
  return lp[candidate];
}

double SoftmaxPolicy::log_prob(const CandidateSpace& space, const std::string& key, const std::string& sql) const {
  return log_prob(key, space.index_of(key, sql));
}

std::vector<double> SoftmaxPolicy::grad_log_prob(const std::string& key, std::size_t candidate) const {
  std::vector<double> g = probabilities(key);
  if (candidate >= g.size()) throw Error(Errc::UnknownCandidate, "candidate index out of range for '" + key + "'");
  for (double& x : g) x = -x;
  g[candidate] += 1.0;
  return g;
}

std::vector<std::size_t> SoftmaxPolicy::sample(const std::string& key, Rng& rng, std::size_t n) const {
  std::vector<double> p = probabilities(key);
  std::vector<std::size_t> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) out.push_back(rng.weighted_index(p));
  return out;
}

std::size_t SoftmaxPolicy::argmax(const std::string& key) const {
  const auto& z = logits(key);
  return static_cast<std::size_t>(std::max_element(z.begin(), z.end()) - z.begin());
}

void SoftmaxPolicy::step(const std::string& key, const std::vector<double>& grad) {
  auto it = logits_.find(key);
  if (it == logits_.end()) throw Error(Errc::UnknownQuestion, "policy has no question '" + key + "'");
  if (grad.size() != it->second.size())
    throw Error(Errc::InvalidArgument, "gradient size does not match the candidates of '" + key + "'");
  std::vector<double> next = it->second;
  for (std::size_t j = 0; j < next.size(); ++j) {
    next[j] -= learning_rate_ * grad[j];
    if (!std::isfinite(next[j])) throw Error(Errc::InvalidArgument, "update made a logit non-finite");
  }
  it->second = std::move(next);
}

void SoftmaxPolicy::apply_gradient(const std::string& key, const std::vector<double>& grad) {
  step(key, grad);
  ++version_;
}

void SoftmaxPolicy::apply_gradient(const std::string& key, const std::map<std::size_t, double>& grad) {
  std::vector<double> dense(logits(key).size(), 0.0);
  for (const auto& [j, g] : grad) {
    if (j >= dense.size()) throw Error(Errc::InvalidArgument, "gradient index out of range for '" + key + "'");
    dense[j] = g;
  }
  apply_gradient(key, dense);
}

void SoftmaxPolicy::apply_gradients(const std::map<std::string, std::vector<double>>& grads) {
  for (const auto& [key, g] : grads) step(key, g);
  ++version_;
}

nlohmann::ordered_json policy_to_json(const SoftmaxPolicy& policy) {
  nlohmann::ordered_json doc;
  doc["version"] = policy.version();
  doc["lr"] = policy.learning_rate();
  nlohmann::ordered_json logits = nlohmann::ordered_json::object();
  for (const auto& [key, z] : policy.all_logits()) logits[key] = z;
  doc["logits"] = std::move(logits);
  return doc;
}

SoftmaxPolicy policy_from_json(const nlohmann::ordered_json& doc) {
  if (!doc.is_object() || !doc.contains("version") || !doc["version"].is_number_unsigned() || !doc.contains("lr") ||
      !doc["lr"].is_number() || !doc.contains("logits") || !doc["logits"].is_object())
    throw Error(Errc::FormatError, "policy checkpoint needs \"version\", \"lr\" and \"logits\"");
  try {
    SoftmaxPolicy p(doc["lr"].get<double>());
    for (const auto& [key, z] : doc["logits"].items()) {
      if (!z.is_array()) throw Error(Errc::FormatError, "logits of '" + key + "' are not an array");
      std::vector<double> values;
      for (const auto& x : z) {
        if (!x.is_number()) throw Error(Errc::FormatError, "non-numeric logit for '" + key + "'");
        values.push_back(x.get<double>());
      }
      p.set_logits(key, std::move(values));
    }
    p.version_ = doc["version"].get<std::uint64_t>();
    return p;
  } catch (const Error& e) {
    if (e.code() == Errc::FormatError) throw;
    throw Error(Errc::FormatError, e.what());
  }
}

}  // namespace spft
