#pragma once

#include <cstdint>
#include <optional>
#include <string>

#include "json.hpp"

namespace spft {

enum class Origin { Synthetic, Corpus };

/// One (question, SQL, database) triple: a synthetic training/validation
/// item or a corpus entry used to seed the template pool.
struct SynthSample {
  std::string question;
  std::string sql;
  std::string db_id;
  Origin origin = Origin::Synthetic;
  std::optional<std::size_t> template_id;
  std::string template_skeleton;
  std::uint64_t seed = 0;

  friend bool operator==(const SynthSample&, const SynthSample&) = default;
};

/// {"question","sql","db_id","origin","template_skeleton","seed"} in that order.
nlohmann::ordered_json sample_to_json(const SynthSample& sample);
/// Accepts the synthetic format as well as corpus rows that spell the SQL as
/// "query" and omit the synthesis fields.
SynthSample sample_from_json(const nlohmann::ordered_json& row);

}  // namespace spft
