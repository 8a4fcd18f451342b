#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "spft/database.hpp"
#include "spft/schema.hpp"

namespace spft {

struct RankedColumn {
  std::string column;
  double score = 0.0;
};

struct RankedTable {
  std::string table;
  double score = 0.0;
  std::vector<RankedColumn> columns;  // best first
};

struct ValueMatch {
  std::string table;
  std::string column;
  std::string value;  // cell value as stored
  std::string span;   // matched question tokens, space separated

  friend bool operator==(const ValueMatch&, const ValueMatch&) = default;
};

struct SchemaContext {
  std::vector<RankedTable> ranked_tables;
  std::vector<ValueMatch> matched_values;
  std::vector<std::string> metadata_lines;
};

struct ContextOptions {
  std::size_t top_k_tables = 4;
  std::size_t top_k_columns = 6;
  std::size_t max_matches = 5;
};

/// Lowercased alphanumeric runs.
std::vector<std::string> question_tokens(std::string_view question);
/// question_tokens minus common English function words.
std::vector<std::string> content_tokens(std::string_view question);

/// 2 * LCS(a, b) / (|a| + |b|) over characters; 0 when both are empty.
double lcs_ratio(std::string_view a, std::string_view b);
/// Best lcs_ratio between the token and the whole name or any underscore part.
double name_similarity(std::string_view token, std::string_view name);

/// Column score = best similarity over content tokens; table score = max of
/// its own name score and its column scores. Stable ranking, so equal scores
/// keep declaration order.
std::vector<RankedTable> extract_relevant_schema(std::string_view question, const DatabaseSchema& schema,
                                                 std::size_t top_k_tables, std::size_t top_k_columns);

/// Text-column cells whose lowercased tokens occur contiguously in the
/// question, longest value first, at most max_matches.
std::vector<ValueMatch> match_values(std::string_view question, const DatabaseSchema& schema, Database& db,
                                     std::size_t max_matches);

/// "<table>.<column>: <type>[, primary key][, <comment>]" per column, then
/// "<from_table>.<from_column> references <to_table>.<to_column>" per FK.
std::vector<std::string> augment_metadata(const DatabaseSchema& schema);

SchemaContext build_context(std::string_view question, const DatabaseSchema& schema, Database& db,
                            const ContextOptions& options = {});

/// Layout:
///   /* schema */
///   <table> (<score>): <column> (<score>), ...
///   /* values */
///   <table>.<column> = <json string value> ~ <json string span>
///   /* metadata */
///   <line with \ and newlines escaped>
///   Question: <question>
/// Scores use the shortest round-trip decimal form. No trailing newline.
std::string serialize_context(std::string_view question, const SchemaContext& ctx);

nlohmann::ordered_json context_to_json(const SchemaContext& ctx);

/// 64-bit FNV-1a of the text as 16 lowercase hex digits.
std::string question_key(std::string_view text);

}  // namespace spft
