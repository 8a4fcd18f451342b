#include "spft/context.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <charconv>
#include <cstdio>

#include "spft/executor.hpp"
#include "spft/sql.hpp"

namespace spft {

namespace {

constexpr std::array<std::string_view, 40> kStopwords = {
    "a",    "an",   "the",  "of",    "in",    "on",   "for",   "to",    "is",   "are",
    "was",  "were", "be",   "by",    "with",  "and",  "or",    "what",  "which", "who",
    "whom", "how",  "many", "much",  "all",   "list", "give",  "show",  "me",   "their",
    "its",  "from", "that", "there", "do",    "does", "each",  "every", "as",   "at"};

std::string format_score(double x) {
  char buf[32];
  auto [end, ec] = std::to_chars(buf, buf + sizeof buf, x);
  return std::string(buf, end);
}

std::string escape_line(std::string_view s) {
  std::string out;
  for (char c : s) {
    if (c == '\\') out += "\\\\";
    else if (c == '\n') out += "\\n";
    else if (c == '\r') out += "\\r";
    else out += c;
  }
  return out;
}

std::string json_string(std::string_view s) { return nlohmann::json(std::string(s)).dump(); }

}  // namespace

std::vector<std::string> question_tokens(std::string_view question) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : question) {
    if (std::isalnum(static_cast<unsigned char>(c))) {
      cur += static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    } else if (!cur.empty()) {
      out.push_back(std::move(cur));
      cur.clear();
    }
  }
  if (!cur.empty()) out.push_back(std::move(cur));
  return out;
}

std::vector<std::string> content_tokens(std::string_view question) {
  std::vector<std::string> out;
  for (auto& t : question_tokens(question))
    if (std::find(kStopwords.begin(), kStopwords.end(), t) == kStopwords.end()) out.push_back(std::move(t));
  return out;
}

double lcs_ratio(std::string_view a, std::string_view b) {
  if (a.empty() && b.empty()) return 0.0;
  std::vector<std::size_t> prev(b.size() + 1, 0), cur(b.size() + 1, 0);
  for (std::size_t i = 1; i <= a.size(); ++i) {
    for (std::size_t j = 1; j <= b.size(); ++j)
      cur[j] = a[i - 1] == b[j - 1] ? prev[j - 1] + 1 : std::max(prev[j], cur[j - 1]);
    std::swap(prev, cur);
  }
  return 2.0 * static_cast<double>(prev[b.size()]) / static_cast<double>(a.size() + b.size());
}

double name_similarity(std::string_view token, std::string_view name) {
  std::string lower = to_lower(name);
  std::string joined;
  double best = 0.0;
  std::size_t start = 0;
  while (start <= lower.size()) {
    std::size_t end = lower.find('_', start);
    if (end == std::string::npos) end = lower.size();
    std::string_view part = std::string_view(lower).substr(start, end - start);
    if (!part.empty()) best = std::max(best, lcs_ratio(token, part));
    joined += part;
    start = end + 1;
  }
  if (!joined.empty()) best = std::max(best, lcs_ratio(token, joined));
  return best;
}

std::vector<RankedTable> extract_relevant_schema(std::string_view question, const DatabaseSchema& schema,
                                                 std::size_t top_k_tables, std::size_t top_k_columns) {
  const std::vector<std::string> tokens = content_tokens(question);
  auto score_of = [&](std::string_view name) {
    double best = 0.0;
    for (const auto& t : tokens) best = std::max(best, name_similarity(t, name));
    return best;
  };
  std::vector<RankedTable> tables;
  for (const auto& t : schema.tables()) {
    RankedTable rt{t.name, score_of(t.name), {}};
    for (const auto& c : t.columns) {
      rt.columns.push_back({c.name, score_of(c.name)});
      rt.score = std::max(rt.score, rt.columns.back().score);
    }
    std::stable_sort(rt.columns.begin(), rt.columns.end(),
                     [](const RankedColumn& a, const RankedColumn& b) { return a.score > b.score; });
    if (rt.columns.size() > top_k_columns) rt.columns.resize(top_k_columns);
    tables.push_back(std::move(rt));
  }
  std::stable_sort(tables.begin(), tables.end(),
                   [](const RankedTable& a, const RankedTable& b) { return a.score > b.score; });
  if (tables.size() > top_k_tables) tables.resize(top_k_tables);
  return tables;
}

std::vector<ValueMatch> match_values(std::string_view question, const DatabaseSchema& schema, Database& db,
                                     std::size_t max_matches) {
  const std::vector<std::string> q = question_tokens(question);
  std::vector<ValueMatch> out;
  if (q.empty()) return out;
  ExecConfig config;
  config.max_rows = 100000;
  for (const auto& t : schema.tables()) {
    for (const auto& c : t.columns) {
      if (c.data_type != DataType::Text) continue;
      std::string col = sql::print_identifier(c.name);
      ResultTable cells = execute(db,
                                  "SELECT DISTINCT " + col + " FROM " + sql::print_identifier(t.name) + " WHERE " +
                                      col + " IS NOT NULL ORDER BY 1 LIMIT 100000",
                                  config);
      for (const auto& row : cells.rows) {
        const auto* value = std::get_if<std::string>(&row[0]);
        if (!value) continue;
        std::vector<std::string> v = question_tokens(*value);
        if (v.empty() || v.size() > q.size()) continue;
        for (std::size_t i = 0; i + v.size() <= q.size(); ++i) {
          if (std::equal(v.begin(), v.end(), q.begin() + static_cast<long>(i))) {
            std::string span;
            for (const auto& w : v) span += (span.empty() ? "" : " ") + w;
            out.push_back({t.name, c.name, *value, span});
            break;
          }
        }
      }
    }
  }
  std::stable_sort(out.begin(), out.end(),
                   [](const ValueMatch& a, const ValueMatch& b) { return a.value.size() > b.value.size(); });
  if (out.size() > max_matches) out.resize(max_matches);
  return out;
}

std::vector<std::string> augment_metadata(const DatabaseSchema& schema) {
  std::vector<std::string> lines;
  for (const auto& t : schema.tables())
    for (const auto& c : t.columns) {
      std::string line = t.name + "." + c.name + ": " + std::string(to_string(c.data_type));
      if (c.is_primary_key) line += ", primary key";
      if (c.comment && !c.comment->empty()) line += ", " + *c.comment;
      lines.push_back(std::move(line));
    }
  for (const auto& fk : schema.foreign_keys())
    lines.push_back(fk.from_table + "." + fk.from_column + " references " + fk.to_table + "." + fk.to_column);
  return lines;
}

SchemaContext build_context(std::string_view question, const DatabaseSchema& schema, Database& db,
                            const ContextOptions& options) {
  SchemaContext ctx;
  ctx.ranked_tables = extract_relevant_schema(question, schema, options.top_k_tables, options.top_k_columns);
  ctx.matched_values = match_values(question, schema, db, options.max_matches);
  ctx.metadata_lines = augment_metadata(schema);
  return ctx;
}

std::string serialize_context(std::string_view question, const SchemaContext& ctx) {
  std::string out = "/* schema */\n";
  for (const auto& t : ctx.ranked_tables) {
    out += t.table + " (" + format_score(t.score) + "):";
    for (std::size_t i = 0; i < t.columns.size(); ++i) {
      out += i ? ", " : " ";
      out += t.columns[i].column + " (" + format_score(t.columns[i].score) + ")";
    }
    out += '\n';
  }
  out += "/* values */\n";
  for (const auto& m : ctx.matched_values)
    out += m.table + "." + m.column + " = " + json_string(m.value) + " ~ " + json_string(m.span) + "\n";
  out += "/* metadata */\n";
  for (const auto& line : ctx.metadata_lines) out += escape_line(line) + "\n";
  out += "Question: ";
  out += question;
  return out;
}

nlohmann::ordered_json context_to_json(const SchemaContext& ctx) {
  nlohmann::ordered_json doc;
  doc["ranked_tables"] = nlohmann::ordered_json::array();
  for (const auto& t : ctx.ranked_tables) {
    nlohmann::ordered_json cols = nlohmann::ordered_json::array();
    for (const auto& c : t.columns) cols.push_back({{"column", c.column}, {"score", c.score}});
    doc["ranked_tables"].push_back({{"table", t.table}, {"score", t.score}, {"columns", std::move(cols)}});
  }
  doc["matched_values"] = nlohmann::ordered_json::array();
  for (const auto& m : ctx.matched_values)
    doc["matched_values"].push_back({{"table", m.table}, {"column", m.column}, {"value", m.value}, {"span", m.span}});
  doc["metadata_lines"] = ctx.metadata_lines;
  return doc;
}

std::string question_key(std::string_view text) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

}  // namespace spft
