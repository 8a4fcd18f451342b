#include "spft/synthesizer.hpp"

#include <charconv>
#include <cmath>
#include <limits>
#include <set>

#include "spft/error.hpp"
#include "spft/executor.hpp"

namespace spft {

namespace {

std::vector<ColumnRef> slot_candidates(const Slot& slot, const DatabaseSchema& schema) {
  std::vector<ColumnRef> out;
  for (const auto& [table, column] : schema.columns_of_type(slot.data_type))
    if (schema.is_fk_column(table, column.name) == slot.is_fk) out.push_back(ColumnRef{table, column.name});
  return out;
}

}  // namespace

Bindings select_columns(const SqlTemplate& tmpl, const DatabaseSchema& schema, Rng& rng,
                        std::vector<SelectionStep>* trace) {
  const std::vector<Slot> slots = tmpl.column_slots();
  std::vector<std::vector<ColumnRef>> all_candidates;
  for (const Slot& slot : slots) {
    all_candidates.push_back(slot_candidates(slot, schema));
    if (all_candidates.back().empty())
      throw Error(Errc::NoCompatibleColumn, "no " + std::string(slot.is_fk ? "foreign-key " : "") + "column of type " +
                                                std::string(to_string(slot.data_type)) + " for " + slot.placeholder());
  }

  Bindings out;
  std::map<ColumnRef, double> weight;
  std::set<ColumnRef> used;
  std::vector<std::size_t> selected_tables;
  for (std::size_t k = 0; k < slots.size(); ++k) {
    std::vector<ColumnRef> candidates;
    for (const auto& c : all_candidates[k])
      if (!used.count(c)) candidates.push_back(c);
    if (candidates.empty())
      throw Error(Errc::ExhaustedCandidates, "every candidate column for " + slots[k].placeholder() + " is taken");

    std::vector<double> draw_weights;
    if (k == 0) {
      draw_weights.assign(candidates.size(), 1.0);
    } else {
      for (const auto& c : candidates) {
        std::size_t t = *schema.table_index(c.table);
        double& w = weight[c];
        bool same_table = std::find(selected_tables.begin(), selected_tables.end(), t) != selected_tables.end();
        if (same_table) {
          w = 1.0;
        } else {
          std::optional<int> nearest;
          for (std::size_t s : selected_tables) {
            auto d = schema.fk_distance(schema.tables()[s].name, c.table);
            if (d && (!nearest || *d < *nearest)) nearest = d;
          }
          w += nearest ? 1.0 / (1.0 + *nearest) : kDisconnectedWeight;
        }
        draw_weights.push_back(w);
      }
    }
    std::size_t pick = k == 0 ? rng.uniform_index(candidates.size()) : rng.weighted_index(draw_weights);
    const ColumnRef& chosen = candidates[pick];
    if (trace) {
      SelectionStep step{slots[k].id, {}, chosen};
      for (std::size_t i = 0; i < candidates.size(); ++i)
        step.candidates.push_back({candidates[i].table, candidates[i].column, draw_weights[i]});
      trace->push_back(std::move(step));
    }
    used.insert(chosen);
    std::size_t t = *schema.table_index(chosen.table);
    if (std::find(selected_tables.begin(), selected_tables.end(), t) == selected_tables.end())
      selected_tables.push_back(t);
    out[slots[k].id] = chosen;
  }
  return out;
}

namespace {

std::string render_number(double x) {
  if (std::isfinite(x) && x == std::floor(x) && std::fabs(x) < 9.0e15)
    return std::to_string(static_cast<long long>(x));
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof buf, x);
  return std::string(buf, end);
}

std::optional<double> parse_number(std::string_view text) {
  double value = 0;
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc() || ptr != text.data() + text.size() || text.empty()) return std::nullopt;
  return value;
}

std::string render_value(const Cell& cell, sql::SlotType slot) {
  bool numeric_slot = slot == sql::SlotType::Num || slot == sql::SlotType::Bool;
  if (const double* d = std::get_if<double>(&cell)) return numeric_slot ? render_number(*d) : sql::quote_string(render_number(*d));
  const std::string& text = std::get<std::string>(cell);
  if (numeric_slot)
    if (auto d = parse_number(text)) return render_number(*d);
  return sql::quote_string(text);
}

std::vector<Cell> distinct_values(Database& db, const ColumnRef& column) {
  std::string col = sql::print_identifier(column.column);
  std::string query = "SELECT DISTINCT " + col + " FROM " + sql::print_identifier(column.table) + " WHERE " + col +
                      " IS NOT NULL ORDER BY 1 LIMIT 100000";
  ExecConfig config;
  config.max_rows = 100000;
  ResultTable result = execute(db, query, config);
  std::vector<Cell> out;
  out.reserve(result.rows.size());
  for (auto& row : result.rows) out.push_back(std::move(row[0]));
  return out;
}

}  // namespace

std::string fill_values(std::string_view sql_partial, const Bindings& bindings, Database& db, Rng& rng) {
  std::vector<sql::Token> tokens = sql::tokenize(sql_partial);
  std::map<std::string, int> slot_of;
  for (const Slot& s : slots_from_skeleton(sql_partial))
    if (s.kind == SlotKind::Column) slot_of[s.placeholder()] = s.id;

  auto compatible = [&](std::size_t i, sql::SlotType want) -> bool {
    if (tokens[i].kind != sql::TokenKind::Word) return false;
    auto ph = sql::parse_placeholder(tokens[i].text);
    return ph && sql::slot_type_for(ph->type) == want;
  };

  std::string out;
  std::size_t copied = 0;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (tokens[i].kind != sql::TokenKind::ValueSlot) continue;
    sql::SlotType want = tokens[i].text == "NUM"    ? sql::SlotType::Num
                         : tokens[i].text == "STR"  ? sql::SlotType::Str
                         : tokens[i].text == "TIME" ? sql::SlotType::Time
                                                    : sql::SlotType::Bool;
    std::optional<std::size_t> anchor;
    for (std::size_t j = i; j-- > 0;)
      if (compatible(j, want)) {
        anchor = j;
        break;
      }
    if (!anchor)
      for (std::size_t j = i + 1; j < tokens.size(); ++j)
        if (compatible(j, want)) {
          anchor = j;
          break;
        }
    if (!anchor)
      throw Error(Errc::NoValuesAvailable,
                  "no column placeholder to draw a " + std::string(sql::slot_token(want)) + " value from");
    auto slot = slot_of.find(tokens[*anchor].text);
    auto bound = slot == slot_of.end() ? bindings.end() : bindings.find(slot->second);
    if (bound == bindings.end()) throw Error(Errc::InvalidArgument, "no binding for " + tokens[*anchor].text);

    std::vector<Cell> values = distinct_values(db, bound->second);
    if (values.empty())
      throw Error(Errc::NoValuesAvailable, bound->second.table + "." + bound->second.column + " has no non-null values");
    std::string literal = render_value(values[rng.uniform_index(values.size())], want);

    out.append(sql_partial.substr(copied, tokens[i].offset - copied));
    out += literal;
    copied = tokens[i].offset + tokens[i].text.size() + 2;  // "[" text "]"
  }
  out.append(sql_partial.substr(copied));
  return out;
}

namespace {

sql::Expr column_expr(const std::string& table, const std::string& column) {
  sql::Expr e;
  e.kind = sql::ExprKind::Column;
  e.qualifier = table;
  e.text = column;
  return e;
}

}  // namespace

std::vector<sql::FromItem> join_tables(const std::vector<std::string>& tables, const DatabaseSchema& schema) {
  if (tables.empty()) throw Error(Errc::InvalidArgument, "no tables to join");
  std::vector<sql::FromItem> items;
  std::vector<std::size_t> included;
  for (const auto& name : tables) {
    std::size_t target = schema.table_index(name).value_or(schema.tables().size());
    if (target == schema.tables().size()) throw Error(Errc::UnknownTable, "unknown table '" + name + "'");
    if (std::find(included.begin(), included.end(), target) != included.end()) continue;
    if (included.empty()) {
      sql::FromItem first;
      first.table = schema.tables()[target].name;
      items.push_back(std::move(first));
      included.push_back(target);
      continue;
    }
    auto path = schema.shortest_path(included, target);
    if (!path)
      throw Error(Errc::DisconnectedTables, "no foreign-key path reaches " + schema.tables()[target].name);
    for (auto [fk_index, reached] : *path) {
      const ForeignKey& fk = schema.foreign_keys()[fk_index];
      const std::string& reached_name = schema.tables()[reached].name;
      bool reached_is_to = iequals(fk.to_table, reached_name);
      sql::FromItem item;
      item.join = "JOIN";
      item.table = reached_name;
      sql::Expr on;
      on.kind = sql::ExprKind::Binary;
      on.text = "=";
      if (reached_is_to) {
        on.args.push_back(column_expr(schema.table(fk.from_table).name, fk.from_column));
        on.args.push_back(column_expr(reached_name, fk.to_column));
      } else {
        on.args.push_back(column_expr(schema.table(fk.to_table).name, fk.to_column));
        on.args.push_back(column_expr(reached_name, fk.from_column));
      }
      item.on = std::move(on);
      items.push_back(std::move(item));
      included.push_back(reached);
    }
  }
  return items;
}

std::string reconstruct_from_clause(const Bindings& bindings, const DatabaseSchema& schema) {
  std::vector<std::string> tables;
  for (const auto& [slot, column] : bindings)
    if (std::find(tables.begin(), tables.end(), column.table) == tables.end()) tables.push_back(column.table);
  std::string out = "FROM";
  for (const auto& item : join_tables(tables, schema)) {
    if (!item.join.empty()) out += " " + item.join;
    out += " " + sql::print_identifier(item.table);
    if (item.on) out += " ON " + sql::print(*item.on);
  }
  return out;
}

namespace {

class Binder {
 public:
  Binder(const std::map<std::string, ColumnRef>& columns, const DatabaseSchema& schema, Rng& rng)
      : columns_(columns), schema_(schema), rng_(rng) {}

  void statement(sql::SelectStatement& stmt) {
    std::vector<std::vector<std::string>> tables(stmt.cores.size());
    for (std::size_t i = 0; i < stmt.cores.size(); ++i) {
      sql::SelectCore& core = stmt.cores[i];
      for (auto& item : core.items) bind(item.expr, tables[i]);
      if (core.where) bind(*core.where, tables[i]);
      for (auto& g : core.group_by) bind(g, tables[i]);
      if (core.having) bind(*core.having, tables[i]);
    }
    for (auto& o : stmt.order_by) bind(o.expr, tables.back());
    for (std::size_t i = 0; i < stmt.cores.size(); ++i) {
      if (tables[i].empty()) tables[i].push_back(schema_.tables()[rng_.uniform_index(schema_.tables().size())].name);
      stmt.cores[i].from = join_tables(tables[i], schema_);
    }
  }

 private:
  void bind(sql::Expr& e, std::vector<std::string>& tables) {
    if (e.kind == sql::ExprKind::Column && e.qualifier.empty() && sql::parse_placeholder(e.text)) {
      auto it = columns_.find(e.text);
      if (it == columns_.end()) throw Error(Errc::InvalidArgument, "no binding for " + e.text);
      e.qualifier = it->second.table;
      e.text = it->second.column;
      if (std::find(tables.begin(), tables.end(), it->second.table) == tables.end())
        tables.push_back(it->second.table);
      return;
    }
    for (auto& arg : e.args) bind(arg, tables);
    if (e.subquery) statement(*e.subquery);
  }

  const std::map<std::string, ColumnRef>& columns_;
  const DatabaseSchema& schema_;
  Rng& rng_;
};

}  // namespace

std::string compose_sql(std::string_view filled_skeleton, const Bindings& bindings, const DatabaseSchema& schema,
                        Rng& rng) {
  std::map<std::string, ColumnRef> columns;
  for (const Slot& s : slots_from_skeleton(filled_skeleton)) {
    if (s.kind != SlotKind::Column) continue;
    auto it = bindings.find(s.id);
    if (it == bindings.end()) throw Error(Errc::InvalidArgument, "no binding for " + s.placeholder());
    columns.emplace(s.placeholder(), it->second);
  }
  sql::SelectStatement stmt = sql::parse_select(filled_skeleton);
  Binder(columns, schema, rng).statement(stmt);
  return sql::print(stmt);
}

SynthSample instantiate(const SqlTemplate& tmpl, const DatabaseSchema& schema, Database& db, Rng& rng,
                        std::size_t max_retries, std::optional<std::size_t> template_id) {
  if (max_retries == 0) throw Error(Errc::InvalidArgument, "max_retries must be positive");
  const std::uint64_t seed = rng.seed();
  std::string last_error;
  for (std::size_t attempt = 0; attempt < max_retries; ++attempt) {
    try {
      Bindings bindings = select_columns(tmpl, schema, rng);
      std::string filled = fill_values(tmpl.skeleton, bindings, db, rng);
      std::string query = compose_sql(filled, bindings, schema, rng);
      execute(db, query);
      SynthSample sample;
      sample.question = render_nlq(query, schema);
      sample.sql = std::move(query);
      sample.db_id = schema.db_id();
      sample.origin = Origin::Synthetic;
      sample.template_id = template_id;
      sample.template_skeleton = tmpl.skeleton;
      sample.seed = seed;
      return sample;
    } catch (const Error& e) {
      if (e.code() == Errc::NoCompatibleColumn || e.code() == Errc::ExhaustedCandidates) throw;
      last_error = e.what();
    }
  }
  throw Error(Errc::InstantiationFailed,
              "gave up on \"" + tmpl.skeleton + "\" after " + std::to_string(max_retries) + " attempts: " + last_error);
}

std::vector<SynthSample> synthesize_dataset(const TemplatePool& pool, const DatabaseSchema& schema, Database& db,
                                            std::size_t n, std::uint64_t seed, const SynthesisOptions& options,
                                            SynthesisStats* stats) {
  if (n == 0) throw Error(Errc::InvalidArgument, "sample count must be positive");
  if (options.max_retries == 0) throw Error(Errc::InvalidArgument, "max_retries must be positive");
  if (pool.empty()) throw Error(Errc::EmptyPool, "template pool is empty");
  SynthesisStats local;
  std::vector<SynthSample> out;
  std::set<std::string> seen_sql, seen_questions;
  const std::size_t budget = n * options.max_retries;
  std::uint64_t attempt = 0;
  while (out.size() < n) {
    if (attempt >= budget) {
      if (stats) *stats = local;
      throw Error(Errc::SynthesisStalled, "produced " + std::to_string(out.size()) + " of " + std::to_string(n) +
                                              " samples in " + std::to_string(budget) + " attempts");
    }
    Rng rng = Rng::stream(seed, attempt++);
    ++local.attempts;
    std::size_t index = sample_template_index(pool, rng);
    try {
      SynthSample sample = instantiate(pool.at(index), schema, db, rng, options.max_retries, index);
      if (seen_sql.count(sample.sql) || seen_questions.count(sample.question) ||
          (options.reject && options.reject(sample))) {
        ++local.duplicates;
        continue;
      }
      seen_sql.insert(sample.sql);
      seen_questions.insert(sample.question);
      out.push_back(std::move(sample));
    } catch (const Error& e) {
      ++local.failures_by_template[index];
      ++local.failures_by_error[std::string(errc_name(e.code()))];
    }
  }
  if (stats) *stats = local;
  return out;
}

}  // namespace spft
