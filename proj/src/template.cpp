#include "spft/template.hpp"

#include <set>

#include "spft/error.hpp"
#include "spft/sql.hpp"

namespace spft {

std::string_view to_string(SlotKind kind) noexcept { return kind == SlotKind::Column ? "column" : "value"; }

std::string Slot::placeholder() const {
  if (kind == SlotKind::Value) return std::string(sql::slot_token(sql::slot_type_for(data_type)));
  return sql::placeholder_name(data_type, is_fk, ordinal);
}

std::vector<Slot> SqlTemplate::column_slots() const {
  std::vector<Slot> out;
  for (const auto& s : slots)
    if (s.kind == SlotKind::Column) out.push_back(s);
  return out;
}

std::vector<Slot> SqlTemplate::value_slots() const {
  std::vector<Slot> out;
  for (const auto& s : slots)
    if (s.kind == SlotKind::Value) out.push_back(s);
  return out;
}

std::vector<Slot> slots_from_skeleton(std::string_view skeleton) {
  sql::SelectStatement stmt = sql::parse_select(skeleton);
  std::vector<Slot> slots;
  std::set<std::string> seen;
  int next_column = 1, next_value = 1;
  sql::for_each_expr(stmt, [&](const sql::Expr& e) {
    if (e.kind == sql::ExprKind::Column && e.qualifier.empty()) {
      auto ph = sql::parse_placeholder(e.text);
      if (!ph || !seen.insert(e.text).second) return;
      slots.push_back(Slot{next_column++, SlotKind::Column, ph->type, ph->is_fk, ph->ordinal});
    } else if (e.kind == sql::ExprKind::ValueSlot) {
      slots.push_back(Slot{next_value++, SlotKind::Value, sql::slot_data_type(e.slot), false, 0});
    }
  });
  return slots;
}

namespace {

struct Scope {
  std::vector<std::pair<std::string, std::size_t>> tables;  // (alias or name, table index)
  std::vector<std::string> aliases;                         // select-list aliases
};

bool literal_fits(sql::LiteralKind literal, sql::SlotType column_slot) {
  using sql::SlotType;
  switch (literal) {
    case sql::LiteralKind::String: return column_slot == SlotType::Str || column_slot == SlotType::Time;
    case sql::LiteralKind::Number:
    case sql::LiteralKind::Bool: return column_slot == SlotType::Num || column_slot == SlotType::Bool;
    case sql::LiteralKind::Null: return false;
  }
  return false;
}

sql::SlotType literal_slot(sql::LiteralKind literal) {
  switch (literal) {
    case sql::LiteralKind::String: return sql::SlotType::Str;
    case sql::LiteralKind::Bool: return sql::SlotType::Bool;
    default: return sql::SlotType::Num;
  }
}

class Extractor {
 public:
  explicit Extractor(const DatabaseSchema& schema) : schema_(schema) {}

  void statement(sql::SelectStatement& stmt) {
    std::vector<Scope> core_scopes;
    for (const auto& core : stmt.cores) core_scopes.push_back(scope_for(core));
    for (std::size_t i = 0; i < stmt.cores.size(); ++i) {
      scopes_.push_back(core_scopes[i]);
      core(stmt.cores[i]);
      scopes_.pop_back();
    }
    if (!stmt.order_by.empty()) {
      // ORDER BY of a compound statement sees the last core's tables and any
      // core's output aliases
      Scope order_scope = core_scopes.back();
      for (const auto& s : core_scopes) order_scope.aliases.insert(order_scope.aliases.end(), s.aliases.begin(), s.aliases.end());
      scopes_.push_back(std::move(order_scope));
      for (auto& o : stmt.order_by) expr(o.expr);
      scopes_.pop_back();
    }
  }

 private:
  Scope scope_for(const sql::SelectCore& core) const {
    Scope scope;
    for (const auto& item : core.from) {
      if (item.subquery) throw Error(Errc::UnsupportedStatement, "derived tables in FROM are not supported");
      auto idx = schema_.table_index(item.table);
      if (!idx) throw Error(Errc::UnresolvedColumn, "unknown table '" + item.table + "'");
      if (!item.alias.empty()) scope.tables.emplace_back(item.alias, *idx);
      scope.tables.emplace_back(item.table, *idx);
    }
    for (const auto& item : core.items)
      if (!item.alias.empty()) scope.aliases.push_back(item.alias);
    return scope;
  }

  void core(sql::SelectCore& c) {
    for (auto& item : c.items) expr(item.expr);
    if (c.where) expr(*c.where);
    for (auto& g : c.group_by) expr(g);
    if (c.having) expr(*c.having);
    c.from.clear();
  }

  void expr(sql::Expr& e) {
    using sql::ExprKind;
    switch (e.kind) {
      case ExprKind::Column:
        column(e);
        return;
      case ExprKind::Star:
        e.qualifier.clear();
        return;
      case ExprKind::Literal:
        literal(e);
        return;
      case ExprKind::ValueSlot:
        return;
      default:
        break;
    }
    for (auto& arg : e.args) expr(arg);
    if (e.subquery) statement(*e.subquery);
  }

  std::optional<ColumnRef> lookup(std::size_t table_idx, std::string_view column) const {
    const TableDef& t = schema_.tables()[table_idx];
    if (const ColumnDef* c = t.find_column(column)) return ColumnRef{t.name, c->name};
    return std::nullopt;
  }

  std::optional<ColumnRef> resolve(const sql::Expr& e, bool& is_alias) const {
    is_alias = false;
    if (!e.qualifier.empty()) {
      for (auto s = scopes_.rbegin(); s != scopes_.rend(); ++s)
        for (const auto& [name, idx] : s->tables)
          if (iequals(name, e.qualifier)) {
            if (auto ref = lookup(idx, e.text)) return ref;
            throw Error(Errc::UnresolvedColumn, "no column '" + e.text + "' in " + schema_.tables()[idx].name);
          }
      throw Error(Errc::UnresolvedColumn, "unknown table or alias '" + e.qualifier + "'");
    }
    for (auto s = scopes_.rbegin(); s != scopes_.rend(); ++s)
      for (const auto& entry : s->tables)
        if (auto ref = lookup(entry.second, e.text)) return ref;
    if (!scopes_.empty())
      for (const auto& alias : scopes_.back().aliases)
        if (iequals(alias, e.text)) {
          is_alias = true;
          return std::nullopt;
        }
    return std::nullopt;
  }

  void column(sql::Expr& e) {
    bool is_alias = false;
    auto ref = resolve(e, is_alias);
    if (is_alias) return;
    if (!ref) {
      if (e.quoted && e.qualifier.empty()) {
        // SQLite reads an unresolvable "ident" as a string literal
        e.kind = sql::ExprKind::Literal;
        e.literal = sql::LiteralKind::String;
        e.quoted = false;
        literal(e);
        return;
      }
      throw Error(Errc::UnresolvedColumn, "cannot resolve column '" + e.text + "'");
    }
    const ColumnDef* def = schema_.table(ref->table).find_column(ref->column);
    bool fk = schema_.is_fk_column(ref->table, ref->column);
    auto it = names_.find(*ref);
    if (it == names_.end()) {
      int ordinal = ++counters_[{def->data_type, fk}];
      it = names_.emplace(*ref, sql::placeholder_name(def->data_type, fk, ordinal)).first;
    }
    e.text = it->second;
    e.qualifier.clear();
    e.quoted = false;
    last_type_ = def->data_type;
  }

  void literal(sql::Expr& e) {
    if (e.literal == sql::LiteralKind::Null) return;
    sql::SlotType slot = literal_slot(e.literal);
    if (last_type_) {
      sql::SlotType column_slot = sql::slot_type_for(*last_type_);
      if (literal_fits(e.literal, column_slot)) slot = column_slot;
    }
    e.kind = sql::ExprKind::ValueSlot;
    e.slot = slot;
    e.text.clear();
  }

  const DatabaseSchema& schema_;
  std::vector<Scope> scopes_;
  std::map<ColumnRef, std::string> names_;
  std::map<std::pair<DataType, bool>, int> counters_;
  std::optional<DataType> last_type_;
};

}  // namespace

SqlTemplate extract_template(std::string_view sql_text, const DatabaseSchema& schema) {
  sql::SelectStatement stmt = sql::parse_select(sql_text);
  Extractor(schema).statement(stmt);
  SqlTemplate t;
  t.skeleton = sql::print(stmt);
  t.slots = slots_from_skeleton(t.skeleton);
  t.source_count = 1;
  return t;
}

std::size_t TemplatePool::add(SqlTemplate tmpl) {
  total_count_ += tmpl.source_count;
  if (auto it = by_skeleton_.find(tmpl.skeleton); it != by_skeleton_.end()) {
    templates_[it->second].source_count += tmpl.source_count;
    return it->second;
  }
  std::size_t index = templates_.size();
  by_skeleton_.emplace(tmpl.skeleton, index);
  templates_.push_back(std::move(tmpl));
  return index;
}

std::optional<std::size_t> TemplatePool::find(const SqlTemplate& shape) const {
  auto it = by_skeleton_.find(shape.skeleton);
  if (it == by_skeleton_.end() || !templates_[it->second].same_shape(shape)) return std::nullopt;
  return it->second;
}

void TemplatePool::add_count(std::size_t index, std::size_t delta) {
  templates_.at(index).source_count += delta;
  total_count_ += delta;
}

bool operator==(const TemplatePool& a, const TemplatePool& b) {
  if (a.templates_.size() != b.templates_.size() || a.total_count_ != b.total_count_) return false;
  for (std::size_t i = 0; i < a.templates_.size(); ++i)
    if (!a.templates_[i].same_shape(b.templates_[i]) || a.templates_[i].source_count != b.templates_[i].source_count)
      return false;
  return true;
}

TemplatePool build_pool(std::span<const SynthSample> corpus, const std::map<std::string, DatabaseSchema>& schemas,
                        PoolReport* report) {
  TemplatePool pool;
  PoolReport local;
  local.items = corpus.size();
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    const SynthSample& item = corpus[i];
    auto it = schemas.find(item.db_id);
    if (it == schemas.end()) {
      local.failures.push_back({i, "no schema for database '" + item.db_id + "'"});
      continue;
    }
    try {
      pool.add(extract_template(item.sql, it->second));
      ++local.extracted;
    } catch (const Error& e) {
      local.failures.push_back({i, e.what()});
    }
  }
  if (report) *report = local;
  if (pool.empty())
    throw Error(Errc::AllItemsFailed, "none of the " + std::to_string(corpus.size()) + " corpus items yielded a template");
  return pool;
}

std::size_t sample_template_index(const TemplatePool& pool, Rng& rng) {
  if (pool.empty() || pool.total_count() == 0) throw Error(Errc::EmptyPool, "template pool is empty");
  std::vector<double> weights;
  weights.reserve(pool.size());
  for (const auto& t : pool.templates()) weights.push_back(static_cast<double>(t.source_count));
  return rng.weighted_index(weights);
}

const SqlTemplate& sample_template(const TemplatePool& pool, Rng& rng) {
  return pool.at(sample_template_index(pool, rng));
}

nlohmann::ordered_json pool_to_json(const TemplatePool& pool) {
  nlohmann::ordered_json templates = nlohmann::ordered_json::array();
  for (const auto& t : pool.templates()) {
    nlohmann::ordered_json slots = nlohmann::ordered_json::array();
    for (const auto& s : t.slots) {
      nlohmann::ordered_json slot;
      slot["kind"] = to_string(s.kind);
      slot["type"] = to_string(s.data_type);
      slot["fk"] = s.is_fk;
      slots.push_back(std::move(slot));
    }
    nlohmann::ordered_json entry;
    entry["skeleton"] = t.skeleton;
    entry["slots"] = std::move(slots);
    entry["count"] = t.source_count;
    templates.push_back(std::move(entry));
  }
  nlohmann::ordered_json doc;
  doc["templates"] = std::move(templates);
  return doc;
}

TemplatePool pool_from_json(const nlohmann::ordered_json& doc) {
  if (!doc.is_object() || !doc.contains("templates") || !doc["templates"].is_array())
    throw Error(Errc::FormatError, "template pool must be an object with a \"templates\" array");
  TemplatePool pool;
  std::size_t index = 0;
  for (const auto& entry : doc["templates"]) {
    std::string where = "template " + std::to_string(index++);
    if (!entry.is_object() || !entry.contains("skeleton") || !entry["skeleton"].is_string() ||
        !entry.contains("slots") || !entry["slots"].is_array() || !entry.contains("count") ||
        !entry["count"].is_number_unsigned())
      throw Error(Errc::FormatError, where + ": expected skeleton, slots and a nonnegative count");
    SqlTemplate t;
    t.skeleton = entry["skeleton"].get<std::string>();
    t.source_count = entry["count"].get<std::size_t>();
    try {
      sql::SelectStatement stmt = sql::parse_select(t.skeleton);
      for (const auto& core : stmt.cores)
        if (!core.from.empty()) throw Error(Errc::FormatError, "skeleton has a FROM clause");
      t.slots = slots_from_skeleton(t.skeleton);
    } catch (const Error& e) {
      throw Error(Errc::FormatError, where + ": " + e.what());
    }
    const auto& slots = entry["slots"];
    bool matches = slots.size() == t.slots.size();
    for (std::size_t i = 0; matches && i < slots.size(); ++i) {
      const auto& s = slots[i];
      matches = s.is_object() && s.value("kind", "") == to_string(t.slots[i].kind) &&
                s.value("type", "") == to_string(t.slots[i].data_type) && s.value("fk", false) == t.slots[i].is_fk;
    }
    if (!matches) throw Error(Errc::FormatError, where + ": slot list does not match the skeleton");
    if (pool.find(t)) throw Error(Errc::FormatError, where + ": duplicate skeleton");
    pool.add(std::move(t));
  }
  return pool;
}

}  // namespace spft
