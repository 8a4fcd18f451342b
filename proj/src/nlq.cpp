// Rule-based SQL -> English renderer standing in for a learned SQL-to-text model.

#include <cctype>

#include "spft/error.hpp"
#include "spft/synthesizer.hpp"

namespace spft {

namespace {

std::string words(std::string_view name) {
  std::string out(name);
  for (char& c : out)
    if (c == '_') c = ' ';
  return out;
}

std::string join_list(const std::vector<std::string>& parts) {
  std::string out;
  for (std::size_t i = 0; i < parts.size(); ++i) {
    if (i > 0) out += i + 1 == parts.size() ? " and " : ", ";
    out += parts[i];
  }
  return out;
}

std::string lower_first(std::string s) {
  if (!s.empty()) s[0] = static_cast<char>(std::tolower(static_cast<unsigned char>(s[0])));
  return s;
}

std::string upper_first(std::string s) {
  if (!s.empty()) s[0] = static_cast<char>(std::toupper(static_cast<unsigned char>(s[0])));
  return s;
}

std::string comparison_phrase(const std::string& op) {
  if (op == "=" || op == "==") return "equal to";
  if (op == ">") return "greater than";
  if (op == "<") return "less than";
  if (op == ">=") return "at least";
  if (op == "<=") return "at most";
  if (op == "!=" || op == "<>") return "not equal to";
  if (op == "LIKE") return "like";
  if (op == "NOT LIKE") return "not like";
  if (op == "GLOB") return "matching";
  if (op == "NOT GLOB") return "not matching";
  return {};
}

class Renderer {
 public:
  explicit Renderer(const DatabaseSchema& schema) : schema_(schema) {}

  std::string statement(const sql::SelectStatement& stmt) {
    std::string out;
    for (std::size_t i = 0; i < stmt.cores.size(); ++i) {
      std::string phrase = core(stmt.cores[i], i + 1 == stmt.cores.size() ? &stmt : nullptr);
      if (i == 0) {
        out = phrase;
      } else {
        out += ", " + to_lower(stmt.set_ops[i - 1]) + " " + lower_first(phrase);
      }
    }
    return out;
  }

 private:
  struct Frame {
    std::vector<std::pair<std::string, std::string>> aliases;  // alias -> table
    bool multi_table = false;
  };

  std::string core(const sql::SelectCore& c, const sql::SelectStatement* tail) {
    Frame frame;
    std::vector<std::string> tables;
    for (const auto& item : c.from) {
      std::string name = item.subquery ? "a derived table" : words(item.table);
      if (!item.subquery) {
        frame.aliases.emplace_back(item.alias.empty() ? item.table : item.alias, item.table);
        frame.aliases.emplace_back(item.table, item.table);
      }
      if (std::find(tables.begin(), tables.end(), name) == tables.end()) tables.push_back(name);
    }
    frame.multi_table = tables.size() > 1;
    frames_.push_back(frame);

    std::string table_phrase = tables.empty() ? "the database" : join_list(tables);
    std::string out;
    const bool count_only = c.items.size() == 1 && c.items[0].expr.kind == sql::ExprKind::Function &&
                            c.items[0].expr.text == "count" && c.items[0].expr.star_arg;
    if (count_only) {
      out = "How many " + table_phrase + " are there";
    } else {
      std::vector<std::string> items;
      for (const auto& item : c.items) items.push_back(value(item.expr));
      out = "List the " + std::string(c.distinct ? "distinct " : "") + join_list(items) + " of " + table_phrase;
    }
    if (c.where) out += " where " + condition(*c.where);
    if (!c.group_by.empty()) {
      std::vector<std::string> groups;
      for (const auto& g : c.group_by) groups.push_back(value(g));
      out += " for each " + join_list(groups);
    }
    if (c.having) out += " having " + condition(*c.having);
    if (tail) out += ordering(*tail);
    frames_.pop_back();
    return out;
  }

  std::string ordering(const sql::SelectStatement& stmt) {
    std::string out;
    std::vector<std::string> keys;
    for (const auto& o : stmt.order_by) {
      std::string key = value(o.expr);
      if (stmt.limit) {
        if (o.direction == "ASC") key += " ascending";
      } else if (o.direction == "DESC") {
        key += " in descending order";
      } else if (o.direction == "ASC") {
        key += " in ascending order";
      }
      keys.push_back(std::move(key));
    }
    if (!keys.empty() && stmt.limit)
      out += " and give the top " + value(*stmt.limit) + " by " + join_list(keys);
    else if (!keys.empty())
      out += " sorted by " + join_list(keys);
    else if (stmt.limit)
      out += " and give only the first " + value(*stmt.limit);
    if (stmt.offset) out += " skipping the first " + value(*stmt.offset);
    return out;
  }

  std::string column(const sql::Expr& e) {
    std::string name = words(e.text);
    if (frames_.empty() || !frames_.back().multi_table) return name;
    std::string table = e.qualifier;
    for (const auto& [alias, real] : frames_.back().aliases)
      if (!e.qualifier.empty() && iequals(alias, e.qualifier)) table = real;
    return table.empty() ? name : words(table) + " " + name;
  }

  std::string subquery(const sql::SelectStatement& stmt) { return "(" + lower_first(statement(stmt)) + ")"; }

  std::string value(const sql::Expr& e) {
    using sql::ExprKind;
    switch (e.kind) {
      case ExprKind::Column:
        return column(e);
      case ExprKind::Star:
        return "details";
      case ExprKind::Literal:
        if (e.literal == sql::LiteralKind::Null || e.literal == sql::LiteralKind::Bool) return to_lower(e.text);
        return e.text;
      case ExprKind::ValueSlot:
        return std::string(sql::slot_token(e.slot));
      case ExprKind::Function: {
        std::string arg;
        if (e.star_arg) {
          arg = "rows";
        } else {
          std::vector<std::string> args;
          for (const auto& a : e.args) args.push_back(value(a));
          arg = (e.distinct ? "distinct " : "") + join_list(args);
        }
        if (e.text == "count") return "number of " + arg;
        if (e.text == "sum") return "total " + arg;
        if (e.text == "avg") return "average " + arg;
        if (e.text == "min") return "minimum " + arg;
        if (e.text == "max") return "maximum " + arg;
        return words(e.text) + " of " + arg;
      }
      case ExprKind::Paren:
        return value(e.args[0]);
      case ExprKind::Subquery:
        return "the result of " + subquery(*e.subquery);
      case ExprKind::Unary:
        if (e.text == "NOT") return condition(e);
        return e.text + value(e.args[0]);
      case ExprKind::Binary:
        if (comparison_phrase(e.text).empty() && e.text != "AND" && e.text != "OR" && e.text != "IS" &&
            e.text != "IS NOT")
          return value(e.args[0]) + " " + e.text + " " + value(e.args[1]);
        return condition(e);
      case ExprKind::Between:
      case ExprKind::InList:
      case ExprKind::InSubquery:
      case ExprKind::Exists:
        return condition(e);
      case ExprKind::Case:
      case ExprKind::Cast:
        return sql::print(e);
    }
    return sql::print(e);
  }

  std::string condition(const sql::Expr& e) {
    using sql::ExprKind;
    switch (e.kind) {
      case ExprKind::Binary: {
        if (e.text == "AND" || e.text == "OR")
          return condition(e.args[0]) + " " + to_lower(e.text) + " " + condition(e.args[1]);
        if (e.text == "IS" || e.text == "IS NOT")
          return value(e.args[0]) + " " + to_lower(e.text) + " " + value(e.args[1]);
        std::string phrase = comparison_phrase(e.text);
        if (phrase.empty()) return value(e);
        return value(e.args[0]) + " is " + phrase + " " + value(e.args[1]);
      }
      case ExprKind::Unary:
        if (e.text == "NOT") return "not " + condition(e.args[0]);
        return value(e);
      case ExprKind::Paren:
        return condition(e.args[0]);
      case ExprKind::Between:
        return value(e.args[0]) + (e.negated ? " is not between " : " is between ") + value(e.args[1]) + " and " +
               value(e.args[2]);
      case ExprKind::InList: {
        std::vector<std::string> items;
        for (std::size_t i = 1; i < e.args.size(); ++i) items.push_back(value(e.args[i]));
        return value(e.args[0]) + (e.negated ? " is not one of " : " is one of ") + join_list(items);
      }
      case ExprKind::InSubquery:
        return value(e.args[0]) + (e.negated ? " is not in " : " is in ") + subquery(*e.subquery);
      case ExprKind::Exists:
        return std::string(e.negated ? "there is no " : "there is some ") + subquery(*e.subquery);
      default:
        return value(e);
    }
  }

  const DatabaseSchema& schema_;
  std::vector<Frame> frames_;
};

}  // namespace

std::string render_nlq(std::string_view sql_text, const DatabaseSchema& schema) {
  sql::SelectStatement stmt;
  try {
    stmt = sql::parse_select(sql_text);
  } catch (const Error& e) {
    if (e.code() == Errc::UnsupportedStatement) throw Error(Errc::ParseError, e.what());
    throw;
  }
  return upper_first(Renderer(schema).statement(stmt)) + ".";
}

}  // namespace spft
