#include "spft/sql.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <charconv>

#include "spft/error.hpp"

namespace spft::sql {
namespace {

constexpr std::array<std::string_view, 46> kKeywords = {
    "ALL",    "AND",     "AS",     "ASC",       "BETWEEN", "BY",     "CASE",  "CAST",   "CROSS",
    "DESC",   "DISTINCT", "ELSE",  "END",       "EXCEPT",  "EXISTS", "FALSE", "FROM",   "FULL",
    "GLOB",   "GROUP",   "HAVING", "IN",        "INNER",   "INTERSECT", "IS", "JOIN",   "LEFT",
    "LIKE",   "LIMIT",   "NATURAL", "NOT",      "NULL",    "OFFSET", "ON",    "OR",     "ORDER",
    "OUTER",  "RIGHT",   "SELECT", "THEN",      "TRUE",    "UNION",  "USING", "WHEN",   "WHERE",
    "WITH"};

bool is_ident_start(char c) { return std::isalpha(static_cast<unsigned char>(c)) || c == '_'; }
bool is_ident_char(char c) { return std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '$'; }

std::string upper(std::string_view s) {
  std::string out(s);
  for (auto& c : out) c = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
  return out;
}

[[noreturn]] void fail(const std::string& message) { throw Error(Errc::ParseError, message); }

class Parser {
 public:
  explicit Parser(std::vector<Token> tokens) : toks_(std::move(tokens)) {}

  SelectStatement statement() {
    if (!peek_word("SELECT")) {
      if (peek().kind == TokenKind::Word)
        throw Error(Errc::UnsupportedStatement, "expected SELECT, found " + peek().text);
      fail("expected SELECT at offset " + std::to_string(peek().offset));
    }
    SelectStatement stmt = select_statement();
    while (peek_symbol(";")) ++pos_;
    if (peek().kind != TokenKind::End) fail("unexpected trailing input '" + peek().text + "'");
    return stmt;
  }

 private:
  const Token& peek(std::size_t ahead = 0) const {
    std::size_t i = std::min(pos_ + ahead, toks_.size() - 1);
    return toks_[i];
  }
  bool peek_word(std::string_view kw, std::size_t ahead = 0) const {
    const Token& t = peek(ahead);
    return t.kind == TokenKind::Word && iequals(t.text, kw);
  }
  bool peek_symbol(std::string_view sym, std::size_t ahead = 0) const {
    const Token& t = peek(ahead);
    return t.kind == TokenKind::Symbol && t.text == sym;
  }
  bool accept_word(std::string_view kw) {
    if (!peek_word(kw)) return false;
    ++pos_;
    return true;
  }
  bool accept_symbol(std::string_view sym) {
    if (!peek_symbol(sym)) return false;
    ++pos_;
    return true;
  }
  void expect_word(std::string_view kw) {
    if (!accept_word(kw)) fail("expected " + std::string(kw) + " near '" + peek().text + "'");
  }
  void expect_symbol(std::string_view sym) {
    if (!accept_symbol(sym)) fail("expected '" + std::string(sym) + "' near '" + peek().text + "'");
  }
  bool peek_plain_identifier() const {
    const Token& t = peek();
    return t.kind == TokenKind::QuotedIdent || (t.kind == TokenKind::Word && !is_keyword(t.text));
  }
  std::string identifier() {
    if (!peek_plain_identifier()) fail("expected identifier near '" + peek().text + "'");
    return toks_[pos_++].text;
  }

  SelectStatement select_statement() {
    SelectStatement stmt;
    stmt.cores.push_back(select_core());
    for (;;) {
      std::string op;
      if (accept_word("UNION")) {
        op = accept_word("ALL") ? "UNION ALL" : "UNION";
      } else if (accept_word("INTERSECT")) {
        op = "INTERSECT";
      } else if (accept_word("EXCEPT")) {
        op = "EXCEPT";
      } else {
        break;
      }
      stmt.set_ops.push_back(op);
      stmt.cores.push_back(select_core());
    }
    if (accept_word("ORDER")) {
      expect_word("BY");
      do {
        OrderItem item;
        item.expr = expr();
        if (accept_word("ASC")) item.direction = "ASC";
        else if (accept_word("DESC")) item.direction = "DESC";
        stmt.order_by.push_back(std::move(item));
      } while (accept_symbol(","));
    }
    if (accept_word("LIMIT")) {
      stmt.limit = expr();
      if (accept_word("OFFSET")) {
        stmt.offset = expr();
      } else if (accept_symbol(",")) {
        // LIMIT offset, count
        stmt.offset = std::move(stmt.limit);
        stmt.limit = expr();
      }
    }
    return stmt;
  }

  SelectCore select_core() {
    expect_word("SELECT");
    SelectCore core;
    if (accept_word("DISTINCT")) core.distinct = true;
    else accept_word("ALL");
    do {
      SelectItem item;
      item.expr = expr();
      if (accept_word("AS")) {
        item.alias = identifier_or_string();
      } else if (peek_plain_identifier()) {
        item.alias = identifier();
      }
      core.items.push_back(std::move(item));
    } while (accept_symbol(","));

    if (accept_word("FROM")) from_clause(core);
    if (accept_word("WHERE")) core.where = expr();
    if (accept_word("GROUP")) {
      expect_word("BY");
      do core.group_by.push_back(expr());
      while (accept_symbol(","));
    }
    if (accept_word("HAVING")) core.having = expr();
    return core;
  }

  std::string identifier_or_string() {
    if (peek().kind == TokenKind::String) return toks_[pos_++].text;
    return identifier();
  }

  void from_clause(SelectCore& core) {
    core.from.push_back(from_item(""));
    for (;;) {
      std::string join;
      if (accept_symbol(",")) {
        join = ",";
      } else {
        std::string prefix;
        if (accept_word("NATURAL")) prefix = "NATURAL ";
        if (accept_word("LEFT")) {
          prefix += accept_word("OUTER") ? "LEFT OUTER " : "LEFT ";
        } else if (accept_word("RIGHT")) {
          prefix += accept_word("OUTER") ? "RIGHT OUTER " : "RIGHT ";
        } else if (accept_word("FULL")) {
          prefix += accept_word("OUTER") ? "FULL OUTER " : "FULL ";
        } else if (accept_word("INNER")) {
          prefix += "INNER ";
        } else if (accept_word("CROSS")) {
          prefix += "CROSS ";
        }
        if (!accept_word("JOIN")) {
          if (!prefix.empty()) fail("expected JOIN near '" + peek().text + "'");
          break;
        }
        join = prefix + "JOIN";
      }
      FromItem item = from_item(join);
      if (accept_word("ON")) item.on = expr();
      else if (peek_word("USING")) fail("JOIN ... USING is not supported");
      core.from.push_back(std::move(item));
    }
  }

  FromItem from_item(std::string join) {
    FromItem item;
    item.join = std::move(join);
    if (accept_symbol("(")) {
      if (!peek_word("SELECT")) fail("expected subquery in FROM");
      item.subquery = Box<SelectStatement>(select_statement());
      expect_symbol(")");
    } else {
      item.table = identifier();
    }
    if (accept_word("AS")) item.alias = identifier();
    else if (peek_plain_identifier()) item.alias = identifier();
    return item;
  }

  // Precedence, loosest first: OR, AND, NOT, equality-class (= != IS IN LIKE
  // BETWEEN), relational, additive, multiplicative, concatenation, unary.
  Expr expr() { return or_expr(); }

  static Expr binary(std::string op, Expr lhs, Expr rhs) {
    Expr e;
    e.kind = ExprKind::Binary;
    e.text = std::move(op);
    e.args.push_back(std::move(lhs));
    e.args.push_back(std::move(rhs));
    return e;
  }

  Expr or_expr() {
    Expr lhs = and_expr();
    while (accept_word("OR")) lhs = binary("OR", std::move(lhs), and_expr());
    return lhs;
  }

  Expr and_expr() {
    Expr lhs = not_expr();
    while (accept_word("AND")) lhs = binary("AND", std::move(lhs), not_expr());
    return lhs;
  }

  Expr not_expr() {
    if (peek_word("NOT") && !peek_word("EXISTS", 1)) {
      ++pos_;
      Expr e;
      e.kind = ExprKind::Unary;
      e.text = "NOT";
      e.args.push_back(not_expr());
      return e;
    }
    return equality_expr();
  }

  Expr equality_expr() {
    Expr lhs = relational_expr();
    for (;;) {
      if (peek_symbol("=") || peek_symbol("==") || peek_symbol("!=") || peek_symbol("<>")) {
        std::string op = toks_[pos_++].text;
        if (op == "==") op = "=";
        lhs = binary(op, std::move(lhs), relational_expr());
        continue;
      }
      if (peek_word("IS")) {
        ++pos_;
        std::string op = accept_word("NOT") ? "IS NOT" : "IS";
        lhs = binary(op, std::move(lhs), relational_expr());
        continue;
      }
      bool negated = false;
      std::size_t save = pos_;
      if (accept_word("NOT")) negated = true;
      if (peek_word("LIKE") || peek_word("GLOB")) {
        std::string op = upper(toks_[pos_++].text);
        if (negated) op = "NOT " + op;
        lhs = binary(op, std::move(lhs), relational_expr());
        continue;
      }
      if (accept_word("BETWEEN")) {
        Expr e;
        e.kind = ExprKind::Between;
        e.negated = negated;
        e.args.push_back(std::move(lhs));
        e.args.push_back(relational_expr());
        expect_word("AND");
        e.args.push_back(relational_expr());
        lhs = std::move(e);
        continue;
      }
      if (accept_word("IN")) {
        expect_symbol("(");
        Expr e;
        e.negated = negated;
        e.args.push_back(std::move(lhs));
        if (peek_word("SELECT")) {
          e.kind = ExprKind::InSubquery;
          e.subquery = Box<SelectStatement>(select_statement());
        } else {
          e.kind = ExprKind::InList;
          if (!peek_symbol(")")) {
            do e.args.push_back(expr());
            while (accept_symbol(","));
          }
        }
        expect_symbol(")");
        lhs = std::move(e);
        continue;
      }
      pos_ = save;
      break;
    }
    return lhs;
  }

  Expr relational_expr() {
    Expr lhs = additive_expr();
    while (peek_symbol("<") || peek_symbol("<=") || peek_symbol(">") || peek_symbol(">=")) {
      std::string op = toks_[pos_++].text;
      lhs = binary(op, std::move(lhs), additive_expr());
    }
    return lhs;
  }

  Expr additive_expr() {
    Expr lhs = multiplicative_expr();
    while (peek_symbol("+") || peek_symbol("-")) {
      std::string op = toks_[pos_++].text;
      lhs = binary(op, std::move(lhs), multiplicative_expr());
    }
    return lhs;
  }

  Expr multiplicative_expr() {
    Expr lhs = concat_expr();
    while (peek_symbol("*") || peek_symbol("/") || peek_symbol("%")) {
      std::string op = toks_[pos_++].text;
      lhs = binary(op, std::move(lhs), concat_expr());
    }
    return lhs;
  }

  Expr concat_expr() {
    Expr lhs = unary_expr();
    while (accept_symbol("||")) lhs = binary("||", std::move(lhs), unary_expr());
    return lhs;
  }

  Expr unary_expr() {
    if (peek_symbol("-") || peek_symbol("+")) {
      std::string op = toks_[pos_++].text;
      Expr operand = unary_expr();
      // fold signs into numeric literals so "-5" stays one value
      if (operand.kind == ExprKind::Literal && operand.literal == LiteralKind::Number) {
        if (op == "-") {
          if (!operand.text.empty() && operand.text[0] == '-') operand.text.erase(0, 1);
          else operand.text = "-" + operand.text;
        }
        return operand;
      }
      Expr e;
      e.kind = ExprKind::Unary;
      e.text = op;
      e.args.push_back(std::move(operand));
      return e;
    }
    return primary();
  }

  Expr primary() {
    const Token& t = peek();
    Expr e;
    switch (t.kind) {
      case TokenKind::Number:
        e.kind = ExprKind::Literal;
        e.literal = LiteralKind::Number;
        e.text = t.text;
        ++pos_;
        return e;
      case TokenKind::String:
        e.kind = ExprKind::Literal;
        e.literal = LiteralKind::String;
        e.text = t.text;
        ++pos_;
        return e;
      case TokenKind::ValueSlot:
        e.kind = ExprKind::ValueSlot;
        if (t.text == "NUM") e.slot = SlotType::Num;
        else if (t.text == "STR") e.slot = SlotType::Str;
        else if (t.text == "TIME") e.slot = SlotType::Time;
        else e.slot = SlotType::Bool;
        ++pos_;
        return e;
      case TokenKind::Symbol:
        if (t.text == "*") {
          ++pos_;
          e.kind = ExprKind::Star;
          return e;
        }
        if (t.text == "(") {
          ++pos_;
          if (peek_word("SELECT")) {
            e.kind = ExprKind::Subquery;
            e.subquery = Box<SelectStatement>(select_statement());
          } else {
            e.kind = ExprKind::Paren;
            e.args.push_back(expr());
          }
          expect_symbol(")");
          return e;
        }
        fail("unexpected symbol '" + t.text + "'");
      case TokenKind::QuotedIdent:
        return column_or_call();
      case TokenKind::Word:
        break;
      case TokenKind::End:
        fail("unexpected end of input");
    }

    std::string kw = upper(t.text);
    if (kw == "NULL" || kw == "TRUE" || kw == "FALSE") {
      ++pos_;
      e.kind = ExprKind::Literal;
      e.literal = kw == "NULL" ? LiteralKind::Null : LiteralKind::Bool;
      e.text = kw;
      return e;
    }
    if (kw == "EXISTS" || (kw == "NOT" && peek_word("EXISTS", 1))) {
      if (kw == "NOT") {
        e.negated = true;
        ++pos_;
      }
      ++pos_;
      expect_symbol("(");
      e.kind = ExprKind::Exists;
      e.subquery = Box<SelectStatement>(select_statement());
      expect_symbol(")");
      return e;
    }
    if (kw == "CASE") {
      ++pos_;
      e.kind = ExprKind::Case;
      if (!peek_word("WHEN")) {
        e.has_operand = true;
        e.args.push_back(expr());
      }
      while (accept_word("WHEN")) {
        e.args.push_back(expr());
        expect_word("THEN");
        e.args.push_back(expr());
      }
      if (accept_word("ELSE")) {
        e.has_else = true;
        e.args.push_back(expr());
      }
      expect_word("END");
      return e;
    }
    if (kw == "CAST") {
      ++pos_;
      expect_symbol("(");
      e.kind = ExprKind::Cast;
      e.args.push_back(expr());
      expect_word("AS");
      std::string type;
      while (peek().kind == TokenKind::Word && !peek_symbol(")")) {
        if (!type.empty()) type += ' ';
        type += upper(toks_[pos_++].text);
      }
      if (accept_symbol("(")) {
        type += "(";
        while (!peek_symbol(")") && peek().kind != TokenKind::End) type += toks_[pos_++].text;
        expect_symbol(")");
        type += ")";
      }
      e.text = type;
      expect_symbol(")");
      return e;
    }
    if (is_keyword(t.text)) fail("unexpected keyword " + kw);
    return column_or_call();
  }

  Expr column_or_call() {
    Token first = toks_[pos_++];
    Expr e;
    if (first.kind == TokenKind::Word && peek_symbol("(")) {
      ++pos_;
      e.kind = ExprKind::Function;
      e.text = to_lower(first.text);
      if (accept_symbol("*")) {
        e.star_arg = true;
      } else if (!peek_symbol(")")) {
        if (accept_word("DISTINCT")) e.distinct = true;
        do e.args.push_back(expr());
        while (accept_symbol(","));
      }
      expect_symbol(")");
      return e;
    }
    if (accept_symbol(".")) {
      if (accept_symbol("*")) {
        e.kind = ExprKind::Star;
        e.qualifier = first.text;
        return e;
      }
      e.kind = ExprKind::Column;
      e.qualifier = first.text;
      e.quoted = peek().kind == TokenKind::QuotedIdent;
      e.text = identifier();
      return e;
    }
    e.kind = ExprKind::Column;
    e.text = first.text;
    e.quoted = first.kind == TokenKind::QuotedIdent;
    return e;
  }

  std::vector<Token> toks_;
  std::size_t pos_ = 0;
};

// ---------------------------------------------------------------------------
// printer

void print_statement(const SelectStatement& stmt, std::string& out);

void print_expr(const Expr& e, std::string& out) {
  switch (e.kind) {
    case ExprKind::Column:
      if (!e.qualifier.empty()) {
        out += print_identifier(e.qualifier);
        out += '.';
      }
      out += print_identifier(e.text);
      return;
    case ExprKind::Star:
      if (!e.qualifier.empty()) {
        out += print_identifier(e.qualifier);
        out += '.';
      }
      out += '*';
      return;
    case ExprKind::Literal:
      if (e.literal == LiteralKind::String) out += quote_string(e.text);
      else out += e.text;
      return;
    case ExprKind::ValueSlot:
      out += slot_token(e.slot);
      return;
    case ExprKind::Unary:
      out += e.text;
      if (e.text == "NOT") out += ' ';
      print_expr(e.args[0], out);
      return;
    case ExprKind::Binary:
      print_expr(e.args[0], out);
      out += ' ';
      out += e.text;
      out += ' ';
      print_expr(e.args[1], out);
      return;
    case ExprKind::Between:
      print_expr(e.args[0], out);
      out += e.negated ? " NOT BETWEEN " : " BETWEEN ";
      print_expr(e.args[1], out);
      out += " AND ";
      print_expr(e.args[2], out);
      return;
    case ExprKind::InList:
      print_expr(e.args[0], out);
      out += e.negated ? " NOT IN (" : " IN (";
      for (std::size_t i = 1; i < e.args.size(); ++i) {
        if (i > 1) out += ", ";
        print_expr(e.args[i], out);
      }
      out += ')';
      return;
    case ExprKind::InSubquery:
      print_expr(e.args[0], out);
      out += e.negated ? " NOT IN (" : " IN (";
      print_statement(*e.subquery, out);
      out += ')';
      return;
    case ExprKind::Exists:
      out += e.negated ? "NOT EXISTS (" : "EXISTS (";
      print_statement(*e.subquery, out);
      out += ')';
      return;
    case ExprKind::Function:
      out += e.text;
      out += '(';
      if (e.star_arg) {
        out += '*';
      } else {
        if (e.distinct) out += "DISTINCT ";
        for (std::size_t i = 0; i < e.args.size(); ++i) {
          if (i) out += ", ";
          print_expr(e.args[i], out);
        }
      }
      out += ')';
      return;
    case ExprKind::Subquery:
      out += '(';
      print_statement(*e.subquery, out);
      out += ')';
      return;
    case ExprKind::Paren:
      out += '(';
      print_expr(e.args[0], out);
      out += ')';
      return;
    case ExprKind::Case: {
      out += "CASE";
      std::size_t i = 0;
      if (e.has_operand) {
        out += ' ';
        print_expr(e.args[i++], out);
      }
      std::size_t end = e.args.size() - (e.has_else ? 1 : 0);
      for (; i + 1 < end; i += 2) {
        out += " WHEN ";
        print_expr(e.args[i], out);
        out += " THEN ";
        print_expr(e.args[i + 1], out);
      }
      if (e.has_else) {
        out += " ELSE ";
        print_expr(e.args.back(), out);
      }
      out += " END";
      return;
    }
    case ExprKind::Cast:
      out += "CAST(";
      print_expr(e.args[0], out);
      out += " AS ";
      out += e.text;
      out += ')';
      return;
  }
}

void print_core(const SelectCore& core, std::string& out) {
  out += core.distinct ? "SELECT DISTINCT " : "SELECT ";
  for (std::size_t i = 0; i < core.items.size(); ++i) {
    if (i) out += ", ";
    print_expr(core.items[i].expr, out);
    if (!core.items[i].alias.empty()) {
      out += " AS ";
      out += print_identifier(core.items[i].alias);
    }
  }
  if (!core.from.empty()) {
    out += " FROM";
    for (const FromItem& item : core.from) {
      if (item.join == ",") {
        out += ',';
      } else if (!item.join.empty()) {
        out += ' ';
        out += item.join;
      }
      out += ' ';
      if (item.subquery) {
        out += '(';
        print_statement(*item.subquery, out);
        out += ')';
      } else {
        out += print_identifier(item.table);
      }
      if (!item.alias.empty()) {
        out += " AS ";
        out += print_identifier(item.alias);
      }
      if (item.on) {
        out += " ON ";
        print_expr(*item.on, out);
      }
    }
  }
  if (core.where) {
    out += " WHERE ";
    print_expr(*core.where, out);
  }
  if (!core.group_by.empty()) {
    out += " GROUP BY ";
    for (std::size_t i = 0; i < core.group_by.size(); ++i) {
      if (i) out += ", ";
      print_expr(core.group_by[i], out);
    }
  }
  if (core.having) {
    out += " HAVING ";
    print_expr(*core.having, out);
  }
}

void print_statement(const SelectStatement& stmt, std::string& out) {
  for (std::size_t i = 0; i < stmt.cores.size(); ++i) {
    if (i) {
      out += ' ';
      out += stmt.set_ops[i - 1];
      out += ' ';
    }
    print_core(stmt.cores[i], out);
  }
  if (!stmt.order_by.empty()) {
    out += " ORDER BY ";
    for (std::size_t i = 0; i < stmt.order_by.size(); ++i) {
      if (i) out += ", ";
      print_expr(stmt.order_by[i].expr, out);
      if (!stmt.order_by[i].direction.empty()) {
        out += ' ';
        out += stmt.order_by[i].direction;
      }
    }
  }
  if (stmt.limit) {
    out += " LIMIT ";
    print_expr(*stmt.limit, out);
  }
  if (stmt.offset) {
    out += " OFFSET ";
    print_expr(*stmt.offset, out);
  }
}

}  // namespace

bool is_keyword(std::string_view word) {
  std::string up = upper(word);
  return std::find(kKeywords.begin(), kKeywords.end(), up) != kKeywords.end();
}

std::vector<Token> tokenize(std::string_view sql) {
  std::vector<Token> out;
  std::size_t i = 0;
  const std::size_t n = sql.size();
  while (i < n) {
    char c = sql[i];
    if (std::isspace(static_cast<unsigned char>(c))) {
      ++i;
      continue;
    }
    if (c == '-' && i + 1 < n && sql[i + 1] == '-') {
      while (i < n && sql[i] != '\n') ++i;
      continue;
    }
    if (c == '/' && i + 1 < n && sql[i + 1] == '*') {
      std::size_t end = sql.find("*/", i + 2);
      if (end == std::string_view::npos) fail("unterminated comment");
      i = end + 2;
      continue;
    }
    Token tok;
    tok.offset = i;
    if (is_ident_start(c)) {
      std::size_t j = i;
      while (j < n && is_ident_char(sql[j])) ++j;
      tok.kind = TokenKind::Word;
      tok.text = std::string(sql.substr(i, j - i));
      i = j;
    } else if (std::isdigit(static_cast<unsigned char>(c)) ||
               (c == '.' && i + 1 < n && std::isdigit(static_cast<unsigned char>(sql[i + 1])))) {
      std::size_t j = i;
      while (j < n && std::isdigit(static_cast<unsigned char>(sql[j]))) ++j;
      if (j < n && sql[j] == '.') {
        ++j;
        while (j < n && std::isdigit(static_cast<unsigned char>(sql[j]))) ++j;
      }
      if (j < n && (sql[j] == 'e' || sql[j] == 'E')) {
        std::size_t k = j + 1;
        if (k < n && (sql[k] == '+' || sql[k] == '-')) ++k;
        if (k < n && std::isdigit(static_cast<unsigned char>(sql[k]))) {
          while (k < n && std::isdigit(static_cast<unsigned char>(sql[k]))) ++k;
          j = k;
        }
      }
      if (j < n && is_ident_start(sql[j])) fail("malformed number at offset " + std::to_string(i));
      tok.kind = TokenKind::Number;
      tok.text = std::string(sql.substr(i, j - i));
      i = j;
    } else if (c == '\'' || c == '"' || c == '`') {
      char quote = c;
      std::string text;
      std::size_t j = i + 1;
      for (;;) {
        if (j >= n) fail("unterminated quoted text at offset " + std::to_string(i));
        if (sql[j] == quote) {
          if (j + 1 < n && sql[j + 1] == quote) {
            text += quote;
            j += 2;
            continue;
          }
          ++j;
          break;
        }
        text += sql[j++];
      }
      tok.kind = quote == '\'' ? TokenKind::String : TokenKind::QuotedIdent;
      tok.text = std::move(text);
      i = j;
    } else if (c == '[') {
      std::size_t end = sql.find(']', i);
      if (end == std::string_view::npos) fail("unterminated [ at offset " + std::to_string(i));
      std::string inner(sql.substr(i + 1, end - i - 1));
      tok.kind = (inner == "NUM" || inner == "STR" || inner == "TIME" || inner == "BOOL")
                     ? TokenKind::ValueSlot
                     : TokenKind::QuotedIdent;
      tok.text = std::move(inner);
      i = end + 1;
    } else {
      static constexpr std::array<std::string_view, 6> two = {"<=", ">=", "<>", "!=", "==", "||"};
      tok.kind = TokenKind::Symbol;
      std::string_view rest = sql.substr(i);
      bool matched = false;
      for (auto op : two) {
        if (rest.substr(0, 2) == op) {
          tok.text = std::string(op);
          i += 2;
          matched = true;
          break;
        }
      }
      if (!matched) {
        if (std::string_view("(),.;*+-/%<>=").find(c) == std::string_view::npos)
          fail(std::string("unexpected character '") + c + "' at offset " + std::to_string(i));
        tok.text = std::string(1, c);
        ++i;
      }
    }
    out.push_back(std::move(tok));
  }
  Token end;
  end.kind = TokenKind::End;
  end.offset = n;
  out.push_back(end);
  return out;
}

SelectStatement parse_select(std::string_view sql) { return Parser(tokenize(sql)).statement(); }

namespace {

void walk_statement(const SelectStatement& stmt, const std::function<void(const Expr&)>& fn);

void walk_expr(const Expr& e, const std::function<void(const Expr&)>& fn) {
  fn(e);
  for (const Expr& arg : e.args) walk_expr(arg, fn);
  if (e.subquery) walk_statement(*e.subquery, fn);
}

void walk_statement(const SelectStatement& stmt, const std::function<void(const Expr&)>& fn) {
  for (const SelectCore& core : stmt.cores) {
    for (const SelectItem& item : core.items) walk_expr(item.expr, fn);
    if (core.where) walk_expr(*core.where, fn);
    for (const Expr& g : core.group_by) walk_expr(g, fn);
    if (core.having) walk_expr(*core.having, fn);
  }
  for (const OrderItem& o : stmt.order_by) walk_expr(o.expr, fn);
  if (stmt.limit) walk_expr(*stmt.limit, fn);
  if (stmt.offset) walk_expr(*stmt.offset, fn);
}

}  // namespace

void for_each_expr(const SelectStatement& stmt, const std::function<void(const Expr&)>& fn) {
  walk_statement(stmt, fn);
}

std::string print(const SelectStatement& stmt) {
  std::string out;
  print_statement(stmt, out);
  return out;
}

std::string print(const Expr& expr) {
  std::string out;
  print_expr(expr, out);
  return out;
}

std::string print_identifier(std::string_view name) {
  bool plain = !name.empty() && is_ident_start(name[0]) &&
               std::all_of(name.begin(), name.end(), [](char c) {
                 return std::isalnum(static_cast<unsigned char>(c)) || c == '_';
               }) &&
               !is_keyword(name);
  if (plain) return std::string(name);
  std::string out = "\"";
  for (char c : name) {
    if (c == '"') out += '"';
    out += c;
  }
  out += '"';
  return out;
}

std::string quote_string(std::string_view value) {
  std::string out = "'";
  for (char c : value) {
    if (c == '\'') out += '\'';
    out += c;
  }
  out += '\'';
  return out;
}

std::string_view slot_token(SlotType type) noexcept {
  switch (type) {
    case SlotType::Num: return "[NUM]";
    case SlotType::Str: return "[STR]";
    case SlotType::Time: return "[TIME]";
    case SlotType::Bool: return "[BOOL]";
  }
  return "[NUM]";
}

DataType slot_data_type(SlotType type) noexcept {
  switch (type) {
    case SlotType::Num: return DataType::Number;
    case SlotType::Str: return DataType::Text;
    case SlotType::Time: return DataType::Time;
    case SlotType::Bool: return DataType::Boolean;
  }
  return DataType::Number;
}

SlotType slot_type_for(DataType type) noexcept {
  switch (type) {
    case DataType::Number: return SlotType::Num;
    case DataType::Time: return SlotType::Time;
    case DataType::Boolean: return SlotType::Bool;
    case DataType::Text:
    case DataType::Other: return SlotType::Str;
  }
  return SlotType::Str;
}

std::optional<Placeholder> parse_placeholder(std::string_view id) {
  if (id.substr(0, 4) != "col_") return std::nullopt;
  std::string_view rest = id.substr(4);
  Placeholder ph;
  bool found = false;
  for (DataType t : kAllDataTypes) {
    std::string_view name = to_string(t);
    if (rest.substr(0, name.size()) == name && rest.size() > name.size() && rest[name.size()] == '_') {
      ph.type = t;
      rest.remove_prefix(name.size() + 1);
      found = true;
      break;
    }
  }
  if (!found) return std::nullopt;
  if (rest.substr(0, 7) == "key_fk_") {
    ph.is_fk = true;
    rest.remove_prefix(7);
  }
  if (rest.empty() || rest[0] == '0') return std::nullopt;
  int value = 0;
  auto [ptr, ec] = std::from_chars(rest.data(), rest.data() + rest.size(), value);
  if (ec != std::errc() || ptr != rest.data() + rest.size()) return std::nullopt;
  ph.ordinal = value;
  return ph;
}

std::string placeholder_name(DataType type, bool is_fk, int ordinal) {
  std::string out = "col_";
  out += to_string(type);
  out += is_fk ? "_key_fk_" : "_";
  out += std::to_string(ordinal);
  return out;
}

}  // namespace spft::sql
