#pragma once

// Tokenizer, AST, parser and printer for the single-SELECT dialect used by the
// text-to-SQL benchmarks (SQLite flavoured). The printer emits one canonical
// spelling per tree, which is what makes template skeletons comparable.

#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "spft/schema.hpp"

namespace spft::sql {

enum class TokenKind { Word, QuotedIdent, Number, String, ValueSlot, Symbol, End };

struct Token {
  TokenKind kind = TokenKind::End;
  std::string text;  // words keep source case; quoted forms are unescaped
  std::size_t offset = 0;
};

/// Throws Error(ParseError) on unterminated strings or stray characters.
std::vector<Token> tokenize(std::string_view sql);

bool is_keyword(std::string_view word);

/// Deep-copying owning pointer, so AST nodes keep value semantics.
template <class T>
class Box {
 public:
  Box() = default;
  explicit Box(T value) : ptr_(std::make_unique<T>(std::move(value))) {}
  Box(const Box& other) : ptr_(other.ptr_ ? std::make_unique<T>(*other.ptr_) : nullptr) {}
  Box(Box&&) noexcept = default;
  Box& operator=(const Box& other) {
    if (this != &other) ptr_ = other.ptr_ ? std::make_unique<T>(*other.ptr_) : nullptr;
    return *this;
  }
  Box& operator=(Box&&) noexcept = default;

  explicit operator bool() const noexcept { return static_cast<bool>(ptr_); }
  T& operator*() const { return *ptr_; }
  T* operator->() const { return ptr_.get(); }
  T* get() const { return ptr_.get(); }

 private:
  std::unique_ptr<T> ptr_;
};

struct SelectStatement;

enum class ExprKind {
  Column,      // [qualifier.]name
  Star,        // [qualifier.]*
  Literal,
  ValueSlot,   // [NUM] / [STR] / [TIME] / [BOOL]
  Unary,       // text = "-", "+", "NOT"
  Binary,      // text = operator, args = {lhs, rhs}
  Between,     // args = {expr, low, high}; negated
  InList,      // args = {expr, items...}; negated
  InSubquery,  // args = {expr}; subquery; negated
  Exists,      // subquery; negated
  Function,    // text = lowercased name; distinct; star_arg
  Subquery,
  Paren,       // args = {inner}
  Case,        // args = [operand] (when then)* [else]
  Cast,        // args = {expr}; text = type name
};

enum class LiteralKind { Number, String, Null, Bool };

enum class SlotType { Num, Str, Time, Bool };

std::string_view slot_token(SlotType type) noexcept;  // "[NUM]" ...
DataType slot_data_type(SlotType type) noexcept;
SlotType slot_type_for(DataType type) noexcept;

struct Expr {
  ExprKind kind = ExprKind::Literal;
  std::string text;
  std::string qualifier;
  std::vector<Expr> args;
  Box<SelectStatement> subquery;
  LiteralKind literal = LiteralKind::Number;
  SlotType slot = SlotType::Num;
  bool negated = false;
  bool distinct = false;
  bool star_arg = false;
  bool quoted = false;     // column written as "ident" (SQLite may read it as a string)
  bool has_operand = false;  // CASE x WHEN ...
  bool has_else = false;
};

struct SelectItem {
  Expr expr;
  std::string alias;
};

struct FromItem {
  std::string join;  // "" for the first item, "," or "JOIN" / "LEFT JOIN" / ...
  std::string table;
  std::string alias;
  Box<SelectStatement> subquery;
  std::optional<Expr> on;
};

struct SelectCore {
  bool distinct = false;
  std::vector<SelectItem> items;
  std::vector<FromItem> from;
  std::optional<Expr> where;
  std::vector<Expr> group_by;
  std::optional<Expr> having;
};

struct OrderItem {
  Expr expr;
  std::string direction;  // "", "ASC" or "DESC"
};

struct SelectStatement {
  std::vector<SelectCore> cores;     // >= 1
  std::vector<std::string> set_ops;  // cores.size() - 1 entries, e.g. "UNION ALL"
  std::vector<OrderItem> order_by;
  std::optional<Expr> limit;
  std::optional<Expr> offset;
};

/// Parses exactly one SELECT (a trailing ';' is allowed).
/// Throws Error(UnsupportedStatement) for other statement kinds and
/// Error(ParseError) for malformed input.
SelectStatement parse_select(std::string_view sql);

/// Pre-order walk over every expression in print order, descending into
/// subqueries where they print. FROM clauses (and their ON conditions) are
/// skipped; ORDER BY, LIMIT and OFFSET are included.
void for_each_expr(const SelectStatement& stmt, const std::function<void(const Expr&)>& fn);

std::string print(const SelectStatement& stmt);
std::string print(const Expr& expr);
std::string print_identifier(std::string_view name);
std::string quote_string(std::string_view value);

/// Column placeholder grammar: col_<type>[_key_fk]_<n>.
struct Placeholder {
  DataType type = DataType::Other;
  bool is_fk = false;
  int ordinal = 0;
};
std::optional<Placeholder> parse_placeholder(std::string_view identifier);
std::string placeholder_name(DataType type, bool is_fk, int ordinal);

}  // namespace spft::sql
