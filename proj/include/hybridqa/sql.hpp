#ifndef HYBRIDQA_SQL_HPP
#define HYBRIDQA_SQL_HPP

#include <algorithm>
#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <tuple>
#include <vector>

#include "hybridqa/common.hpp"
#include "hybridqa/corpus.hpp"

// WikiSQL-dialect queries:
//
//   SELECT [AGG(]column[)] FROM table_id [WHERE column OP value (AND column OP value)*]
//
// AGG is one of COUNT, MIN, MAX, SUM, AVG and only counts as an aggregate when
// the keyword is immediately followed by "(". Column names may contain spaces,
// digits and parentheses. OP is one of = < >. Values are double-quoted strings
// (backslash escapes \" and \\) or bare numbers.

namespace hybridqa::sql {

enum class Aggregate { none, count, min, max, sum, avg };
enum class CompareOp { eq, lt, gt };

inline std::string_view to_string(Aggregate a) {
  switch (a) {
    case Aggregate::none: return "";
    case Aggregate::count: return "COUNT";
    case Aggregate::min: return "MIN";
    case Aggregate::max: return "MAX";
    case Aggregate::sum: return "SUM";
    case Aggregate::avg: return "AVG";
  }
  return "";
}

inline std::string_view to_string(CompareOp op) {
  switch (op) {
    case CompareOp::eq: return "=";
    case CompareOp::lt: return "<";
    case CompareOp::gt: return ">";
  }
  return "=";
}

// Literal keeps its source spelling so parse(render(q)) == q exactly.
struct Literal {
  std::string text;
  bool is_number = false;

  static Literal string(std::string s) { return {std::move(s), false}; }
  static Literal number(std::string s) { return {std::move(s), true}; }

  bool operator==(const Literal&) const = default;
  auto operator<=>(const Literal&) const = default;
};

struct Condition {
  std::string column;
  CompareOp op = CompareOp::eq;
  Literal value;

  bool operator==(const Condition&) const = default;
};

struct SqlQuery {
  Aggregate aggregate = Aggregate::none;
  std::string select_column;
  std::string table_id;
  std::vector<Condition> conditions;

  bool operator==(const SqlQuery&) const = default;
};

class ParseError : public Error {
public:
  ParseError(const std::string& message, std::size_t position)
      : Error("SQL parse error at " + std::to_string(position) + ": " + message), position_(position) {}

  [[nodiscard]] std::size_t position() const { return position_; }

private:
  std::size_t position_;
};

class ExecError : public Error {
public:
  using Error::Error;
};

namespace detail {

inline bool is_ident_boundary(std::string_view s, std::size_t pos) {
  return pos >= s.size() || util::is_space(s[pos]);
}

// Position of the keyword as a whitespace-delimited token at or after `from`.
inline std::size_t find_keyword(std::string_view s, std::string_view kw, std::size_t from) {
  for (std::size_t i = from; i + kw.size() <= s.size(); ++i) {
    if ((i == 0 || util::is_space(s[i - 1])) && util::iequals(s.substr(i, kw.size()), kw) &&
        is_ident_boundary(s, i + kw.size())) {
      return i;
    }
  }
  return std::string_view::npos;
}

inline std::optional<Aggregate> aggregate_keyword(std::string_view s) {
  if (util::iequals(s, "COUNT")) return Aggregate::count;
  if (util::iequals(s, "MIN")) return Aggregate::min;
  if (util::iequals(s, "MAX")) return Aggregate::max;
  if (util::iequals(s, "SUM")) return Aggregate::sum;
  if (util::iequals(s, "AVG")) return Aggregate::avg;
  return std::nullopt;
}

class ConditionParser {
public:
  ConditionParser(std::string_view text, std::size_t base) : s_(text), base_(base) {}

  std::vector<Condition> parse() {
    std::vector<Condition> out;
    for (;;) {
      out.push_back(condition());
      skip_ws();
      if (pos_ >= s_.size()) break;
      if (!(pos_ + 3 <= s_.size() && util::iequals(s_.substr(pos_, 3), "AND") &&
            pos_ + 3 < s_.size() && util::is_space(s_[pos_ + 3]))) {
        fail("expected AND or end of query");
      }
      pos_ += 3;
    }
    return out;
  }

private:
  [[noreturn]] void fail(const std::string& msg) const { throw ParseError(msg, base_ + pos_); }

  void skip_ws() {
    while (pos_ < s_.size() && util::is_space(s_[pos_])) ++pos_;
  }

  Condition condition() {
    skip_ws();
    const std::size_t start = pos_;
    while (pos_ < s_.size() && s_[pos_] != '=' && s_[pos_] != '<' && s_[pos_] != '>') ++pos_;
    if (pos_ >= s_.size()) fail("expected comparison operator");
    Condition c;
    c.column = std::string(util::trim(s_.substr(start, pos_ - start)));
    if (c.column.empty()) fail("empty column name in condition");
    c.op = s_[pos_] == '=' ? CompareOp::eq : (s_[pos_] == '<' ? CompareOp::lt : CompareOp::gt);
    ++pos_;
    skip_ws();
    c.value = literal();
    return c;
  }

  Literal literal() {
    if (pos_ >= s_.size()) fail("expected value");
    if (s_[pos_] == '"') {
      ++pos_;
      std::string value;
      while (pos_ < s_.size() && s_[pos_] != '"') {
        if (s_[pos_] == '\\' && pos_ + 1 < s_.size() && (s_[pos_ + 1] == '"' || s_[pos_ + 1] == '\\')) ++pos_;
        value.push_back(s_[pos_++]);
      }
      if (pos_ >= s_.size()) fail("unterminated string literal");
      ++pos_;
      return Literal::string(std::move(value));
    }
    const std::size_t start = pos_;
    while (pos_ < s_.size() && !util::is_space(s_[pos_])) ++pos_;
    auto token = s_.substr(start, pos_ - start);
    if (!util::parse_number(token)) {
      pos_ = start;
      fail("value must be a quoted string or a number");
    }
    return Literal::number(std::string(token));
  }

  std::string_view s_;
  std::size_t base_;
  std::size_t pos_ = 0;
};

}  // namespace detail

inline SqlQuery parse_sql(std::string_view text) {
  std::size_t pos = 0;
  while (pos < text.size() && util::is_space(text[pos])) ++pos;
  if (text.substr(pos, 4) == "sql:") {
    pos += 4;
    while (pos < text.size() && util::is_space(text[pos])) ++pos;
  }
  if (!(pos + 6 <= text.size() && util::iequals(text.substr(pos, 6), "SELECT") &&
        detail::is_ident_boundary(text, pos + 6))) {
    throw ParseError("expected SELECT", pos);
  }
  const std::size_t select_start = pos + 6;

  // The select column runs up to the first FROM that is followed by exactly
  // one table-id token and then either the end or WHERE.
  std::size_t from = select_start;
  std::size_t where = std::string_view::npos;
  std::string_view table;
  for (;;) {
    from = detail::find_keyword(text, "FROM", from);
    if (from == std::string_view::npos) throw ParseError("expected FROM", text.size());
    std::size_t p = from + 4;
    while (p < text.size() && util::is_space(text[p])) ++p;
    const std::size_t t0 = p;
    while (p < text.size() && !util::is_space(text[p])) ++p;
    table = text.substr(t0, p - t0);
    while (p < text.size() && util::is_space(text[p])) ++p;
    if (!table.empty() && p >= text.size()) break;
    if (!table.empty() && p + 5 <= text.size() && util::iequals(text.substr(p, 5), "WHERE") &&
        detail::is_ident_boundary(text, p + 5)) {
      where = p;
      break;
    }
    from += 4;
  }

  SqlQuery q;
  q.table_id = std::string(table);
  std::string_view sel = util::trim(text.substr(select_start, from - select_start));
  if (sel.empty()) throw ParseError("empty select column", select_start);

  const auto paren = sel.find('(');
  if (paren != std::string_view::npos) {
    if (auto agg = detail::aggregate_keyword(sel.substr(0, paren))) {
      if (sel.back() != ')') throw ParseError("unterminated aggregate", from);
      q.aggregate = *agg;
      sel = util::trim(sel.substr(paren + 1, sel.size() - paren - 2));
      if (sel.empty()) throw ParseError("empty aggregate argument", select_start);
    }
  }
  q.select_column = std::string(sel);

  if (where != std::string_view::npos) {
    const std::size_t cond_start = where + 5;
    q.conditions = detail::ConditionParser(text.substr(cond_start), cond_start).parse();
  }
  return q;
}

inline std::string render_literal(const Literal& v) {
  if (v.is_number) return v.text;
  std::string out = "\"";
  for (char c : v.text) {
    if (c == '"' || c == '\\') out.push_back('\\');
    out.push_back(c);
  }
  out.push_back('"');
  return out;
}

inline std::string render_sql(const SqlQuery& q) {
  std::string out = "SELECT ";
  if (q.aggregate == Aggregate::none) {
    out += q.select_column;
  } else {
    out += to_string(q.aggregate);
    out += '(';
    out += q.select_column;
    out += ')';
  }
  out += " FROM ";
  out += q.table_id;
  for (std::size_t i = 0; i < q.conditions.size(); ++i) {
    const auto& c = q.conditions[i];
    out += i == 0 ? " WHERE " : " AND ";
    out += c.column;
    out += ' ';
    out += to_string(c.op);
    out += ' ';
    out += render_literal(c.value);
  }
  return out;
}

inline SqlQuery canonicalize(const SqlQuery& q) {
  SqlQuery c;
  c.aggregate = q.aggregate;
  c.select_column = util::to_lower(util::trim(q.select_column));
  c.table_id = std::string(util::trim(q.table_id));
  for (const auto& cond : q.conditions) {
    Condition k;
    k.column = util::to_lower(util::trim(cond.column));
    k.op = cond.op;
    k.value.is_number = cond.value.is_number;
    k.value.text = cond.value.is_number ? std::string(util::trim(cond.value.text))
                                        : util::to_lower(util::trim(cond.value.text));
    c.conditions.push_back(std::move(k));
  }
  std::sort(c.conditions.begin(), c.conditions.end(), [](const Condition& a, const Condition& b) {
    return std::tie(a.column, a.op, a.value) < std::tie(b.column, b.op, b.value);
  });
  return c;
}

// ---------------------------------------------------------------------------
// Execution

struct ExecResult {
  std::vector<std::string> values;

  bool operator==(const ExecResult&) const = default;
};

namespace detail {

inline std::string collapse_ws(std::string_view s) {
  return util::to_lower(util::join(util::split_words(s), " "));
}

inline std::size_t resolve_column(const Table& t, std::string_view name) {
  for (std::size_t i = 0; i < t.header.size(); ++i) {
    if (t.header[i] == name) return i;
  }
  const auto wanted = collapse_ws(name);
  for (std::size_t i = 0; i < t.header.size(); ++i) {
    if (collapse_ws(t.header[i]) == wanted) return i;
  }
  throw ExecError("unknown column '" + std::string(name) + "' in table '" + t.id + "'");
}

inline bool compare(std::string_view cell, CompareOp op, const Literal& value) {
  if (op == CompareOp::eq) {
    return util::iequals(util::trim(cell), util::trim(value.text));
  }
  const auto a = util::parse_number(cell);
  const auto b = util::parse_number(value.text);
  if (a && b) return op == CompareOp::lt ? *a < *b : *a > *b;
  const auto la = util::to_lower(cell);
  const auto lb = util::to_lower(value.text);
  return op == CompareOp::lt ? la < lb : la > lb;
}

}  // namespace detail

// Filter rows by the AND of all conditions, then aggregate the select column.
//   COUNT          number of surviving rows
//   SUM / AVG      over values that parse as numbers; "0" when there are none
//   MIN / MAX      numeric if every value is numeric, else lowercase
//                  lexicographic; empty when no rows survive
//   none           distinct surviving values in first-appearance order
inline ExecResult execute(const SqlQuery& q, const TableStore& store) {
  const Table* t = store.find(q.table_id);
  if (!t) throw ExecError("unknown table '" + q.table_id + "'");
  const std::size_t sel = detail::resolve_column(*t, q.select_column);
  std::vector<std::size_t> cond_cols;
  cond_cols.reserve(q.conditions.size());
  for (const auto& c : q.conditions) cond_cols.push_back(detail::resolve_column(*t, c.column));

  std::vector<const std::string*> selected;
  for (const auto& row : t->rows) {
    bool keep = true;
    for (std::size_t i = 0; i < q.conditions.size() && keep; ++i) {
      keep = detail::compare(row[cond_cols[i]], q.conditions[i].op, q.conditions[i].value);
    }
    if (keep) selected.push_back(&row[sel]);
  }

  ExecResult result;
  switch (q.aggregate) {
    case Aggregate::count:
      result.values.push_back(std::to_string(selected.size()));
      break;
    case Aggregate::sum:
    case Aggregate::avg: {
      double sum = 0.0;
      std::size_t n = 0;
      for (const auto* v : selected) {
        if (auto x = util::parse_number(*v)) {
          sum += *x;
          ++n;
        }
      }
      const double value = q.aggregate == Aggregate::sum ? sum : (n ? sum / static_cast<double>(n) : 0.0);
      result.values.push_back(util::format_number(value));
      break;
    }
    case Aggregate::min:
    case Aggregate::max: {
      if (selected.empty()) break;
      const bool want_min = q.aggregate == Aggregate::min;
      bool all_numeric = true;
      for (const auto* v : selected) all_numeric = all_numeric && util::parse_number(*v).has_value();
      if (all_numeric) {
        double best = *util::parse_number(*selected.front());
        for (const auto* v : selected) {
          const double x = *util::parse_number(*v);
          if (want_min ? x < best : x > best) best = x;
        }
        result.values.push_back(util::format_number(best));
      } else {
        const std::string* best = selected.front();
        std::string best_key = util::to_lower(*best);
        for (const auto* v : selected) {
          auto key = util::to_lower(*v);
          if (want_min ? key < best_key : key > best_key) {
            best = v;
            best_key = std::move(key);
          }
        }
        result.values.push_back(*best);
      }
      break;
    }
    case Aggregate::none:
      for (const auto* v : selected) {
        if (std::find(result.values.begin(), result.values.end(), *v) == result.values.end()) {
          result.values.push_back(*v);
        }
      }
      break;
  }
  return result;
}

}  // namespace hybridqa::sql

#endif  // HYBRIDQA_SQL_HPP
