#ifndef HYBRIDQA_EVAL_HPP
#define HYBRIDQA_EVAL_HPP

#include <algorithm>
#include <cstddef>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "json.hpp"

#include "hybridqa/common.hpp"
#include "hybridqa/corpus.hpp"
#include "hybridqa/normalize.hpp"
#include "hybridqa/reader.hpp"
#include "hybridqa/retrieval.hpp"
#include "hybridqa/sql.hpp"

namespace hybridqa::eval {

// ---------------------------------------------------------------------------
// Answer metrics

inline int exact_match(std::string_view pred, std::span<const std::string> golds) {
  const auto p = normalize_answer(pred);
  for (const auto& g : golds) {
    if (normalize_answer(g) == p) return 1;
  }
  return 0;
}

inline double token_f1(std::string_view pred, std::string_view gold) {
  const auto p = answer_tokens(pred);
  const auto g = answer_tokens(gold);
  if (p.empty() || g.empty()) return p.empty() && g.empty() ? 1.0 : 0.0;
  std::map<std::string, int> counts;
  for (const auto& t : g) ++counts[t];
  std::size_t common = 0;
  for (const auto& t : p) {
    auto it = counts.find(t);
    if (it != counts.end() && it->second > 0) {
      --it->second;
      ++common;
    }
  }
  if (common == 0) return 0.0;
  const double precision = static_cast<double>(common) / static_cast<double>(p.size());
  const double recall = static_cast<double>(common) / static_cast<double>(g.size());
  return 2.0 * precision * recall / (precision + recall);
}

inline double f1(std::string_view pred, std::span<const std::string> golds) {
  double best = 0.0;
  for (const auto& g : golds) best = std::max(best, token_f1(pred, g));
  return best;
}

inline std::set<std::string> normalized_set(std::span<const std::string> values) {
  std::set<std::string> out;
  for (const auto& v : values) out.insert(normalize_answer(v));
  return out;
}

// Rank-1 exact match after resolution. Non-executable output scores 0. A
// single resolved value is matched against any gold; several values must
// equal the gold list as a normalized set.
inline int top1_em(const ResolvedAnswer& resolved, std::span<const std::string> golds) {
  if (!resolved.executable || resolved.answers.empty()) return 0;
  if (resolved.answers.size() == 1) return exact_match(resolved.answers.front(), golds);
  return normalized_set(resolved.answers) == normalized_set(golds) ? 1 : 0;
}

inline int execution_accuracy(std::string_view pred_sql, const sql::SqlQuery& gold, const TableStore& store) {
  sql::ExecResult expected;
  try {
    expected = sql::execute(gold, store);
  } catch (const Error& e) {
    throw DataError(std::string("gold SQL does not execute: ") + e.what());
  }
  try {
    const auto got = sql::execute(sql::parse_sql(pred_sql), store);
    return normalized_set(got.values) == normalized_set(expected.values) ? 1 : 0;
  } catch (const Error&) {
    return 0;
  }
}

inline int logical_form_accuracy(std::string_view pred_sql, const sql::SqlQuery& gold) {
  try {
    return sql::canonicalize(sql::parse_sql(pred_sql)) == sql::canonicalize(gold) ? 1 : 0;
  } catch (const sql::ParseError&) {
    return 0;
  }
}

// ---------------------------------------------------------------------------
// Retrieval metrics

using Qrels = std::map<std::string, std::set<std::string>>;

inline Qrels parse_qrels(std::string_view text) {
  Qrels q;
  std::istringstream in{std::string(text)};
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto f = util::split_words(line);
    if (f.empty()) continue;
    if (f.size() != 2) throw DataError("qrels:" + std::to_string(line_no) + ": expected 'qid candidate_id'");
    q[f[0]].insert(f[1]);
  }
  return q;
}

inline std::string format_qrels(const Qrels& q) {
  std::string out;
  for (const auto& [qid, ids] : q) {
    for (const auto& id : ids) out += qid + " " + id + "\n";
  }
  return out;
}

inline const std::vector<std::size_t> kDefaultCutoffs = {1, 5, 10, 25, 50, 100};

struct RetrievalMetrics {
  std::map<std::size_t, double> recall;  // fraction of questions with a hit in the top k
  double map = 0.0;
  double mrr = 0.0;
  std::size_t questions = 0;
  std::vector<std::string> skipped;  // qids present in the run but absent from qrels
};

// `ranked` holds each question's candidate ids in rank order. `depth` limits
// MAP/MRR (0 = full run depth). Relevance is binary; average precision is
// normalized by the number of relevant ids in the qrels.
inline RetrievalMetrics retrieval_metrics(
    const std::vector<std::pair<std::string, std::vector<std::string>>>& ranked, const Qrels& qrels,
    std::span<const std::size_t> cutoffs = kDefaultCutoffs, std::size_t depth = 0) {
  RetrievalMetrics m;
  for (auto k : cutoffs) m.recall[k] = 0.0;
  for (const auto& [qid, ids] : ranked) {
    auto it = qrels.find(qid);
    if (it == qrels.end()) {
      m.skipped.push_back(qid);
      continue;
    }
    const auto& rel = it->second;
    ++m.questions;
    std::size_t first_hit = 0;
    std::size_t hits = 0;
    double ap = 0.0;
    const std::size_t limit = depth == 0 ? ids.size() : std::min(depth, ids.size());
    for (std::size_t r = 0; r < ids.size(); ++r) {
      if (!rel.count(ids[r])) continue;
      if (first_hit == 0) first_hit = r + 1;
      if (r < limit) {
        ++hits;
        ap += static_cast<double>(hits) / static_cast<double>(r + 1);
      }
    }
    for (auto k : cutoffs) {
      if (first_hit != 0 && first_hit <= k) m.recall[k] += 1.0;
    }
    if (first_hit != 0 && first_hit <= limit) m.mrr += 1.0 / static_cast<double>(first_hit);
    if (!rel.empty()) m.map += ap / static_cast<double>(rel.size());
  }
  if (m.questions > 0) {
    const double n = static_cast<double>(m.questions);
    for (auto& [k, v] : m.recall) v /= n;
    m.map /= n;
    m.mrr /= n;
  }
  return m;
}

// ---------------------------------------------------------------------------
// Categories of the gold SQL

enum class Category { count_0_1, count_ge_2, min_max, sum_avg, comparison, and_condition, answer_list };

inline constexpr Category kAllCategories[] = {Category::count_0_1,  Category::count_ge_2,    Category::min_max,
                                              Category::sum_avg,    Category::comparison,    Category::and_condition,
                                              Category::answer_list};

inline std::string_view to_string(Category c) {
  switch (c) {
    case Category::count_0_1: return "COUNT in {0,1}";
    case Category::count_ge_2: return "COUNT >= 2";
    case Category::min_max: return "MIN/MAX";
    case Category::sum_avg: return "SUM/AVG";
    case Category::comparison: return "Comparison (< or >)";
    case Category::and_condition: return "AND-condition";
    case Category::answer_list: return "Answer is a list";
  }
  return "";
}

inline std::set<Category> categorize(const sql::SqlQuery& gold, std::span<const std::string> gold_answers) {
  std::set<Category> out;
  using sql::Aggregate;
  if (gold.aggregate == Aggregate::count) {
    bool zero_or_one = false;
    if (gold_answers.size() == 1) {
      if (auto v = util::parse_number(gold_answers.front())) zero_or_one = *v == 0.0 || *v == 1.0;
    }
    out.insert(zero_or_one ? Category::count_0_1 : Category::count_ge_2);
  }
  if (gold.aggregate == Aggregate::min || gold.aggregate == Aggregate::max) out.insert(Category::min_max);
  if (gold.aggregate == Aggregate::sum || gold.aggregate == Aggregate::avg) out.insert(Category::sum_avg);
  for (const auto& c : gold.conditions) {
    if (c.op != sql::CompareOp::eq) out.insert(Category::comparison);
  }
  if (gold.conditions.size() >= 2) out.insert(Category::and_condition);
  if (gold_answers.size() >= 2) out.insert(Category::answer_list);
  return out;
}

// ---------------------------------------------------------------------------
// WikiSQL-both selection

// Keep a question when some gold answer occurs in at least one textual and
// one tabular candidate, and in no more than half of all its candidates.
inline bool answerable_by_both(std::span<const std::string> gold_answers, std::span<const Candidate> textual,
                               std::span<const Candidate> tabular) {
  std::vector<std::string> text_norm;
  std::vector<std::string> table_norm;
  for (const auto& c : textual) text_norm.push_back(normalize_answer(c.content));
  for (const auto& c : tabular) table_norm.push_back(normalize_answer(c.content));
  const std::size_t total = text_norm.size() + table_norm.size();
  for (const auto& raw : gold_answers) {
    const auto g = normalize_answer(raw);
    if (g.empty()) continue;
    auto count = [&g](const std::vector<std::string>& docs) {
      return static_cast<std::size_t>(
          std::count_if(docs.begin(), docs.end(), [&g](const std::string& d) { return d.find(g) != std::string::npos; }));
    };
    const std::size_t in_text = count(text_norm);
    const std::size_t in_table = count(table_norm);
    if (in_text >= 1 && in_table >= 1 && 2 * (in_text + in_table) <= total) return true;
  }
  return false;
}

struct QuestionCandidates {
  std::string qid;
  std::vector<std::string> gold_answers;
  std::vector<Candidate> textual;
  std::vector<Candidate> tabular;
};

inline std::vector<std::string> select_wikisql_both(std::span<const QuestionCandidates> questions) {
  std::vector<std::string> kept;
  for (const auto& q : questions) {
    if (answerable_by_both(q.gold_answers, q.textual, q.tabular)) kept.push_back(q.qid);
  }
  return kept;
}

// ---------------------------------------------------------------------------
// Gold file: {"qid", "answers": [...], "sql": optional string}

struct GoldRecord {
  std::string qid;
  std::vector<std::string> answers;
  std::optional<std::string> sql_text;
};

inline std::vector<GoldRecord> load_gold(const std::filesystem::path& path) {
  std::vector<GoldRecord> out;
  std::set<std::string> seen;
  detail::for_each_jsonl(path, [&](const nlohmann::json& j, std::size_t) {
    GoldRecord g;
    g.qid = detail::require_string(j, "qid");
    for (const auto& a : detail::require(j, "answers")) g.answers.push_back(detail::cell_to_string(a));
    if (auto it = j.find("sql"); it != j.end() && !it->is_null()) g.sql_text = it->get<std::string>();
    if (g.answers.empty() && !g.sql_text) throw DataError("gold record '" + g.qid + "' has no answers");
    if (!seen.insert(g.qid).second) throw DataError("duplicate gold qid '" + g.qid + "'");
    out.push_back(std::move(g));
  });
  return out;
}

// ---------------------------------------------------------------------------
// Report

struct QuestionRecord {
  std::string qid;
  OutputPrefix top1_prefix = OutputPrefix::malformed;
  std::string prediction;  // resolved rank-1 answers joined by ", "
  int em = 0;
  double f1 = 0.0;
  int top1_em = 0;
  std::optional<int> executable;     // only when rank 1 is SQL
  std::optional<int> exec_acc;       // rank 1 is SQL and gold SQL exists
  std::optional<int> lf_acc;         // same condition as exec_acc
  std::vector<Category> categories;  // empty when there is no gold SQL
};

struct CategoryRow {
  std::string name;
  std::optional<double> top1_em;  // percent
  std::size_t count = 0;
};

struct EvalReport {
  std::vector<QuestionRecord> questions;
  double em = 0.0;
  double f1 = 0.0;
  double top1_em = 0.0;
  std::optional<double> exec_acc;
  std::optional<double> lf_acc;
  std::optional<double> executable_sql_rate;
  double pct_direct_top1 = 0.0;
  double pct_sql_top1 = 0.0;
  std::vector<std::pair<std::string, RetrievalMetrics>> retrieval;  // per run label
  std::vector<CategoryRow> categories;
};

namespace detail {

inline double percent_of(std::size_t num, std::size_t den) {
  return den == 0 ? 0.0 : 100.0 * static_cast<double>(num) / static_cast<double>(den);
}

template <typename Get>
std::optional<double> mean_percent(const std::vector<QuestionRecord>& qs, Get get) {
  std::size_t n = 0;
  double sum = 0.0;
  for (const auto& q : qs) {
    if (auto v = get(q)) {
      sum += *v;
      ++n;
    }
  }
  if (n == 0) return std::nullopt;
  return 100.0 * sum / static_cast<double>(n);
}

}  // namespace detail

// Scores rank-1 outputs. Every gold question must have a prediction.
inline EvalReport evaluate(std::span<const Prediction> predictions, std::span<const GoldRecord> gold,
                           const TableStore& store) {
  std::unordered_map<std::string, const Prediction*> by_qid;
  for (const auto& p : predictions) by_qid[p.qid] = &p;

  EvalReport report;
  for (const auto& g : gold) {
    auto it = by_qid.find(g.qid);
    if (it == by_qid.end() || it->second->outputs.empty()) {
      throw DataError("no prediction for question '" + g.qid + "'");
    }
    const auto& top = it->second->outputs.front();
    const auto resolved = resolve_output(top, store);

    QuestionRecord r;
    r.qid = g.qid;
    r.top1_prefix = top.prefix;
    r.prediction = util::join(resolved.answers, ", ");
    r.em = exact_match(r.prediction, g.answers);
    r.f1 = f1(r.prediction, g.answers);
    r.top1_em = top1_em(resolved, g.answers);

    std::optional<sql::SqlQuery> gold_sql;
    if (g.sql_text) {
      try {
        gold_sql = sql::parse_sql(*g.sql_text);
      } catch (const sql::ParseError& e) {
        throw DataError("gold SQL for '" + g.qid + "' does not parse: " + e.what());
      }
      const auto cats = categorize(*gold_sql, g.answers);
      r.categories.assign(cats.begin(), cats.end());
    }
    if (top.prefix == OutputPrefix::sql) {
      r.executable = resolved.executable ? 1 : 0;
      if (gold_sql) {
        r.exec_acc = execution_accuracy(top.payload, *gold_sql, store);
        r.lf_acc = logical_form_accuracy(top.payload, *gold_sql);
      }
    }
    report.questions.push_back(std::move(r));
  }

  const auto& qs = report.questions;
  const std::size_t n = qs.size();
  std::size_t em = 0, t1 = 0, direct = 0, sqls = 0;
  double f1_sum = 0.0;
  for (const auto& q : qs) {
    em += static_cast<std::size_t>(q.em);
    t1 += static_cast<std::size_t>(q.top1_em);
    f1_sum += q.f1;
    direct += q.top1_prefix == OutputPrefix::answer;
    sqls += q.top1_prefix == OutputPrefix::sql;
  }
  report.em = detail::percent_of(em, n);
  report.top1_em = detail::percent_of(t1, n);
  report.f1 = n == 0 ? 0.0 : 100.0 * f1_sum / static_cast<double>(n);
  report.pct_direct_top1 = detail::percent_of(direct, n);
  report.pct_sql_top1 = detail::percent_of(sqls, n);
  report.executable_sql_rate = detail::mean_percent(qs, [](const QuestionRecord& q) { return q.executable; });
  report.exec_acc = detail::mean_percent(qs, [](const QuestionRecord& q) { return q.exec_acc; });
  report.lf_acc = detail::mean_percent(qs, [](const QuestionRecord& q) { return q.lf_acc; });

  auto add_row = [&](std::string name, auto pred) {
    CategoryRow row{std::move(name), std::nullopt, 0};
    std::size_t hit = 0;
    for (const auto& q : qs) {
      if (!pred(q)) continue;
      ++row.count;
      hit += static_cast<std::size_t>(q.top1_em);
    }
    if (row.count > 0) row.top1_em = detail::percent_of(hit, row.count);
    report.categories.push_back(std::move(row));
  };
  add_row("All", [](const QuestionRecord&) { return true; });
  for (auto c : kAllCategories) {
    add_row(std::string(to_string(c)), [c](const QuestionRecord& q) {
      return std::find(q.categories.begin(), q.categories.end(), c) != q.categories.end();
    });
  }
  add_row("Direct answers", [](const QuestionRecord& q) { return q.top1_prefix == OutputPrefix::answer; });
  return report;
}

namespace detail {

inline nlohmann::json opt(const std::optional<double>& v) { return v ? nlohmann::json(*v) : nlohmann::json(nullptr); }
inline nlohmann::json opt(const std::optional<int>& v) { return v ? nlohmann::json(*v) : nlohmann::json(nullptr); }

}  // namespace detail

inline nlohmann::json to_json(const RetrievalMetrics& m) {
  nlohmann::json recall = nlohmann::json::object();
  for (const auto& [k, v] : m.recall) recall[std::to_string(k)] = 100.0 * v;
  return {{"recall", recall}, {"map", 100.0 * m.map}, {"mrr", 100.0 * m.mrr}, {"questions", m.questions},
          {"skipped", m.skipped}};
}

inline nlohmann::json to_json(const EvalReport& r) {
  nlohmann::json questions = nlohmann::json::array();
  for (const auto& q : r.questions) {
    nlohmann::json cats = nlohmann::json::array();
    for (auto c : q.categories) cats.push_back(std::string(to_string(c)));
    questions.push_back({{"qid", q.qid},
                         {"top1_prefix", std::string(to_string(q.top1_prefix))},
                         {"prediction", q.prediction},
                         {"em", q.em},
                         {"f1", q.f1},
                         {"top1_em", q.top1_em},
                         {"executable", detail::opt(q.executable)},
                         {"exec_acc", detail::opt(q.exec_acc)},
                         {"lf_acc", detail::opt(q.lf_acc)},
                         {"categories", cats}});
  }
  nlohmann::json retrieval = nlohmann::json::object();
  for (const auto& [label, m] : r.retrieval) retrieval[label] = to_json(m);
  nlohmann::json cats = nlohmann::json::array();
  for (const auto& c : r.categories) cats.push_back({{"name", c.name}, {"top1_em", detail::opt(c.top1_em)}, {"count", c.count}});
  return {{"aggregate",
           {{"em", r.em},
            {"f1", r.f1},
            {"top1_em", r.top1_em},
            {"exec_acc", detail::opt(r.exec_acc)},
            {"lf_acc", detail::opt(r.lf_acc)},
            {"executable_sql_rate", detail::opt(r.executable_sql_rate)},
            {"pct_direct_top1", r.pct_direct_top1},
            {"pct_sql_top1", r.pct_sql_top1}}},
          {"retrieval", retrieval},
          {"categories", cats},
          {"questions", questions}};
}

namespace detail {

inline std::string pct(const nlohmann::json& v) {
  return v.is_null() ? "-" : util::format_fixed(v.get<double>(), 1);
}

inline std::string render_table(const std::vector<std::vector<std::string>>& rows) {
  std::vector<std::size_t> width;
  for (const auto& row : rows) {
    if (width.size() < row.size()) width.resize(row.size(), 0);
    for (std::size_t i = 0; i < row.size(); ++i) width[i] = std::max(width[i], row[i].size());
  }
  std::string out;
  for (std::size_t r = 0; r < rows.size(); ++r) {
    std::string line;
    for (std::size_t i = 0; i < rows[r].size(); ++i) {
      if (i) line += "  ";
      line += rows[r][i];
      if (i + 1 < rows[r].size()) line.append(width[i] - rows[r][i].size(), ' ');
    }
    out += line + "\n";
    if (r == 0) {
      std::size_t total = 0;
      for (std::size_t i = 0; i < width.size(); ++i) total += width[i] + (i ? 2 : 0);
      out += std::string(total, '-') + "\n";
    }
  }
  return out;
}

}  // namespace detail

// Plain-text rendering of a JSON report.
inline std::string render_report_text(const nlohmann::json& report) {
  const auto& a = report.at("aggregate");
  std::string out;
  out += detail::render_table({{"Top-1 EM", "Executable SQLs", "% Direct Ans in Top-1", "% SQL in Top-1"},
                               {detail::pct(a["top1_em"]), detail::pct(a["executable_sql_rate"]),
                                detail::pct(a["pct_direct_top1"]), detail::pct(a["pct_sql_top1"])}});
  out += "\n";
  out += detail::render_table({{"EM", "F1", "Execution Acc", "Logical Form Acc"},
                               {detail::pct(a["em"]), detail::pct(a["f1"]), detail::pct(a["exec_acc"]),
                                detail::pct(a["lf_acc"])}});
  if (report.contains("retrieval") && !report["retrieval"].empty()) {
    out += "\n";
    std::vector<std::vector<std::string>> rows;
    std::vector<std::string> head{"Candidates"};
    const auto& first = report["retrieval"].begin().value();
    std::vector<std::pair<std::size_t, std::string>> ks;
    for (const auto& [k, v] : first["recall"].items()) ks.emplace_back(std::stoul(k), k);
    std::sort(ks.begin(), ks.end());
    for (const auto& [k, s] : ks) head.push_back("R@" + s);
    head.push_back("MAP");
    head.push_back("MRR");
    rows.push_back(head);
    for (const auto& [label, m] : report["retrieval"].items()) {
      std::vector<std::string> row{label};
      for (const auto& [k, s] : ks) row.push_back(m["recall"].contains(s) ? detail::pct(m["recall"][s]) : "-");
      row.push_back(detail::pct(m["map"]));
      row.push_back(detail::pct(m["mrr"]));
      rows.push_back(std::move(row));
    }
    out += detail::render_table(rows);
  }
  if (report.contains("categories") && !report["categories"].empty()) {
    out += "\n";
    std::vector<std::vector<std::string>> rows{{"Category", "Top-1 EM", "#Test"}};
    for (const auto& c : report["categories"]) {
      rows.push_back({c["name"].get<std::string>(), detail::pct(c["top1_em"]), std::to_string(c["count"].get<std::size_t>())});
    }
    out += detail::render_table(rows);
  }
  return out;
}

}  // namespace hybridqa::eval

#endif  // HYBRIDQA_EVAL_HPP
