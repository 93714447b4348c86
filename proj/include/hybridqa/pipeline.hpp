#ifndef HYBRIDQA_PIPELINE_HPP
#define HYBRIDQA_PIPELINE_HPP

// File-artifact pipeline stages. Each stage reads the previous stage's files
// and writes its own atomically; no state survives between stages.
//
//   ingest    passages.jsonl + tables.jsonl  -> data dir
//   index     data dir                       -> text.index.json, table.index.json
//   retrieve  data dir + questions           -> run file (k per kind)
//   rerank    run file                       -> reranked run file (joint top n)
//   answer    run file                       -> predictions.jsonl (rerank, generate, resolve)
//   evaluate  predictions + gold             -> report.json (+ text tables)

#include <filesystem>
#include <limits>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <unordered_map>
#include <vector>

#include "json.hpp"

#include "hybridqa/common.hpp"
#include "hybridqa/corpus.hpp"
#include "hybridqa/eval.hpp"
#include "hybridqa/reader.hpp"
#include "hybridqa/remote.hpp"
#include "hybridqa/rerank.hpp"
#include "hybridqa/retrieval.hpp"
#include "hybridqa/sql.hpp"

namespace hybridqa::pipeline {

namespace fs = std::filesystem;

inline constexpr const char* kPassagesFile = "passages.jsonl";
inline constexpr const char* kTablesFile = "tables.jsonl";
inline constexpr const char* kTablePassagesFile = "table_passages.jsonl";
inline constexpr const char* kTextIndexFile = "text.index.json";
inline constexpr const char* kTableIndexFile = "table.index.json";

struct Question {
  std::string qid;
  std::string text;
};

inline std::vector<Question> load_questions(const fs::path& path) {
  std::vector<Question> out;
  std::set<std::string> seen;
  detail::for_each_jsonl(path, [&](const nlohmann::json& j, std::size_t) {
    Question q{detail::require_string(j, "qid"), detail::require_string(j, "question")};
    if (!seen.insert(q.qid).second) throw DataError("duplicate question id '" + q.qid + "'");
    out.push_back(std::move(q));
  });
  return out;
}

inline void require_file(const fs::path& p) {
  if (!fs::exists(p)) throw DataError("missing input artifact '" + p.string() + "'");
}

template <typename T>
std::string to_jsonl(const std::vector<T>& items) {
  std::string out;
  for (const auto& it : items) out += to_json(it).dump() + "\n";
  return out;
}

// ---------------------------------------------------------------------------

struct IngestSummary {
  std::size_t passages = 0;
  std::size_t tables = 0;
  std::size_t table_passages = 0;
};

inline IngestSummary ingest(const fs::path& passages_in, const fs::path& tables_in, const fs::path& data_dir,
                            SplitOptions split = {}) {
  require_file(passages_in);
  require_file(tables_in);
  const auto passages = load_passages(passages_in, split);
  make_text_corpus(passages);  // rejects ids that collide after splitting
  const auto store = load_tables(tables_in);
  const auto flattened = flatten_all(store, split.max_words);

  std::string tables_out;
  for (const auto* t : store.tables()) tables_out += to_json(*t).dump() + "\n";
  util::write_file_atomic(data_dir / kPassagesFile, to_jsonl(passages));
  util::write_file_atomic(data_dir / kTablesFile, tables_out);
  util::write_file_atomic(data_dir / kTablePassagesFile, to_jsonl(flattened));
  return {passages.size(), store.size(), flattened.size()};
}

// Everything the later stages need from a data dir.
struct DataDir {
  Corpus text;
  Corpus tables;
  TableStore store;

  static DataDir load(const fs::path& dir) {
    for (const char* f : {kPassagesFile, kTablesFile, kTablePassagesFile}) require_file(dir / f);
    DataDir d;
    SplitOptions unlimited;
    unlimited.max_words = std::numeric_limits<std::size_t>::max();
    d.text = make_text_corpus(load_passages(dir / kPassagesFile, unlimited));
    d.tables = make_table_corpus(load_tabular_passages(dir / kTablePassagesFile));
    d.store = load_tables(dir / kTablesFile);
    return d;
  }

  [[nodiscard]] const Candidate& candidate(const RetrievedCandidate& c) const {
    return (c.kind == CandidateKind::textual ? text : tables).at(c.candidate_id);
  }
};

inline void build_indices(const fs::path& data_dir, Bm25Params params = {}) {
  const auto d = DataDir::load(data_dir);
  util::write_file_atomic(data_dir / kTextIndexFile, build_index(d.text, params).to_json().dump() + "\n");
  util::write_file_atomic(data_dir / kTableIndexFile, build_index(d.tables, params).to_json().dump() + "\n");
}

inline Bm25Index load_index(const fs::path& path) {
  require_file(path);
  try {
    return Bm25Index::from_json(nlohmann::json::parse(util::read_file(path)));
  } catch (const nlohmann::json::exception& e) {
    throw DataError("bad index snapshot '" + path.string() + "': " + e.what());
  }
}

inline Run retrieve_all(const std::vector<Question>& questions, const Bm25Index& text, const Bm25Index& tables,
                        std::size_t k) {
  Run run;
  for (const auto& q : questions) {
    for (const auto* idx : {&text, &tables}) {
      for (auto& c : retrieve(q.text, *idx, k)) run.push_back({q.qid, std::move(c)});
    }
  }
  return run;
}

inline void retrieve_stage(const fs::path& data_dir, const fs::path& questions_path, std::size_t k,
                           const fs::path& out) {
  require_file(questions_path);
  const auto questions = load_questions(questions_path);
  const auto text = load_index(data_dir / kTextIndexFile);
  const auto tables = load_index(data_dir / kTableIndexFile);
  util::write_file_atomic(out, format_run(retrieve_all(questions, text, tables, k)));
}

inline Run load_run(const fs::path& path) {
  require_file(path);
  return parse_run(util::read_file(path), path.string());
}

// ---------------------------------------------------------------------------
// Scorer / generator selection

inline std::unique_ptr<Scorer> make_scorer(const std::string& spec) {
  if (spec == "lexical") return std::make_unique<LexicalScorer>();
  if (auto ep = parse_endpoint(spec)) return std::make_unique<RemoteScorer>(*ep);
  throw DataError("scorer must be 'lexical' or an http:// URL, got '" + spec + "'");
}

// stub:<fixtures.jsonl> | constant:<text> | first-candidate | http://host:port
inline std::unique_ptr<Generator> make_generator(const std::string& spec) {
  if (spec.rfind("stub:", 0) == 0) {
    const fs::path path = spec.substr(5);
    require_file(path);
    return std::make_unique<OracleStubGenerator>(OracleStubGenerator::from_file(path));
  }
  if (spec.rfind("constant:", 0) == 0) return std::make_unique<ConstantGenerator>(spec.substr(9));
  if (spec == "first-candidate") return std::make_unique<FirstCandidateGenerator>();
  if (auto ep = parse_endpoint(spec)) return std::make_unique<RemoteGenerator>(*ep);
  throw DataError("unrecognized generator '" + spec + "'");
}

// ---------------------------------------------------------------------------
// Reranking

struct RerankOptions {
  std::size_t n = 50;
  std::uint64_t seed = 0;
  SamplingOptions sampling;
};

inline std::vector<ScoredCandidate> rerank_question(const Question& q, const std::vector<RetrievedCandidate>& retrieved,
                                                    const DataDir& data, Scorer& scorer, std::size_t n) {
  std::vector<Candidate> text;
  std::vector<Candidate> tables;
  for (const auto& r : retrieved) (r.kind == CandidateKind::textual ? text : tables).push_back(data.candidate(r));
  const auto st = score_candidates(q.text, text, scorer);
  const auto sb = score_candidates(q.text, tables, scorer);
  return select_top_joint(st, sb, n);
}

inline Run to_run(const std::string& qid, const std::vector<ScoredCandidate>& scored) {
  Run run;
  for (std::size_t i = 0; i < scored.size(); ++i) {
    run.push_back({qid, {scored[i].candidate_id, scored[i].kind, scored[i].score, i + 1}});
  }
  return run;
}

inline std::map<std::string, std::vector<RetrievedCandidate>> index_run(const Run& run) {
  std::map<std::string, std::vector<RetrievedCandidate>> by_qid;
  for (const auto& [qid, cands] : group_run(run)) by_qid[qid] = cands;
  return by_qid;
}

// Optional training-batch export needs gold answers.
inline void rerank_stage(const fs::path& data_dir, const fs::path& questions_path, const fs::path& run_path,
                         Scorer& scorer, const RerankOptions& opts, const fs::path& out,
                         const std::optional<fs::path>& gold_path = std::nullopt,
                         const std::optional<fs::path>& training_out = std::nullopt) {
  require_file(questions_path);
  const auto data = DataDir::load(data_dir);
  const auto questions = load_questions(questions_path);
  const auto by_qid = index_run(load_run(run_path));

  std::unordered_map<std::string, std::vector<std::string>> gold;
  if (gold_path) {
    for (auto& g : eval::load_gold(*gold_path)) gold.emplace(g.qid, std::move(g.answers));
  }

  Run reranked;
  std::string batches;
  for (const auto& q : questions) {
    auto it = by_qid.find(q.qid);
    const std::vector<RetrievedCandidate> none;
    const auto& retrieved = it == by_qid.end() ? none : it->second;
    for (auto& e : to_run(q.qid, rerank_question(q, retrieved, data, scorer, opts.n))) reranked.push_back(std::move(e));

    if (training_out) {
      auto g = gold.find(q.qid);
      if (g == gold.end() || g->second.empty()) continue;
      std::vector<Candidate> all;
      for (const auto& r : retrieved) all.push_back(data.candidate(r));
      const auto labeled = label_candidates(all, g->second);
      auto sampling = opts.sampling;
      sampling.seed = opts.seed ^ util::stable_hash(q.qid);
      if (auto batch = sample_training_batch(q.qid, labeled, sampling)) batches += to_json(*batch).dump() + "\n";
    }
  }
  util::write_file_atomic(out, format_run(reranked));
  if (training_out) util::write_file_atomic(*training_out, batches);
}

// ---------------------------------------------------------------------------
// Answering

struct AnswerOptions {
  RerankOptions rerank;
  std::size_t beam_size = kDefaultBeamSize;
  std::size_t max_context_tokens = kDefaultContextTokens;
};

inline GenerationRequest make_request(const Question& q, const std::vector<ScoredCandidate>& top, const DataDir& data,
                                      const AnswerOptions& opts) {
  GenerationRequest req;
  req.question_id = q.qid;
  req.question = q.text;
  req.beam_size = opts.beam_size;
  req.max_context_tokens = opts.max_context_tokens;
  for (const auto& s : top) {
    const auto& c = (s.kind == CandidateKind::textual ? data.text : data.tables).at(s.candidate_id);
    req.contexts.push_back(serialize_candidate(q.text, c, opts.max_context_tokens));
  }
  // No retrieved evidence: the generator still sees the question.
  if (req.contexts.empty()) req.contexts.push_back("question: " + q.text);
  return req;
}

inline void answer_stage(const fs::path& data_dir, const fs::path& questions_path, const fs::path& run_path,
                         Scorer& scorer, Generator& generator, const AnswerOptions& opts, const fs::path& out,
                         const std::optional<fs::path>& gold_path = std::nullopt,
                         const std::optional<fs::path>& targets_out = std::nullopt) {
  require_file(questions_path);
  const auto data = DataDir::load(data_dir);
  const auto questions = load_questions(questions_path);
  const auto by_qid = index_run(load_run(run_path));

  std::unordered_map<std::string, eval::GoldRecord> gold;
  if (gold_path) {
    for (auto& g : eval::load_gold(*gold_path)) gold.emplace(g.qid, std::move(g));
  }

  std::string predictions;
  std::string targets;
  for (const auto& q : questions) {
    auto it = by_qid.find(q.qid);
    const std::vector<RetrievedCandidate> none;
    const auto top = rerank_question(q, it == by_qid.end() ? none : it->second, data, scorer, opts.rerank.n);
    const auto req = make_request(q, top, data, opts);
    Prediction p{q.qid, generate(req, generator)};
    predictions += to_json(p).dump() + "\n";

    if (targets_out) {
      auto g = gold.find(q.qid);
      if (g == gold.end()) continue;
      TrainingExample ex{g->second.answers, std::nullopt};
      if (g->second.sql_text) ex.sql = sql::parse_sql(*g->second.sql_text);
      const auto t = make_targets(ex, opts.rerank.seed ^ util::stable_hash(q.qid));
      targets += nlohmann::json{{"qid", q.qid}, {"question", q.text}, {"contexts", req.contexts}, {"targets", t}}.dump() + "\n";
    }
  }
  util::write_file_atomic(out, predictions);
  if (targets_out) util::write_file_atomic(*targets_out, targets);
}

// ---------------------------------------------------------------------------
// Evaluation

struct EvaluateInputs {
  fs::path data_dir;
  fs::path predictions;
  fs::path gold;
  std::optional<fs::path> run;       // per-kind BM25 recall
  std::optional<fs::path> reranked;  // hybrid recall
  std::optional<fs::path> qrels;     // else derived from gold answers
  std::vector<std::size_t> cutoffs = eval::kDefaultCutoffs;
  std::size_t depth = 0;
};

inline eval::Qrels derive_qrels(const std::vector<eval::GoldRecord>& gold, const std::vector<const Run*>& runs,
                                const DataDir& data) {
  std::unordered_map<std::string, const eval::GoldRecord*> by_qid;
  for (const auto& g : gold) by_qid[g.qid] = &g;
  eval::Qrels qrels;
  for (const auto* run : runs) {
    for (const auto& e : *run) {
      auto it = by_qid.find(e.qid);
      if (it == by_qid.end()) continue;
      auto& rel = qrels[e.qid];
      const Candidate c = data.candidate(e.candidate);
      const auto labeled = label_candidates(std::span<const Candidate>(&c, 1), it->second->answers);
      if (labeled.front().label == Label::positive) rel.insert(c.id);
    }
  }
  return qrels;
}

inline std::vector<std::pair<std::string, std::vector<std::string>>> ranked_ids(const Run& run,
                                                                                std::optional<CandidateKind> kind) {
  std::vector<std::pair<std::string, std::vector<std::string>>> out;
  for (const auto& [qid, cands] : group_run(run)) {
    std::vector<const RetrievedCandidate*> sel;
    for (const auto& c : cands) {
      if (!kind || c.kind == *kind) sel.push_back(&c);
    }
    std::stable_sort(sel.begin(), sel.end(), [](auto* a, auto* b) { return a->rank < b->rank; });
    std::vector<std::string> ids;
    for (const auto* c : sel) ids.push_back(c->candidate_id);
    out.emplace_back(qid, std::move(ids));
  }
  return out;
}

inline nlohmann::json evaluate_stage(const EvaluateInputs& in, std::vector<std::string>* warnings = nullptr) {
  const auto data = DataDir::load(in.data_dir);
  require_file(in.predictions);
  require_file(in.gold);
  const auto predictions = load_predictions(in.predictions);
  const auto gold = eval::load_gold(in.gold);
  auto report = eval::evaluate(predictions, gold, data.store);

  std::optional<Run> run;
  std::optional<Run> reranked;
  if (in.run) run = load_run(*in.run);
  if (in.reranked) reranked = load_run(*in.reranked);
  if (run || reranked) {
    eval::Qrels qrels;
    if (in.qrels) {
      require_file(*in.qrels);
      qrels = eval::parse_qrels(util::read_file(*in.qrels));
    } else {
      std::vector<const Run*> runs;
      if (run) runs.push_back(&*run);
      if (reranked) runs.push_back(&*reranked);
      qrels = derive_qrels(gold, runs, data);
    }
    auto add = [&](const std::string& label, const Run& r, std::optional<CandidateKind> kind) {
      auto m = eval::retrieval_metrics(ranked_ids(r, kind), qrels, in.cutoffs, in.depth);
      if (warnings) {
        for (const auto& q : m.skipped) warnings->push_back(label + ": question '" + q + "' has no qrels; skipped");
      }
      report.retrieval.emplace_back(label, std::move(m));
    };
    if (run) {
      add("textual", *run, CandidateKind::textual);
      add("tabular", *run, CandidateKind::tabular);
    }
    if (reranked) add("hybrid", *reranked, std::nullopt);
  }
  return eval::to_json(report);
}

// ---------------------------------------------------------------------------
// WikiSQL-both

inline std::vector<std::string> wikisql_both_stage(const fs::path& data_dir, const fs::path& questions_path,
                                                   const fs::path& gold_path, const fs::path& run_path,
                                                   const fs::path& out) {
  require_file(questions_path);
  const auto data = DataDir::load(data_dir);
  const auto questions = load_questions(questions_path);
  std::unordered_map<std::string, std::vector<std::string>> gold;
  for (auto& g : eval::load_gold(gold_path)) gold.emplace(g.qid, std::move(g.answers));
  const auto by_qid = index_run(load_run(run_path));

  std::vector<eval::QuestionCandidates> qc;
  for (const auto& q : questions) {
    eval::QuestionCandidates c;
    c.qid = q.qid;
    if (auto g = gold.find(q.qid); g != gold.end()) c.gold_answers = g->second;
    if (auto r = by_qid.find(q.qid); r != by_qid.end()) {
      for (const auto& rc : r->second) {
        (rc.kind == CandidateKind::textual ? c.textual : c.tabular).push_back(data.candidate(rc));
      }
    }
    qc.push_back(std::move(c));
  }
  const auto kept = eval::select_wikisql_both(qc);
  const std::set<std::string> keep(kept.begin(), kept.end());
  std::string lines;
  for (const auto& q : questions) {
    if (keep.count(q.qid)) lines += nlohmann::json{{"qid", q.qid}, {"question", q.text}}.dump() + "\n";
  }
  util::write_file_atomic(out, lines);
  return kept;
}

}  // namespace hybridqa::pipeline

#endif  // HYBRIDQA_PIPELINE_HPP
