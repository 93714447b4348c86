#ifndef HYBRIDQA_RERANK_HPP
#define HYBRIDQA_RERANK_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <random>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

#include "hybridqa/common.hpp"
#include "hybridqa/corpus.hpp"
#include "hybridqa/normalize.hpp"
#include "hybridqa/retrieval.hpp"

namespace hybridqa {

struct ScoredCandidate {
  std::string candidate_id;
  CandidateKind kind = CandidateKind::textual;
  double score = 0.0;

  bool operator==(const ScoredCandidate&) const = default;
};

inline std::string build_rerank_input(std::string_view question, const Candidate& c) {
  std::string out = "[question] ";
  out += question;
  out += " [title] ";
  out += c.title;
  out += " [content] ";
  out += c.content;
  return out;
}

enum class Label { negative, positive };

inline constexpr double kLossEpsilon = 1e-12;

// Binary cross-entropy summed over the batch:
//   L = -sum_pos ln(s) - sum_neg ln(1 - s)
// with s clamped to [eps, 1 - eps].
inline double reranker_loss(std::span<const double> scores, std::span<const Label> labels) {
  if (scores.size() != labels.size()) throw std::invalid_argument("reranker_loss: length mismatch");
  double loss = 0.0;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    const double s = std::clamp(scores[i], kLossEpsilon, 1.0 - kLossEpsilon);
    loss -= labels[i] == Label::positive ? std::log(s) : std::log(1.0 - s);
  }
  return loss;
}

struct LabeledCandidate {
  std::string candidate_id;
  CandidateKind kind = CandidateKind::textual;
  Label label = Label::negative;
};

// Weak supervision: positive iff some normalized gold answer occurs in the
// normalized candidate content.
inline std::vector<LabeledCandidate> label_candidates(std::span<const Candidate> candidates,
                                                      std::span<const std::string> gold_answers) {
  std::vector<std::string> golds;
  for (const auto& g : gold_answers) {
    auto n = normalize_answer(g);
    if (!n.empty()) golds.push_back(std::move(n));
  }
  std::vector<LabeledCandidate> out;
  out.reserve(candidates.size());
  for (const auto& c : candidates) {
    const auto content = normalize_answer(c.content);
    const bool hit = std::any_of(golds.begin(), golds.end(),
                                 [&](const std::string& g) { return content.find(g) != std::string::npos; });
    out.push_back({c.id, c.kind, hit ? Label::positive : Label::negative});
  }
  return out;
}

struct TrainingBatch {
  std::string question_id;
  std::vector<std::string> positives;
  std::vector<std::string> negatives;

  bool operator==(const TrainingBatch&) const = default;
};

struct SamplingOptions {
  std::size_t n_pos = 1;
  std::size_t n_neg = 63;
  std::uint64_t seed = 0;
};

// Uniform sampling without replacement from each label pool. Returns nullopt
// (skip) when there is no positive. A pool smaller than requested is taken
// whole.
inline std::optional<TrainingBatch> sample_training_batch(std::string_view question_id,
                                                          std::span<const LabeledCandidate> candidates,
                                                          SamplingOptions opts = {}) {
  std::vector<std::string> pos;
  std::vector<std::string> neg;
  for (const auto& c : candidates) (c.label == Label::positive ? pos : neg).push_back(c.candidate_id);
  if (pos.empty()) return std::nullopt;

  std::mt19937_64 rng(opts.seed);
  auto draw = [&rng](const std::vector<std::string>& pool, std::size_t n) {
    if (pool.size() <= n) return pool;
    // Partial Fisher-Yates over raw engine output, so the draw sequence does
    // not depend on the standard library's distributions.
    std::vector<std::size_t> idx(pool.size());
    for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
    std::vector<std::string> out;
    out.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
      const std::uint64_t span = idx.size() - i;
      const std::uint64_t limit = UINT64_MAX - (UINT64_MAX % span);
      std::uint64_t r;
      do r = rng(); while (r >= limit);
      std::swap(idx[i], idx[i + r % span]);
      out.push_back(pool[idx[i]]);
    }
    return out;
  };
  TrainingBatch batch;
  batch.question_id = std::string(question_id);
  batch.positives = draw(pos, opts.n_pos);
  batch.negatives = draw(neg, opts.n_neg);
  return batch;
}

inline nlohmann::json to_json(const TrainingBatch& b) {
  return {{"qid", b.question_id}, {"positives", b.positives}, {"negatives", b.negatives}};
}

// ---------------------------------------------------------------------------
// Scorers

class Scorer {
public:
  virtual ~Scorer() = default;
  // One score in [0, 1] per candidate, index-aligned.
  virtual std::vector<double> score(std::string_view question, std::span<const Candidate> candidates) = 0;
};

// Fraction of distinct question terms that occur in the candidate (title or
// content). Deterministic stand-in for a trained cross-encoder.
inline double lexical_score(std::string_view question, const Candidate& c) {
  const auto q = analyze(question);
  const std::set<std::string> qterms(q.begin(), q.end());
  if (qterms.empty()) return 0.0;
  const auto d = analyze(c.title + " " + c.content);
  const std::set<std::string> dterms(d.begin(), d.end());
  std::size_t hit = 0;
  for (const auto& t : qterms) hit += dterms.count(t);
  return static_cast<double>(hit) / static_cast<double>(qterms.size());
}

class LexicalScorer final : public Scorer {
public:
  std::vector<double> score(std::string_view question, std::span<const Candidate> candidates) override {
    std::vector<double> out;
    out.reserve(candidates.size());
    for (const auto& c : candidates) out.push_back(lexical_score(question, c));
    return out;
  }
};

// Wire format for POST /score.
inline nlohmann::json make_score_request(std::string_view question, std::span<const Candidate> candidates) {
  nlohmann::json pairs = nlohmann::json::array();
  for (const auto& c : candidates) {
    pairs.push_back({{"question", question}, {"title", c.title}, {"content", c.content}});
  }
  return {{"pairs", std::move(pairs)}};
}

inline std::vector<double> parse_score_response(const nlohmann::json& j, std::size_t expected) {
  if (!j.is_object() || !j.contains("scores") || !j["scores"].is_array()) {
    throw ProtocolError("score response lacks a 'scores' array");
  }
  const auto& arr = j["scores"];
  if (arr.size() != expected) {
    throw ProtocolError("score response has " + std::to_string(arr.size()) + " scores for " +
                        std::to_string(expected) + " pairs");
  }
  std::vector<double> out;
  out.reserve(arr.size());
  for (const auto& v : arr) {
    if (!v.is_number()) throw ProtocolError("score must be a number");
    const double s = v.get<double>();
    if (!(s >= 0.0 && s <= 1.0)) throw ProtocolError("score outside [0, 1]");
    out.push_back(s);
  }
  return out;
}

inline std::vector<ScoredCandidate> score_candidates(std::string_view question,
                                                     std::span<const Candidate> candidates, Scorer& scorer) {
  const auto scores = scorer.score(question, candidates);
  if (scores.size() != candidates.size()) {
    throw ProtocolError("scorer returned " + std::to_string(scores.size()) + " scores for " +
                        std::to_string(candidates.size()) + " candidates");
  }
  std::vector<ScoredCandidate> out;
  out.reserve(candidates.size());
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    out.push_back({candidates[i].id, candidates[i].kind, scores[i]});
  }
  return out;
}

// Merge both kinds into one pool and keep the n best: score descending,
// textual before tabular on ties, then candidate id.
inline std::vector<ScoredCandidate> select_top_joint(std::span<const ScoredCandidate> textual,
                                                     std::span<const ScoredCandidate> tabular,
                                                     std::size_t n = 50) {
  std::vector<ScoredCandidate> pool(textual.begin(), textual.end());
  pool.insert(pool.end(), tabular.begin(), tabular.end());
  std::sort(pool.begin(), pool.end(), [](const ScoredCandidate& a, const ScoredCandidate& b) {
    if (a.score != b.score) return a.score > b.score;
    if (a.kind != b.kind) return a.kind == CandidateKind::textual;
    return a.candidate_id < b.candidate_id;
  });
  if (pool.size() > n) pool.resize(n);
  return pool;
}

}  // namespace hybridqa

#endif  // HYBRIDQA_RERANK_HPP
