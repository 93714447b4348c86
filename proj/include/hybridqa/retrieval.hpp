#ifndef HYBRIDQA_RETRIEVAL_HPP
#define HYBRIDQA_RETRIEVAL_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "json.hpp"

#include "hybridqa/common.hpp"
#include "hybridqa/corpus.hpp"

namespace hybridqa {

// Lowercases ASCII and splits on every byte that is not an ASCII letter or
// digit. Bytes >= 0x80 are kept inside tokens so UTF-8 text is not shredded.
inline std::vector<std::string> analyze(std::string_view text) {
  std::vector<std::string> terms;
  std::string current;
  for (char ch : text) {
    const auto c = static_cast<unsigned char>(ch);
    const bool keep = (c >= '0' && c <= '9') || (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || c >= 0x80;
    if (keep) {
      current.push_back(util::ascii_lower(ch));
    } else if (!current.empty()) {
      terms.push_back(std::move(current));
      current.clear();
    }
  }
  if (!current.empty()) terms.push_back(std::move(current));
  return terms;
}

struct Bm25Params {
  double k1 = 1.2;
  double b = 0.75;

  bool operator==(const Bm25Params&) const = default;
};

struct Posting {
  std::uint32_t doc = 0;
  std::uint32_t tf = 0;

  bool operator==(const Posting&) const = default;
};

// Inverted index over one corpus. Documents are numbered by ingestion order;
// that ordinal is the "doc id" used for posting order and tie-breaking.
class Bm25Index {
public:
  Bm25Index() = default;

  static Bm25Index build(const Corpus& corpus, Bm25Params params = {}) {
    if (corpus.empty()) throw DataError("cannot build an index over an empty corpus");
    Bm25Index idx;
    idx.params_ = params;
    idx.kind_ = corpus[0].kind;
    idx.doc_ids_.reserve(corpus.size());
    idx.doc_lengths_.reserve(corpus.size());
    std::uint64_t total = 0;
    for (std::size_t d = 0; d < corpus.size(); ++d) {
      const auto& c = corpus[d];
      idx.doc_ids_.push_back(c.id);
      const auto terms = analyze(indexed_text(c));
      idx.doc_lengths_.push_back(static_cast<std::uint32_t>(terms.size()));
      total += terms.size();
      std::map<std::string_view, std::uint32_t> tf;
      for (const auto& t : terms) ++tf[t];
      for (const auto& [term, count] : tf) {
        idx.postings_[std::string(term)].push_back({static_cast<std::uint32_t>(d), count});
      }
    }
    idx.avg_doc_len_ = static_cast<double>(total) / static_cast<double>(corpus.size());
    for (std::size_t d = 0; d < idx.doc_ids_.size(); ++d) idx.ordinal_.emplace(idx.doc_ids_[d], d);
    return idx;
  }

  // Title and content are both indexed.
  static std::string indexed_text(const Candidate& c) { return c.title + " " + c.content; }

  [[nodiscard]] std::size_t doc_count() const { return doc_ids_.size(); }
  [[nodiscard]] double avg_doc_len() const { return avg_doc_len_; }
  [[nodiscard]] const Bm25Params& params() const { return params_; }
  [[nodiscard]] CandidateKind kind() const { return kind_; }
  [[nodiscard]] const std::string& doc_id(std::size_t ordinal) const { return doc_ids_.at(ordinal); }
  [[nodiscard]] std::uint32_t doc_length(std::size_t ordinal) const { return doc_lengths_.at(ordinal); }

  [[nodiscard]] const std::vector<Posting>* postings(std::string_view term) const {
    auto it = postings_.find(std::string(term));
    return it == postings_.end() ? nullptr : &it->second;
  }

  [[nodiscard]] std::size_t df(std::string_view term) const {
    const auto* p = postings(term);
    return p ? p->size() : 0;
  }

  [[nodiscard]] std::size_t ordinal_of(std::string_view id) const {
    auto it = ordinal_.find(std::string(id));
    if (it == ordinal_.end()) throw DataError("unknown doc id '" + std::string(id) + "'");
    return it->second;
  }

  // ln(1 + (N - df + 0.5) / (df + 0.5)); never negative.
  [[nodiscard]] double idf(std::size_t df) const {
    const double n = static_cast<double>(doc_count());
    const double d = static_cast<double>(df);
    return std::log(1.0 + (n - d + 0.5) / (d + 0.5));
  }

  [[nodiscard]] double term_weight(std::size_t df, std::uint32_t tf, std::uint32_t doc_len) const {
    if (tf == 0) return 0.0;
    const double k1 = params_.k1;
    const double norm = k1 * (1.0 - params_.b + params_.b * doc_len / avg_doc_len_);
    return idf(df) * (tf * (k1 + 1.0)) / (tf + norm);
  }

  nlohmann::json to_json() const {
    nlohmann::json postings = nlohmann::json::object();
    for (const auto& [term, list] : postings_) {
      nlohmann::json arr = nlohmann::json::array();
      for (const auto& p : list) arr.push_back({p.doc, p.tf});
      postings[term] = std::move(arr);
    }
    return {{"kind", std::string(to_string(kind_))},
            {"k1", params_.k1},
            {"b", params_.b},
            {"doc_ids", doc_ids_},
            {"doc_lengths", doc_lengths_},
            {"postings", std::move(postings)}};
  }

  static Bm25Index from_json(const nlohmann::json& j) {
    Bm25Index idx;
    idx.kind_ = parse_kind(j.at("kind").get<std::string>());
    idx.params_ = {j.at("k1").get<double>(), j.at("b").get<double>()};
    idx.doc_ids_ = j.at("doc_ids").get<std::vector<std::string>>();
    idx.doc_lengths_ = j.at("doc_lengths").get<std::vector<std::uint32_t>>();
    if (idx.doc_ids_.empty() || idx.doc_ids_.size() != idx.doc_lengths_.size()) {
      throw DataError("index snapshot: doc_ids and doc_lengths disagree");
    }
    std::uint64_t total = 0;
    for (auto len : idx.doc_lengths_) total += len;
    idx.avg_doc_len_ = static_cast<double>(total) / static_cast<double>(idx.doc_ids_.size());
    for (const auto& [term, arr] : j.at("postings").items()) {
      auto& list = idx.postings_[term];
      for (const auto& p : arr) list.push_back({p[0].get<std::uint32_t>(), p[1].get<std::uint32_t>()});
    }
    for (std::size_t d = 0; d < idx.doc_ids_.size(); ++d) idx.ordinal_.emplace(idx.doc_ids_[d], d);
    return idx;
  }

  bool operator==(const Bm25Index& o) const {
    return params_ == o.params_ && kind_ == o.kind_ && doc_ids_ == o.doc_ids_ &&
           doc_lengths_ == o.doc_lengths_ && postings_ == o.postings_;
  }

private:
  Bm25Params params_;
  CandidateKind kind_ = CandidateKind::textual;
  std::vector<std::string> doc_ids_;
  std::vector<std::uint32_t> doc_lengths_;
  std::map<std::string, std::vector<Posting>> postings_;
  std::unordered_map<std::string, std::size_t> ordinal_;
  double avg_doc_len_ = 0.0;
};

inline Bm25Index build_index(const Corpus& corpus, Bm25Params params = {}) {
  return Bm25Index::build(corpus, params);
}

// Score of one document for a query term multiset; repeated query terms count
// once per occurrence.
inline double bm25_score(const std::vector<std::string>& query_terms, std::size_t doc,
                         const Bm25Index& index) {
  if (doc >= index.doc_count()) throw DataError("unknown doc ordinal " + std::to_string(doc));
  const auto len = index.doc_length(doc);
  double score = 0.0;
  for (const auto& term : query_terms) {
    const auto* list = index.postings(term);
    if (!list) continue;
    auto it = std::lower_bound(list->begin(), list->end(), doc,
                               [](const Posting& p, std::size_t d) { return p.doc < d; });
    if (it == list->end() || it->doc != doc) continue;
    score += index.term_weight(list->size(), it->tf, len);
  }
  return score;
}

inline double bm25_score(const std::vector<std::string>& query_terms, std::string_view doc_id,
                         const Bm25Index& index) {
  return bm25_score(query_terms, index.ordinal_of(doc_id), index);
}

struct RetrievedCandidate {
  std::string candidate_id;
  CandidateKind kind = CandidateKind::textual;
  double score = 0.0;
  std::size_t rank = 0;

  bool operator==(const RetrievedCandidate&) const = default;
};

// Term-at-a-time accumulation, then a partial sort by (score desc, ordinal
// asc). Zero-score documents are never returned.
inline std::vector<RetrievedCandidate> retrieve(std::string_view question, const Bm25Index& index,
                                                std::size_t k = 100) {
  const auto terms = analyze(question);
  std::vector<double> acc(index.doc_count(), 0.0);
  std::vector<std::uint32_t> touched;
  for (const auto& term : terms) {
    const auto* list = index.postings(term);
    if (!list) continue;
    for (const auto& p : *list) {
      if (acc[p.doc] == 0.0) touched.push_back(p.doc);
      acc[p.doc] += index.term_weight(list->size(), p.tf, index.doc_length(p.doc));
    }
  }
  std::sort(touched.begin(), touched.end());
  touched.erase(std::unique(touched.begin(), touched.end()), touched.end());
  touched.erase(std::remove_if(touched.begin(), touched.end(), [&](auto d) { return !(acc[d] > 0.0); }),
                touched.end());

  auto better = [&](std::uint32_t a, std::uint32_t b) {
    if (acc[a] != acc[b]) return acc[a] > acc[b];
    return a < b;
  };
  const std::size_t n = std::min(k, touched.size());
  std::partial_sort(touched.begin(), touched.begin() + static_cast<std::ptrdiff_t>(n), touched.end(), better);

  std::vector<RetrievedCandidate> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    out.push_back({index.doc_id(touched[i]), index.kind(), acc[touched[i]], i + 1});
  }
  return out;
}

// ---------------------------------------------------------------------------
// Run files: "qid candidate_id rank score kind", one candidate per line.

struct RunEntry {
  std::string qid;
  RetrievedCandidate candidate;
};

using Run = std::vector<RunEntry>;

inline std::string format_run_line(std::string_view qid, const RetrievedCandidate& c) {
  std::string line(qid);
  line += ' ';
  line += c.candidate_id;
  line += ' ';
  line += std::to_string(c.rank);
  line += ' ';
  line += util::format_fixed(c.score, 6);
  line += ' ';
  line += to_string(c.kind);
  line += '\n';
  return line;
}

inline std::string format_run(const Run& run) {
  std::string out;
  for (const auto& e : run) out += format_run_line(e.qid, e.candidate);
  return out;
}

inline Run parse_run(std::string_view text, std::string_view source = "run") {
  Run run;
  std::size_t line_no = 0;
  std::istringstream in{std::string(text)};
  std::string line;
  while (std::getline(in, line)) {
    ++line_no;
    if (util::trim(line).empty()) continue;
    const auto f = util::split_words(line);
    if (f.size() != 5) {
      throw DataError(std::string(source) + ":" + std::to_string(line_no) + ": expected 5 fields");
    }
    RunEntry e;
    e.qid = f[0];
    e.candidate.candidate_id = f[1];
    const auto rank = util::parse_number(f[2]);
    const auto score = util::parse_number(f[3]);
    if (!rank || !score || *rank < 1) {
      throw DataError(std::string(source) + ":" + std::to_string(line_no) + ": bad rank or score");
    }
    e.candidate.rank = static_cast<std::size_t>(*rank);
    e.candidate.score = *score;
    e.candidate.kind = parse_kind(f[4]);
    run.push_back(std::move(e));
  }
  return run;
}

// Groups a run by question, preserving first-appearance order of qids and the
// file order of candidates within each question.
inline std::vector<std::pair<std::string, std::vector<RetrievedCandidate>>> group_run(const Run& run) {
  std::vector<std::pair<std::string, std::vector<RetrievedCandidate>>> groups;
  std::unordered_map<std::string, std::size_t> pos;
  for (const auto& e : run) {
    auto [it, inserted] = pos.emplace(e.qid, groups.size());
    if (inserted) groups.emplace_back(e.qid, std::vector<RetrievedCandidate>{});
    groups[it->second].second.push_back(e.candidate);
  }
  return groups;
}

}  // namespace hybridqa

#endif  // HYBRIDQA_RETRIEVAL_HPP
