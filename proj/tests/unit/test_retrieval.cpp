#include <algorithm>
#include <cmath>
#include <map>
#include <random>
#include <string>
#include <vector>

#include <gtest/gtest.h>

#include "hybridqa/retrieval.hpp"
#include "support/fixtures.hpp"

using namespace hybridqa;
using hqa_test::kFiveDocs;
using hqa_test::make_corpus;
using hqa_test::NaiveBm25;

namespace {

}  // namespace

TEST(Analyze, LowercasesAndSplitsOnNonAlnum) {
  EXPECT_EQ(analyze("The Island!"), (std::vector<std::string>{"the", "island"}));
  EXPECT_EQ(analyze("table_2-18017970-2"), (std::vector<std::string>{"table", "2", "18017970", "2"}));
  EXPECT_TRUE(analyze("").empty());
  EXPECT_TRUE(analyze(" ;; -- ").empty());
}

TEST(Analyze, KeepsNonAsciiBytesInsideTokens) {
  EXPECT_EQ(analyze("pokémon theme"), (std::vector<std::string>{"pokémon", "theme"}));
}

TEST(BuildIndex, AverageLengthAndDocumentFrequency) {
  const auto idx = build_index(make_corpus({"a b", "a b c d", "c d e f g h"}));
  EXPECT_EQ(idx.doc_count(), 3u);
  EXPECT_DOUBLE_EQ(idx.avg_doc_len(), 4.0);
  EXPECT_EQ(idx.df("a"), 2u);
  EXPECT_EQ(idx.df("h"), 1u);
  EXPECT_EQ(idx.df("zzz"), 0u);
}

TEST(BuildIndex, PostingsSortedByDocOrdinal) {
  const auto idx = build_index(make_corpus(kFiveDocs));
  for (const auto& term : {"the", "island", "film"}) {
    const auto* list = idx.postings(term);
    ASSERT_NE(list, nullptr);
    EXPECT_TRUE(std::is_sorted(list->begin(), list->end(), [](auto& a, auto& b) { return a.doc < b.doc; }));
  }
}

TEST(BuildIndex, DeterministicAndSnapshotRoundTrips) {
  const auto corpus = make_corpus(kFiveDocs);
  const auto a = build_index(corpus);
  const auto b = build_index(corpus);
  EXPECT_EQ(a, b);
  EXPECT_EQ(a.to_json().dump(), b.to_json().dump());
  const auto restored = Bm25Index::from_json(a.to_json());
  EXPECT_EQ(restored, a);
  EXPECT_DOUBLE_EQ(restored.avg_doc_len(), a.avg_doc_len());
}

TEST(BuildIndex, EmptyCorpusIsAnError) { EXPECT_THROW(build_index(Corpus{}), DataError); }

TEST(Bm25Score, SingleDocumentHandValue) {
  // N=1, df=1, tf=1, len=avglen: idf = ln(1 + 0.5/1.5) = ln(4/3); tf part = 2.2/2.2.
  const auto idx = build_index(make_corpus({"x"}));
  EXPECT_NEAR(bm25_score({"x"}, 0, idx), std::log(4.0 / 3.0), 1e-12);
  EXPECT_NEAR(bm25_score({"x"}, 0, idx), 0.287682072451781, 1e-12);
}

TEST(Bm25Score, AbsentTermsContributeNothing) {
  const auto idx = build_index(make_corpus(kFiveDocs));
  EXPECT_EQ(bm25_score({"nope", "missing"}, 0, idx), 0.0);
  EXPECT_DOUBLE_EQ(bm25_score({"island", "nope"}, 0, idx), bm25_score({"island"}, 0, idx));
}

TEST(Bm25Score, UnknownDocIsAnError) {
  const auto idx = build_index(make_corpus(kFiveDocs));
  EXPECT_THROW(bm25_score({"the"}, 99, idx), DataError);
  EXPECT_THROW(bm25_score({"the"}, "nope", idx), DataError);
}

TEST(Bm25Score, TermFrequencySaturates) {
  // Same length (4 tokens) for each doc so only tf varies.
  const auto idx = build_index(make_corpus({"t p p p", "t t p p", "t t t t", "p p p p"}));
  const double s1 = bm25_score({"t"}, 0, idx);
  const double s2 = bm25_score({"t"}, 1, idx);
  const double s4 = bm25_score({"t"}, 2, idx);
  EXPECT_GT(s2, s1);
  EXPECT_GT(s4, s2);
  EXPECT_LT(s4 - s2, s2 - s1);
}

TEST(Bm25Score, FiveDocFixtureMatchesHandValues) {
  const auto idx = build_index(make_corpus(kFiveDocs));
  const std::vector<std::string> q = {"the", "island", "film"};
  for (std::size_t d = 0; d < 5; ++d) EXPECT_NEAR(bm25_score(q, d, idx), hqa_test::kFiveDocScores[d], 1e-9) << d;
}

TEST(Bm25Score, AdditiveOverDisjointQueryParts) {
  const auto idx = build_index(make_corpus(kFiveDocs));
  const std::vector<std::string> a = {"the", "film"};
  const std::vector<std::string> b = {"island", "island", "woods"};
  std::vector<std::string> ab = a;
  ab.insert(ab.end(), b.begin(), b.end());
  for (std::size_t d = 0; d < 5; ++d) {
    EXPECT_NEAR(bm25_score(ab, d, idx), bm25_score(a, d, idx) + bm25_score(b, d, idx), 1e-12);
  }
}

TEST(Retrieve, SingleDocCorpus) {
  const auto idx = build_index(make_corpus({"only doc here"}));
  const auto r = retrieve("doc", idx, 100);
  ASSERT_EQ(r.size(), 1u);
  EXPECT_EQ(r[0].candidate_id, "d0");
  EXPECT_EQ(r[0].rank, 1u);
}

TEST(Retrieve, TiesGoToLowerDocId) {
  const auto idx = build_index(make_corpus({"x y", "other", "x y"}));
  const auto r = retrieve("x", idx, 10);
  ASSERT_EQ(r.size(), 2u);
  EXPECT_EQ(r[0].candidate_id, "d0");
  EXPECT_EQ(r[1].candidate_id, "d2");
  EXPECT_EQ(r[0].score, r[1].score);
}

TEST(Retrieve, FiveDocFixtureOrdering) {
  const auto idx = build_index(make_corpus(kFiveDocs));
  const auto r = retrieve("The island, film?", idx, 10);
  std::vector<std::string> ids;
  for (const auto& c : r) ids.push_back(c.candidate_id);
  EXPECT_EQ(ids, (std::vector<std::string>{"d0", "d4", "d1", "d3", "d2"}));
  for (std::size_t i = 0; i < r.size(); ++i) EXPECT_EQ(r[i].rank, i + 1);
}

TEST(Retrieve, ZeroScoreDocumentsNeverReturned) {
  const auto idx = build_index(make_corpus(kFiveDocs));
  const auto r = retrieve("woods", idx, 100);
  ASSERT_EQ(r.size(), 1u);
  EXPECT_EQ(r[0].candidate_id, "d2");
  EXPECT_TRUE(retrieve("nothing matches", idx, 100).empty());
}

TEST(Retrieve, AgreesWithScoreAllThenSortOracle) {
  std::mt19937 rng(42);
  const std::vector<std::string> vocab = {"a", "b", "c", "d", "e", "f", "g", "h", "i", "j"};
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t n_docs = 1 + rng() % 40;
    std::vector<std::string> contents;
    NaiveBm25 oracle;
    for (std::size_t d = 0; d < n_docs; ++d) {
      std::vector<std::string> words;
      const std::size_t len = rng() % 12;
      for (std::size_t w = 0; w < len; ++w) words.push_back(vocab[rng() % vocab.size()]);
      contents.push_back(util::join(words, " "));
      oracle.docs.push_back(words);
    }
    if (std::all_of(oracle.docs.begin(), oracle.docs.end(), [](auto& d) { return d.empty(); })) continue;
    const auto idx = build_index(make_corpus(contents));
    std::vector<std::string> q;
    for (std::size_t i = 0, n = 1 + rng() % 4; i < n; ++i) q.push_back(vocab[rng() % vocab.size()]);
    const std::size_t k = 1 + rng() % 15;

    auto all = oracle.ranking(q);
    if (all.size() > k) all.resize(k);

    const auto got = retrieve(util::join(q, " "), idx, k);
    ASSERT_EQ(got.size(), all.size());
    for (std::size_t i = 0; i < got.size(); ++i) {
      EXPECT_NEAR(got[i].score, all[i].first, 1e-9);
      EXPECT_EQ(got[i].candidate_id, "d" + std::to_string(all[i].second));
      if (i > 0) {
        EXPECT_GE(got[i - 1].score, got[i].score);
      }
    }
  }
}

TEST(RunFile, FormatAndParse) {
  hybridqa::Run run = {{"q1", {"p#0", CandidateKind::textual, 1.5, 1}}, {"q1", {"t#0", CandidateKind::tabular, 0.25, 1}}};
  const auto text = format_run(run);
  EXPECT_EQ(text, "q1 p#0 1 1.500000 textual\nq1 t#0 1 0.250000 tabular\n");
  const auto back = parse_run(text);
  ASSERT_EQ(back.size(), 2u);
  EXPECT_EQ(back[1].candidate.kind, CandidateKind::tabular);
  EXPECT_THROW(parse_run("q1 only three\n"), DataError);
}
