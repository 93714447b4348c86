#ifndef HYBRIDQA_TEST_FIXTURES_HPP
#define HYBRIDQA_TEST_FIXTURES_HPP

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "hybridqa/corpus.hpp"
#include "hybridqa/retrieval.hpp"

namespace hqa_test {

// SQL strings quoted verbatim from published model outputs and gold queries.
inline const std::vector<std::string>& quoted_sql() {
  static const std::vector<std::string> q = {
      "SELECT Party FROM table_1-1342218-17 WHERE District = \"Kentucky 5\"",
      "SELECT COUNT(Wins) FROM table_2-18017970-2 WHERE Goals against < 30 AND Goals for > 25 AND Draws > 5",
      "SELECT Home ground(s) FROM table_2-17982112-1 WHERE Nickname = \"swans\"",
      "SELECT Control FROM table_2-16041438-1 WHERE Conservative Party = \"10 (+5)\"",
      "SELECT Date FROM table_2-11902580-6 WHERE Decision = \"niittymaki\" AND Attendance > \"19,207\" AND Record = "
      "\"28-17-5\"",
      "SELECT College(s) played for FROM table_3401335-11 WHERE Player = \"johnny manziel\"",
      "SELECT Original artist FROM table_30996994-1 WHERE Song (original artist) = \"you re going to love me\"",
      "SELECT Vocalist FROM table_2144389-13 WHERE Title = \"pokémon theme\" AND Episodes used 1 = \"pokémon theme\"",
      "SELECT Actor FROM table_6994109-1 WHERE Role = \"raquel\" AND Film/Show = \"only fools and horses\"",
      "SELECT Condition FROM table_1-14006-1 WHERE Partial thromboplastin time = \"Unaffected\" AND Platelet count = "
      "\"Unaffected\" AND Prothrombin time = \"Unaffected\"",
      "SELECT COUNT(Gold) FROM table_2-15428689-2 WHERE Silver > 20 AND Bronze > 135",
      "SELECT MAX(Rd) FROM table_1-10706961-2 WHERE Pole Position = \"Tom Sneva\"",
      "SELECT AVG(ERP W) FROM table_2-14208614-1 WHERE Call sign = \"w237br\"",
      "SELECT Release Year FROM table_30576767-1 WHERE Title = \"amnesia: the dark descent\"",
      "SELECT COUNT(Episodes) FROM table_6358299-9 WHERE Title = \"dragon ball z\"",
      "SELECT Cast FROM table_22266670-7 WHERE Program = \"law & order: special victims unit\"",
      "SELECT Fastest Lap FROM table_1-1132600-3 WHERE Grand Prix = \"Belgian Grand Prix\"",
  };
  return q;
}

inline hybridqa::Table film_table() {
  hybridqa::Table t;
  t.id = "film";
  t.header = {"Country", "Film title", "Language", "Director"};
  t.rows = {{"Argentina", "The Island", "Spanish", "Alejandro"},
            {"Austria", "Tales from the Vienna Woods", "German", "Maximilian"}};
  return t;
}

inline const char* film_flattened() {
  return "[header] Country ; Film title ; Language ; Director [row] Argentina ; The Island ; Spanish ; "
         "Alejandro [row] Austria ; Tales from the Vienna Woods ; German ; Maximilian";
}

inline const std::vector<std::string> kFiveDocs = {"the island film", "island island spanish film director",
                                                   "tales from the vienna woods", "german film",
                                                   "the the the island"};

// Frozen from an independent evaluation of the formula for {"the", "island", "film"}.
inline const std::vector<double> kFiveDocScores = {1.7693759474313868, 1.1579979226850414, 0.47733164683530355,
                                                   0.668547588445885, 1.3651843845725709};

inline hybridqa::Corpus make_corpus(const std::vector<std::string>& contents) {
  std::vector<hybridqa::Candidate> cs;
  for (std::size_t i = 0; i < contents.size(); ++i) {
    cs.push_back({"d" + std::to_string(i), hybridqa::CandidateKind::textual, "", contents[i]});
  }
  return hybridqa::Corpus(std::move(cs));
}

// Reference BM25: re-counts tf/df by scanning every document.
struct NaiveBm25 {
  std::vector<std::vector<std::string>> docs;
  double k1 = 1.2;
  double b = 0.75;

  double score(const std::vector<std::string>& query, std::size_t d) const {
    double total_len = 0;
    for (const auto& doc : docs) total_len += static_cast<double>(doc.size());
    const double avg = total_len / static_cast<double>(docs.size());
    const double n = static_cast<double>(docs.size());
    double s = 0.0;
    for (const auto& t : query) {
      const double tf = static_cast<double>(std::count(docs[d].begin(), docs[d].end(), t));
      if (tf == 0) continue;
      double df = 0;
      for (const auto& doc : docs) df += std::find(doc.begin(), doc.end(), t) != doc.end() ? 1 : 0;
      const double idf = std::log(1.0 + (n - df + 0.5) / (df + 0.5));
      s += idf * tf * (k1 + 1) / (tf + k1 * (1 - b + b * static_cast<double>(docs[d].size()) / avg));
    }
    return s;
  }

  // Every positive-scoring document, best first, ties to the lower ordinal.
  std::vector<std::pair<double, std::size_t>> ranking(const std::vector<std::string>& query) const {
    std::vector<std::pair<double, std::size_t>> all;
    for (std::size_t d = 0; d < docs.size(); ++d) {
      const double s = score(query, d);
      if (s > 0) all.emplace_back(s, d);
    }
    std::sort(all.begin(), all.end(),
              [](auto& x, auto& y) { return x.first != y.first ? x.first > y.first : x.second < y.second; });
    return all;
  }
};

}  // namespace hqa_test

#endif  // HYBRIDQA_TEST_FIXTURES_HPP
