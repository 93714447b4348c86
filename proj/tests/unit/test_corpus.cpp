#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <gtest/gtest.h>

#include "hybridqa/corpus.hpp"
#include "support/fixtures.hpp"
#include "unit/test_util.hpp"

using namespace hybridqa;

namespace {

std::string numbered_words(std::size_t n) {
  std::string s;
  for (std::size_t i = 1; i <= n; ++i) {
    if (i > 1) s += ' ';
    s += "w" + std::to_string(i);
  }
  return s;
}

std::vector<std::string> words_of(const std::string& s) {
  std::istringstream in(s);
  std::vector<std::string> out;
  for (std::string w; in >> w;) out.push_back(w);
  return out;
}

}  // namespace

TEST(SplitPassage, ShortTextIsOnePassage) {
  const auto ps = split_passage(numbered_words(50), "T");
  ASSERT_EQ(ps.size(), 1u);
  EXPECT_EQ(words_of(ps[0].content).size(), 50u);
  EXPECT_EQ(ps[0].title, "T");
}

TEST(SplitPassage, NoOverlapFillsBudgets) {
  const auto ps = split_passage(numbered_words(250), "T", {100, 0});
  ASSERT_EQ(ps.size(), 3u);
  EXPECT_EQ(words_of(ps[0].content).size(), 100u);
  EXPECT_EQ(words_of(ps[1].content).size(), 100u);
  EXPECT_EQ(words_of(ps[2].content).size(), 50u);
}

TEST(SplitPassage, OverlapRepeatsSharedWindow) {
  // Hand-enumerated: window 1 = words 1..100, window 2 = words 51..150.
  const auto ps = split_passage(numbered_words(150), "T", {100, 50});
  ASSERT_EQ(ps.size(), 2u);
  const auto a = words_of(ps[0].content);
  const auto b = words_of(ps[1].content);
  EXPECT_EQ(a.front(), "w1");
  EXPECT_EQ(a.back(), "w100");
  EXPECT_EQ(b.front(), "w51");
  EXPECT_EQ(b.back(), "w150");
  for (int i = 51; i <= 100; ++i) {
    const auto w = "w" + std::to_string(i);
    EXPECT_NE(std::find(a.begin(), a.end(), w), a.end());
    EXPECT_NE(std::find(b.begin(), b.end(), w), b.end());
  }
}

TEST(SplitPassage, EmptyTextGivesNoPassages) {
  EXPECT_TRUE(split_passage("", "T").empty());
  EXPECT_TRUE(split_passage("   \n ", "T").empty());
}

TEST(SplitPassage, RejectsBadBudgets) {
  EXPECT_THROW(split_passage("a b", "T", {0, 0}), std::invalid_argument);
  EXPECT_THROW(split_passage("a b", "T", {5, 5}), std::invalid_argument);
}

TEST(SplitPassage, ZeroOverlapPartitionsWordSequence) {
  std::mt19937 rng(7);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t n = rng() % 500;
    const std::size_t max_words = 1 + rng() % 120;
    const auto text = numbered_words(n);
    std::vector<std::string> rebuilt;
    for (const auto& p : split_passage(text, "t", {max_words, 0})) {
      const auto w = words_of(p.content);
      ASSERT_LE(w.size(), max_words);
      rebuilt.insert(rebuilt.end(), w.begin(), w.end());
    }
    EXPECT_EQ(rebuilt, words_of(text));
  }
}

TEST(SplitPassage, OverlapReconstructsAfterDroppingRepeats) {
  std::mt19937 rng(11);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t n = 1 + rng() % 400;
    const std::size_t max_words = 2 + rng() % 100;
    const std::size_t overlap = rng() % max_words;
    const auto text = numbered_words(n);
    const auto ps = split_passage(text, "t", {max_words, overlap});
    std::vector<std::string> rebuilt;
    for (std::size_t i = 0; i < ps.size(); ++i) {
      auto w = words_of(ps[i].content);
      ASSERT_LE(w.size(), max_words);
      // Each later window restarts `overlap` words back, unless the final
      // window is shorter than that.
      const std::size_t skip = i == 0 ? 0 : std::min(overlap, w.size());
      rebuilt.insert(rebuilt.end(), w.begin() + static_cast<std::ptrdiff_t>(skip), w.end());
    }
    EXPECT_EQ(rebuilt, words_of(text)) << "n=" << n << " max=" << max_words << " overlap=" << overlap;
  }
}

TEST(FlattenTable, FilmTableMatchesReferenceString) {
  const auto chunks = flatten_table(hqa_test::film_table());
  ASSERT_EQ(chunks.size(), 1u);
  EXPECT_EQ(chunks[0].content, hqa_test::film_flattened());
  EXPECT_EQ(chunks[0].table_id, "film");
  EXPECT_EQ(chunks[0].row_span, (RowSpan{0, 1, false}));
}

TEST(FlattenTable, ZeroRowsGivesHeaderOnlyChunk) {
  Table t;
  t.id = "t";
  t.header = {"A", "B"};
  const auto chunks = flatten_table(t);
  ASSERT_EQ(chunks.size(), 1u);
  EXPECT_EQ(chunks[0].content, "[header] A ; B");
  EXPECT_TRUE(chunks[0].row_span.empty);
}

TEST(FlattenTable, FortyRowsSplitIntoFourChunksOfTen) {
  // Header block "[header] a ; b b ; c c ; d" is 10 words; each row block
  // "[row] x x ; y ; z ; w" is 9 words, so header + 10 rows = 100 exactly.
  Table t;
  t.id = "big";
  t.header = {"a", "b b", "c c", "d"};
  for (int r = 0; r < 40; ++r) {
    const auto tag = std::to_string(r);
    t.rows.push_back({"x" + tag + " x", "y", "z", "w"});
  }
  ASSERT_EQ(words_of("[header] a ; b b ; c c ; d").size(), 10u);
  ASSERT_EQ(words_of("[row] x0 x ; y ; z ; w").size(), 9u);

  const auto chunks = flatten_table(t, 100);
  ASSERT_EQ(chunks.size(), 4u);
  for (std::size_t i = 0; i < 4; ++i) {
    EXPECT_EQ(chunks[i].row_span, (RowSpan{i * 10, i * 10 + 9, false}));
    EXPECT_EQ(words_of(chunks[i].content).size(), 100u);
    EXPECT_EQ(chunks[i].content.rfind("[header] a ; b b ; c c ; d [row] ", 0), 0u);
    EXPECT_EQ(chunks[i].id, "big#" + std::to_string(i));
  }
}

TEST(FlattenTable, OverBudgetRowStandsAlone) {
  Table t;
  t.id = "wide";
  t.header = {"A"};
  t.rows = {{"short"}, {numbered_words(30)}, {"tail"}};
  const auto chunks = flatten_table(t, 10);
  ASSERT_EQ(chunks.size(), 3u);
  EXPECT_EQ(chunks[1].row_span, (RowSpan{1, 1, false}));
  EXPECT_GT(words_of(chunks[1].content).size(), 10u);
}

TEST(FlattenTable, RejectsRaggedRows) {
  Table t;
  t.id = "bad";
  t.header = {"A", "B"};
  t.rows = {{"1"}};
  EXPECT_THROW(flatten_table(t), DataError);
}

TEST(FlattenTable, RandomTablesKeepHeaderAndRowsExactlyOnce) {
  std::mt19937 rng(3);
  auto word = [&] { return std::string(1, static_cast<char>('a' + rng() % 26)) + std::to_string(rng() % 100); };
  auto cell = [&] {
    std::string c = word();
    for (unsigned k = rng() % 4; k > 0; --k) c += " " + word();
    return c;
  };
  for (int trial = 0; trial < 300; ++trial) {
    Table t;
    t.id = "r" + std::to_string(trial);
    const std::size_t cols = 1 + rng() % 6;
    for (std::size_t c = 0; c < cols; ++c) t.header.push_back(cell());
    const std::size_t rows = rng() % 30;
    for (std::size_t r = 0; r < rows; ++r) {
      std::vector<std::string> row;
      for (std::size_t c = 0; c < cols; ++c) row.push_back(cell());
      t.rows.push_back(row);
    }
    const std::size_t budget = 5 + rng() % 100;
    const std::string header = "[header] " + util::join(t.header, " ; ");
    std::vector<std::string> seen_rows;
    for (const auto& chunk : flatten_table(t, budget)) {
      ASSERT_EQ(chunk.content.rfind(header, 0), 0u);
      std::string rest = chunk.content.substr(header.size());
      std::size_t pos = 0;
      while ((pos = rest.find(" [row] ", pos)) != std::string::npos) {
        const std::size_t start = pos + 7;
        const std::size_t next = rest.find(" [row] ", start);
        seen_rows.push_back(rest.substr(start, next == std::string::npos ? std::string::npos : next - start));
        pos = start;
      }
      if (!chunk.row_span.empty && chunk.row_span.first != chunk.row_span.last) {
        EXPECT_LE(words_of(chunk.content).size(), budget);
      }
    }
    ASSERT_EQ(seen_rows.size(), t.rows.size());
    for (std::size_t r = 0; r < rows; ++r) EXPECT_EQ(seen_rows[r], util::join(t.rows[r], " ; "));
  }
}

TEST(Ingest, LoadsValidPassages) {
  hqa_test::TempDir dir;
  const auto path = dir.write("p.jsonl",
                              R"({"id":"p1","title":"A","content":"one two","source_doc":"d1"})"
                              "\n"
                              R"({"id":"p2","title":"B","content":"three","source_doc":"d2"})"
                              "\n");
  const auto ps = load_passages(path);
  ASSERT_EQ(ps.size(), 2u);
  EXPECT_EQ(ps[1], (TextPassage{"p2", "B", "three", "d2"}));
  EXPECT_EQ(make_text_corpus(ps).size(), 2u);
}

TEST(Ingest, SplitsLongPassages) {
  hqa_test::TempDir dir;
  const auto path = dir.write("p.jsonl", R"({"id":"long","title":"L","content":")" + numbered_words(120) +
                                             R"(","source_doc":"d"})" "\n");
  const auto ps = load_passages(path, {100, 0});
  ASSERT_EQ(ps.size(), 2u);
  EXPECT_EQ(ps[0].id, "long#0");
  EXPECT_EQ(ps[1].id, "long#1");
  EXPECT_EQ(ps[1].source_doc, "d");
}

TEST(Ingest, MalformedRecordNamesLine) {
  hqa_test::TempDir dir;
  const auto path = dir.write("p.jsonl",
                              R"({"id":"p1","title":"A","content":"x"})"
                              "\n{not json\n");
  try {
    load_passages(path);
    FAIL() << "expected DataError";
  } catch (const DataError& e) {
    EXPECT_NE(std::string(e.what()).find(":2:"), std::string::npos) << e.what();
  }
}

TEST(Ingest, RaggedTableRowIsRejected) {
  hqa_test::TempDir dir;
  const auto path = dir.write("t.jsonl", R"({"id":"t1","header":["A","B"],"types":["text","text"],"rows":[["x"]]})" "\n");
  EXPECT_THROW(load_tables(path), DataError);
}

TEST(Ingest, DuplicateTableIdIsNamed) {
  hqa_test::TempDir dir;
  const auto path = dir.write("t.jsonl",
                              R"({"id":"t1","header":["A"],"types":["text"],"rows":[["x"]]})"
                              "\n"
                              R"({"id":"t1","header":["A"],"types":["text"],"rows":[["y"]]})"
                              "\n");
  try {
    load_tables(path);
    FAIL() << "expected DataError";
  } catch (const DataError& e) {
    EXPECT_NE(std::string(e.what()).find("t1"), std::string::npos);
    EXPECT_NE(std::string(e.what()).find(":2:"), std::string::npos);
  }
}

TEST(Ingest, NumericCellsAreStringified) {
  hqa_test::TempDir dir;
  const auto path = dir.write("t.jsonl", R"({"id":"t","header":["A","B"],"types":["real","real"],"rows":[[3.0,2.5]]})" "\n");
  const auto store = load_tables(path);
  ASSERT_NE(store.find("t"), nullptr);
  EXPECT_EQ(store.find("t")->rows[0], (std::vector<std::string>{"3", "2.5"}));
  EXPECT_EQ(store.find("t")->title, "t");
}
