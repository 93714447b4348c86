#ifndef HYBRIDQA_CORPUS_HPP
#define HYBRIDQA_CORPUS_HPP

#include <cstddef>
#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include "json.hpp"

#include "hybridqa/common.hpp"

namespace hybridqa {

struct TextPassage {
  std::string id;
  std::string title;
  std::string content;
  std::string source_doc;

  bool operator==(const TextPassage&) const = default;
};

enum class ColumnType { text, real };

struct Table {
  std::string id;
  std::string title;  // defaults to id
  std::vector<std::string> header;
  std::vector<ColumnType> column_types;
  std::vector<std::vector<std::string>> rows;

  bool operator==(const Table&) const = default;
};

// Inclusive 0-based row range; `empty` marks a header-only chunk.
struct RowSpan {
  std::size_t first = 0;
  std::size_t last = 0;
  bool empty = true;

  bool operator==(const RowSpan&) const = default;
};

struct TabularPassage {
  std::string id;
  std::string table_id;
  std::string content;
  RowSpan row_span;

  bool operator==(const TabularPassage&) const = default;
};

// A retrievable unit as the rest of the pipeline sees it. Tabular candidates
// carry the table id as their title.
struct Candidate {
  std::string id;
  CandidateKind kind = CandidateKind::textual;
  std::string title;
  std::string content;

  bool operator==(const Candidate&) const = default;
};

inline Candidate to_candidate(const TextPassage& p) {
  return {p.id, CandidateKind::textual, p.title, p.content};
}

inline Candidate to_candidate(const TabularPassage& p) {
  return {p.id, CandidateKind::tabular, p.table_id, p.content};
}

struct SplitOptions {
  std::size_t max_words = 100;
  std::size_t overlap = 0;
};

// Windows of at most max_words whitespace tokens advancing by
// max_words - overlap. Passage ids are "<source_doc>#<ordinal>".
inline std::vector<TextPassage> split_passage(std::string_view text, std::string_view title,
                                              SplitOptions opts = {},
                                              std::string_view source_doc = {}) {
  if (opts.max_words == 0) throw std::invalid_argument("split_passage: max_words must be >= 1");
  if (opts.overlap >= opts.max_words) {
    throw std::invalid_argument("split_passage: overlap must be < max_words");
  }
  const auto words = util::split_words(text);
  std::vector<TextPassage> out;
  if (words.empty()) return out;

  const std::size_t stride = opts.max_words - opts.overlap;
  for (std::size_t start = 0;; start += stride) {
    const std::size_t end = std::min(words.size(), start + opts.max_words);
    std::vector<std::string_view> window(words.begin() + static_cast<std::ptrdiff_t>(start),
                                         words.begin() + static_cast<std::ptrdiff_t>(end));
    TextPassage p;
    p.id = std::string(source_doc) + "#" + std::to_string(out.size());
    p.title = std::string(title);
    p.content = util::join(window, " ");
    p.source_doc = std::string(source_doc);
    out.push_back(std::move(p));
    if (end == words.size()) break;
  }
  return out;
}

namespace detail {

inline std::string header_block(const Table& t) {
  return "[header] " + util::join(t.header, " ; ");
}

inline std::string row_block(const std::vector<std::string>& row) {
  return "[row] " + util::join(row, " ; ");
}

}  // namespace detail

inline void validate_table(const Table& t) {
  if (t.id.empty()) throw DataError("table with empty id");
  if (t.header.empty()) throw DataError("table '" + t.id + "' has an empty header");
  for (const auto& h : t.header) {
    if (util::trim(h).empty()) throw DataError("table '" + t.id + "' has an empty column name");
  }
  if (!t.column_types.empty() && t.column_types.size() != t.header.size()) {
    throw DataError("table '" + t.id + "': " + std::to_string(t.column_types.size()) +
                    " types for " + std::to_string(t.header.size()) + " columns");
  }
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    if (t.rows[r].size() != t.header.size()) {
      throw DataError("table '" + t.id + "' row " + std::to_string(r) + " has " +
                      std::to_string(t.rows[r].size()) + " cells, header has " +
                      std::to_string(t.header.size()));
    }
  }
}

// Flattens a table into "[header] h1 ; h2 [row] v1 ; v2 ..." chunks. The
// word budget covers the whole chunk, markers and separators included; each
// chunk repeats the header and takes the longest run of remaining rows that
// fits. A row that cannot fit even alone becomes its own chunk.
inline std::vector<TabularPassage> flatten_table(const Table& t, std::size_t max_words = 100) {
  validate_table(t);
  const std::string header = detail::header_block(t);
  const std::size_t header_words = util::count_words(header);

  std::vector<TabularPassage> chunks;
  auto emit = [&](std::string content, RowSpan span) {
    TabularPassage p;
    p.id = t.id + "#" + std::to_string(chunks.size());
    p.table_id = t.id;
    p.content = std::move(content);
    p.row_span = span;
    chunks.push_back(std::move(p));
  };

  if (t.rows.empty()) {
    emit(header, RowSpan{});
    return chunks;
  }

  std::size_t r = 0;
  while (r < t.rows.size()) {
    std::string content = header;
    std::size_t words = header_words;
    const std::size_t first = r;
    while (r < t.rows.size()) {
      const std::string row = detail::row_block(t.rows[r]);
      const std::size_t row_words = util::count_words(row);
      if (r > first && words + row_words > max_words) break;
      content += ' ';
      content += row;
      words += row_words;
      ++r;
    }
    emit(std::move(content), RowSpan{first, r - 1, false});
  }
  return chunks;
}

// Immutable id-addressable collection of candidates of a single kind.
class Corpus {
public:
  Corpus() = default;

  explicit Corpus(std::vector<Candidate> candidates) : candidates_(std::move(candidates)) {
    for (std::size_t i = 0; i < candidates_.size(); ++i) {
      auto [it, inserted] = by_id_.emplace(candidates_[i].id, i);
      if (!inserted) throw DataError("duplicate candidate id '" + candidates_[i].id + "'");
    }
  }

  [[nodiscard]] std::size_t size() const { return candidates_.size(); }
  [[nodiscard]] bool empty() const { return candidates_.empty(); }
  [[nodiscard]] const std::vector<Candidate>& candidates() const { return candidates_; }
  [[nodiscard]] const Candidate& operator[](std::size_t i) const { return candidates_.at(i); }

  [[nodiscard]] const Candidate* find(std::string_view id) const {
    auto it = by_id_.find(std::string(id));
    return it == by_id_.end() ? nullptr : &candidates_[it->second];
  }

  [[nodiscard]] const Candidate& at(std::string_view id) const {
    if (const auto* c = find(id)) return *c;
    throw DataError("unknown candidate id '" + std::string(id) + "'");
  }

private:
  std::vector<Candidate> candidates_;
  std::unordered_map<std::string, std::size_t> by_id_;
};

class TableStore {
public:
  TableStore() = default;

  explicit TableStore(std::vector<Table> tables) {
    for (auto& t : tables) add(std::move(t));
  }

  void add(Table t) {
    validate_table(t);
    if (t.title.empty()) t.title = t.id;
    const std::string id = t.id;
    auto [it, inserted] = tables_.emplace(id, std::move(t));
    if (!inserted) throw DataError("duplicate table id '" + id + "'");
    order_.push_back(id);
  }

  [[nodiscard]] const Table* find(std::string_view id) const {
    auto it = tables_.find(std::string(id));
    return it == tables_.end() ? nullptr : &it->second;
  }

  [[nodiscard]] std::size_t size() const { return tables_.size(); }

  // Tables in insertion order.
  [[nodiscard]] std::vector<const Table*> tables() const {
    std::vector<const Table*> out;
    out.reserve(order_.size());
    for (const auto& id : order_) out.push_back(&tables_.at(id));
    return out;
  }

private:
  std::map<std::string, Table> tables_;
  std::vector<std::string> order_;
};

// ---------------------------------------------------------------------------
// JSONL ingestion

namespace detail {

inline std::string cell_to_string(const nlohmann::json& v) {
  if (v.is_string()) return v.get<std::string>();
  if (v.is_number()) return util::format_number(v.get<double>());
  if (v.is_boolean()) return v.get<bool>() ? "true" : "false";
  if (v.is_null()) return "";
  throw DataError("table cell must be a scalar");
}

inline const nlohmann::json& require(const nlohmann::json& obj, const char* key) {
  auto it = obj.find(key);
  if (it == obj.end()) throw DataError(std::string("missing field '") + key + "'");
  return *it;
}

inline std::string require_string(const nlohmann::json& obj, const char* key) {
  const auto& v = require(obj, key);
  if (!v.is_string()) throw DataError(std::string("field '") + key + "' must be a string");
  return v.get<std::string>();
}

// Calls fn(json, line_no) for each non-blank line; wraps failures with the
// file and line number.
template <typename Fn>
void for_each_jsonl(const std::filesystem::path& path, Fn&& fn) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open '" + path.string() + "'");
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (util::trim(line).empty()) continue;
    try {
      fn(nlohmann::json::parse(line), line_no);
    } catch (const nlohmann::json::exception& e) {
      throw DataError(path.string() + ":" + std::to_string(line_no) + ": " + e.what());
    } catch (const DataError& e) {
      throw DataError(path.string() + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
}

}  // namespace detail

inline ColumnType parse_column_type(std::string_view s) {
  if (s == "text") return ColumnType::text;
  if (s == "real") return ColumnType::real;
  throw DataError("unknown column type '" + std::string(s) + "'");
}

inline std::string_view to_string(ColumnType t) { return t == ColumnType::text ? "text" : "real"; }

inline Table table_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw DataError("table record must be a JSON object");
  Table t;
  t.id = detail::require_string(j, "id");
  t.title = j.contains("title") && j["title"].is_string() ? j["title"].get<std::string>() : t.id;
  for (const auto& h : detail::require(j, "header")) t.header.push_back(detail::cell_to_string(h));
  if (auto it = j.find("types"); it != j.end()) {
    for (const auto& ty : *it) t.column_types.push_back(parse_column_type(ty.get<std::string>()));
  }
  for (const auto& row : detail::require(j, "rows")) {
    if (!row.is_array()) throw DataError("table '" + t.id + "': row must be an array");
    std::vector<std::string> cells;
    cells.reserve(row.size());
    for (const auto& c : row) cells.push_back(detail::cell_to_string(c));
    t.rows.push_back(std::move(cells));
  }
  validate_table(t);
  return t;
}

inline nlohmann::json to_json(const Table& t) {
  nlohmann::json types = nlohmann::json::array();
  for (auto ty : t.column_types) types.push_back(std::string(to_string(ty)));
  return {{"id", t.id}, {"title", t.title}, {"header", t.header}, {"types", types}, {"rows", t.rows}};
}

inline TextPassage passage_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw DataError("passage record must be a JSON object");
  TextPassage p;
  p.id = detail::require_string(j, "id");
  p.title = detail::require_string(j, "title");
  p.content = detail::require_string(j, "content");
  p.source_doc = j.contains("source_doc") ? j["source_doc"].get<std::string>() : p.id;
  if (p.id.empty()) throw DataError("passage with empty id");
  return p;
}

inline nlohmann::json to_json(const TextPassage& p) {
  return {{"id", p.id}, {"title", p.title}, {"content", p.content}, {"source_doc", p.source_doc}};
}

inline nlohmann::json to_json(const TabularPassage& p) {
  nlohmann::json span = nlohmann::json::array();
  if (!p.row_span.empty) span = {p.row_span.first, p.row_span.last};
  return {{"id", p.id}, {"table_id", p.table_id}, {"content", p.content}, {"row_span", span}};
}

inline TabularPassage tabular_passage_from_json(const nlohmann::json& j) {
  TabularPassage p;
  p.id = detail::require_string(j, "id");
  p.table_id = detail::require_string(j, "table_id");
  p.content = detail::require_string(j, "content");
  const auto& span = detail::require(j, "row_span");
  if (span.size() == 2) p.row_span = {span[0].get<std::size_t>(), span[1].get<std::size_t>(), false};
  return p;
}

// Loads a passages file. Passages longer than opts.max_words are split and
// receive "<id>#<n>" ids; shorter ones keep their id.
inline std::vector<TextPassage> load_passages(const std::filesystem::path& path, SplitOptions opts = {}) {
  std::vector<TextPassage> out;
  std::unordered_map<std::string, std::size_t> seen;
  detail::for_each_jsonl(path, [&](const nlohmann::json& j, std::size_t line_no) {
    auto p = passage_from_json(j);
    if (!seen.emplace(p.id, line_no).second) throw DataError("duplicate passage id '" + p.id + "'");
    if (util::count_words(p.content) <= opts.max_words) {
      out.push_back(std::move(p));
      return;
    }
    for (auto& piece : split_passage(p.content, p.title, opts, p.id)) {
      piece.source_doc = p.source_doc;
      out.push_back(std::move(piece));
    }
  });
  return out;
}

inline TableStore load_tables(const std::filesystem::path& path) {
  TableStore store;
  detail::for_each_jsonl(path, [&](const nlohmann::json& j, std::size_t) {
    store.add(table_from_json(j));
  });
  return store;
}

inline std::vector<TabularPassage> load_tabular_passages(const std::filesystem::path& path) {
  std::vector<TabularPassage> out;
  detail::for_each_jsonl(path, [&](const nlohmann::json& j, std::size_t) {
    out.push_back(tabular_passage_from_json(j));
  });
  return out;
}

inline Corpus make_text_corpus(const std::vector<TextPassage>& passages) {
  std::vector<Candidate> c;
  c.reserve(passages.size());
  for (const auto& p : passages) c.push_back(to_candidate(p));
  return Corpus(std::move(c));
}

inline Corpus make_table_corpus(const std::vector<TabularPassage>& passages) {
  std::vector<Candidate> c;
  c.reserve(passages.size());
  for (const auto& p : passages) c.push_back(to_candidate(p));
  return Corpus(std::move(c));
}

inline std::vector<TabularPassage> flatten_all(const TableStore& store, std::size_t max_words = 100) {
  std::vector<TabularPassage> out;
  for (const auto* t : store.tables()) {
    for (auto& p : flatten_table(*t, max_words)) out.push_back(std::move(p));
  }
  return out;
}

}  // namespace hybridqa

#endif  // HYBRIDQA_CORPUS_HPP
