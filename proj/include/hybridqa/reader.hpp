#ifndef HYBRIDQA_READER_HPP
#define HYBRIDQA_READER_HPP

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

#include "hybridqa/common.hpp"
#include "hybridqa/corpus.hpp"
#include "hybridqa/sql.hpp"

namespace hybridqa {

inline constexpr std::size_t kDefaultBeamSize = 3;
inline constexpr std::size_t kDefaultContextTokens = 150;

// Keeps the first max_tokens whitespace tokens, re-joined by single spaces.
inline std::string truncate_tokens(std::string_view text, std::size_t max_tokens) {
  auto words = util::split_words(text);
  if (words.size() > max_tokens) words.resize(max_tokens);
  return util::join(words, " ");
}

inline std::string serialize_candidate(std::string_view question, const Candidate& c,
                                       std::size_t max_context_tokens = kDefaultContextTokens) {
  const bool text = c.kind == CandidateKind::textual;
  std::string out = "question: ";
  out += question;
  out += text ? " [text title] " : " [table title] ";
  out += c.title;
  out += text ? " [text content] " : " [table content] ";
  out += truncate_tokens(c.content, max_context_tokens);
  return out;
}

// ---------------------------------------------------------------------------
// Training targets

struct TrainingExample {
  std::vector<std::string> answers;
  std::optional<sql::SqlQuery> sql;
};

// One "answer: ..." target (sampled from the gold list) plus one "sql: ..."
// target when gold SQL exists.
inline std::vector<std::string> make_targets(const TrainingExample& ex, std::uint64_t seed = 0) {
  if (ex.answers.empty() && !ex.sql) throw DataError("example has neither an answer nor SQL");
  std::vector<std::string> targets;
  if (!ex.answers.empty()) {
    std::mt19937_64 rng(seed);
    const std::size_t pick = static_cast<std::size_t>(rng() % ex.answers.size());
    targets.push_back("answer: " + ex.answers[pick]);
  }
  if (ex.sql) targets.push_back("sql: " + sql::render_sql(*ex.sql));
  return targets;
}

// ---------------------------------------------------------------------------
// Generation

enum class OutputPrefix { answer, sql, malformed };

inline std::string_view to_string(OutputPrefix p) {
  switch (p) {
    case OutputPrefix::answer: return "answer";
    case OutputPrefix::sql: return "sql";
    case OutputPrefix::malformed: return "malformed";
  }
  return "malformed";
}

inline OutputPrefix parse_prefix(std::string_view s) {
  if (s == "answer") return OutputPrefix::answer;
  if (s == "sql") return OutputPrefix::sql;
  if (s == "malformed") return OutputPrefix::malformed;
  throw DataError("unknown output prefix '" + std::string(s) + "'");
}

struct GenerationOutput {
  OutputPrefix prefix = OutputPrefix::malformed;
  std::string payload;
  double beam_score = 0.0;
  std::size_t beam_rank = 0;

  bool operator==(const GenerationOutput&) const = default;
};

// Total: every string maps to exactly one prefix. Malformed outputs keep the
// raw text as payload.
inline std::pair<OutputPrefix, std::string> classify_output(std::string_view raw) {
  constexpr std::string_view kAnswer = "answer: ";
  constexpr std::string_view kSql = "sql: ";
  if (raw.substr(0, kAnswer.size()) == kAnswer) return {OutputPrefix::answer, std::string(raw.substr(kAnswer.size()))};
  if (raw.substr(0, kSql.size()) == kSql) return {OutputPrefix::sql, std::string(raw.substr(kSql.size()))};
  return {OutputPrefix::malformed, std::string(raw)};
}

struct GenerationRequest {
  std::string question_id;  // not sent over the wire; stubs key on it
  std::string question;
  std::vector<std::string> contexts;
  std::size_t beam_size = kDefaultBeamSize;
  std::size_t max_context_tokens = kDefaultContextTokens;
};

struct RawOutput {
  std::string text;
  double score = 0.0;
};

class Generator {
public:
  virtual ~Generator() = default;
  virtual std::vector<RawOutput> generate(const GenerationRequest& request) = 0;
};

// Replays per-question outputs from a fixtures file:
//   {"qid": ..., "outputs": [{"text": ..., "score": ...}, ...]}
class OracleStubGenerator final : public Generator {
public:
  explicit OracleStubGenerator(std::map<std::string, std::vector<RawOutput>> fixtures)
      : fixtures_(std::move(fixtures)) {}

  static OracleStubGenerator from_file(const std::filesystem::path& path) {
    std::map<std::string, std::vector<RawOutput>> fixtures;
    detail::for_each_jsonl(path, [&](const nlohmann::json& j, std::size_t) {
      std::vector<RawOutput> outs;
      for (const auto& o : detail::require(j, "outputs")) {
        outs.push_back({o.at("text").get<std::string>(), o.value("score", 0.0)});
      }
      const auto qid = detail::require_string(j, "qid");
      if (!fixtures.emplace(qid, std::move(outs)).second) throw DataError("duplicate fixture qid '" + qid + "'");
    });
    return OracleStubGenerator(std::move(fixtures));
  }

  std::vector<RawOutput> generate(const GenerationRequest& request) override {
    auto it = fixtures_.find(request.question_id);
    if (it == fixtures_.end()) throw DataError("no stub fixture for question '" + request.question_id + "'");
    return it->second;
  }

private:
  std::map<std::string, std::vector<RawOutput>> fixtures_;
};

// Emits the same text for every beam with scores 0, -1, -2, ...
class ConstantGenerator final : public Generator {
public:
  explicit ConstantGenerator(std::string text) : text_(std::move(text)) {}

  std::vector<RawOutput> generate(const GenerationRequest& request) override {
    std::vector<RawOutput> out;
    for (std::size_t i = 0; i < request.beam_size; ++i) out.push_back({text_, -static_cast<double>(i)});
    return out;
  }

private:
  std::string text_;
};

// Beam i answers with the content of context i (the last context repeats if
// there are fewer contexts than beams).
class FirstCandidateGenerator final : public Generator {
public:
  std::vector<RawOutput> generate(const GenerationRequest& request) override {
    std::vector<RawOutput> out;
    for (std::size_t i = 0; i < request.beam_size; ++i) {
      const auto& ctx = request.contexts[std::min(i, request.contexts.size() - 1)];
      out.push_back({"answer: " + content_of(ctx), -static_cast<double>(i)});
    }
    return out;
  }

  static std::string content_of(std::string_view ctx) {
    for (std::string_view marker : {std::string_view("[text content] "), std::string_view("[table content] ")}) {
      if (auto p = ctx.find(marker); p != std::string_view::npos) return std::string(ctx.substr(p + marker.size()));
    }
    return std::string(ctx);
  }
};

// Wire format for POST /generate.
inline nlohmann::json make_generate_request(const GenerationRequest& r) {
  return {{"question", r.question}, {"contexts", r.contexts}, {"beam_size", r.beam_size}};
}

inline std::vector<RawOutput> parse_generate_response(const nlohmann::json& j) {
  if (!j.is_object() || !j.contains("outputs") || !j["outputs"].is_array()) {
    throw ProtocolError("generate response lacks an 'outputs' array");
  }
  std::vector<RawOutput> out;
  for (const auto& o : j["outputs"]) {
    if (!o.is_object() || !o.contains("text") || !o["text"].is_string() || !o.contains("score") ||
        !o["score"].is_number()) {
      throw ProtocolError("each output needs a string 'text' and a numeric 'score'");
    }
    out.push_back({o["text"].get<std::string>(), o["score"].get<double>()});
  }
  return out;
}

// Exactly beam_size outputs ranked 1..k by non-increasing score.
inline std::vector<GenerationOutput> generate(const GenerationRequest& request, Generator& generator) {
  if (request.beam_size == 0) throw std::invalid_argument("beam size must be >= 1");
  if (request.contexts.empty()) throw std::invalid_argument("generation request has no contexts");
  auto raw = generator.generate(request);
  if (raw.size() < request.beam_size) {
    throw ProtocolError("generator returned " + std::to_string(raw.size()) + " outputs, expected " +
                        std::to_string(request.beam_size));
  }
  std::stable_sort(raw.begin(), raw.end(), [](const RawOutput& a, const RawOutput& b) { return a.score > b.score; });
  std::vector<GenerationOutput> out;
  out.reserve(request.beam_size);
  for (std::size_t i = 0; i < request.beam_size; ++i) {
    auto [prefix, payload] = classify_output(raw[i].text);
    out.push_back({prefix, std::move(payload), raw[i].score, i + 1});
  }
  return out;
}

// ---------------------------------------------------------------------------
// Resolution

enum class AnswerSource { direct, sql_execution };

struct ResolvedAnswer {
  AnswerSource source = AnswerSource::direct;
  std::vector<std::string> answers;
  bool executable = true;
  std::optional<sql::SqlQuery> sql;
  std::string error;  // parse/execution diagnostic when not executable

  bool operator==(const ResolvedAnswer&) const = default;
};

inline ResolvedAnswer resolve_output(const GenerationOutput& out, const TableStore& store) {
  ResolvedAnswer r;
  switch (out.prefix) {
    case OutputPrefix::answer:
      r.answers.push_back(out.payload);
      break;
    case OutputPrefix::sql:
      r.source = AnswerSource::sql_execution;
      try {
        r.sql = sql::parse_sql(out.payload);
        r.answers = sql::execute(*r.sql, store).values;
      } catch (const Error& e) {
        r.executable = false;
        r.answers.clear();
        r.error = e.what();
      }
      break;
    case OutputPrefix::malformed:
      r.executable = false;
      r.error = "output has neither an answer: nor an sql: prefix";
      break;
  }
  return r;
}

inline std::vector<ResolvedAnswer> resolve_outputs(std::span<const GenerationOutput> outputs,
                                                   const TableStore& store) {
  std::vector<ResolvedAnswer> out;
  out.reserve(outputs.size());
  for (const auto& o : outputs) out.push_back(resolve_output(o, store));
  return out;
}

// ---------------------------------------------------------------------------
// Predictions file: {"qid", "outputs": [{"prefix", "payload", "beam_score"}]}

struct Prediction {
  std::string qid;
  std::vector<GenerationOutput> outputs;
};

inline nlohmann::json to_json(const Prediction& p) {
  nlohmann::json outs = nlohmann::json::array();
  for (const auto& o : p.outputs) {
    outs.push_back({{"prefix", std::string(to_string(o.prefix))}, {"payload", o.payload}, {"beam_score", o.beam_score}});
  }
  return {{"qid", p.qid}, {"outputs", std::move(outs)}};
}

inline Prediction prediction_from_json(const nlohmann::json& j) {
  Prediction p;
  p.qid = detail::require_string(j, "qid");
  std::size_t rank = 0;
  for (const auto& o : detail::require(j, "outputs")) {
    GenerationOutput g;
    g.prefix = parse_prefix(o.at("prefix").get<std::string>());
    g.payload = o.at("payload").get<std::string>();
    g.beam_score = o.at("beam_score").get<double>();
    g.beam_rank = ++rank;
    p.outputs.push_back(std::move(g));
  }
  return p;
}

inline std::vector<Prediction> load_predictions(const std::filesystem::path& path) {
  std::vector<Prediction> out;
  detail::for_each_jsonl(path, [&](const nlohmann::json& j, std::size_t) { out.push_back(prediction_from_json(j)); });
  return out;
}

}  // namespace hybridqa

#endif  // HYBRIDQA_READER_HPP
