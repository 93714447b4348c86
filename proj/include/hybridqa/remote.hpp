#ifndef HYBRIDQA_REMOTE_HPP
#define HYBRIDQA_REMOTE_HPP

#include <optional>
#include <regex>
#include <span>
#include <string>
#include <string_view>

#include "httplib.h"
#include "json.hpp"

#include "hybridqa/common.hpp"
#include "hybridqa/reader.hpp"
#include "hybridqa/rerank.hpp"

namespace hybridqa {

struct Endpoint {
  std::string host;
  int port = 80;
  std::string base_path;  // no trailing slash

  [[nodiscard]] std::string origin() const { return "http://" + host + ":" + std::to_string(port); }
};

// Accepts http://host[:port][/path].
inline std::optional<Endpoint> parse_endpoint(std::string_view url) {
  static const std::regex re(R"(^http://([A-Za-z0-9.\-]+|\[[0-9A-Fa-f:]+\])(?::([0-9]{1,5}))?(/[^\s?#]*)?$)");
  std::cmatch m;
  if (!std::regex_match(url.data(), url.data() + url.size(), m, re)) return std::nullopt;
  Endpoint e;
  e.host = m[1].str();
  if (m[2].matched) {
    e.port = std::stoi(m[2].str());
    if (e.port < 1 || e.port > 65535) return std::nullopt;
  }
  e.base_path = m[3].matched ? m[3].str() : "";
  while (!e.base_path.empty() && e.base_path.back() == '/') e.base_path.pop_back();
  return e;
}

namespace detail {

inline nlohmann::json post_json(const Endpoint& ep, const std::string& route, const nlohmann::json& body,
                                int timeout_seconds) {
  httplib::Client client(ep.host, ep.port);
  client.set_connection_timeout(timeout_seconds, 0);
  client.set_read_timeout(timeout_seconds, 0);
  client.set_write_timeout(timeout_seconds, 0);
  const std::string path = ep.base_path + route;
  auto res = client.Post(path, body.dump(), "application/json");
  if (!res) {
    throw TransportError("POST " + ep.origin() + path + " failed: " + httplib::to_string(res.error()));
  }
  if (res->status < 200 || res->status >= 300) {
    throw TransportError("POST " + ep.origin() + path + " returned HTTP " + std::to_string(res->status) + ": " +
                         res->body);
  }
  try {
    return nlohmann::json::parse(res->body);
  } catch (const nlohmann::json::exception& e) {
    throw ProtocolError("POST " + ep.origin() + path + " returned invalid JSON: " + e.what());
  }
}

}  // namespace detail

class RemoteScorer final : public Scorer {
public:
  explicit RemoteScorer(Endpoint endpoint, int timeout_seconds = 60)
      : endpoint_(std::move(endpoint)), timeout_(timeout_seconds) {}

  std::vector<double> score(std::string_view question, std::span<const Candidate> candidates) override {
    if (candidates.empty()) return {};
    const auto res = detail::post_json(endpoint_, "/score", make_score_request(question, candidates), timeout_);
    return parse_score_response(res, candidates.size());
  }

private:
  Endpoint endpoint_;
  int timeout_;
};

class RemoteGenerator final : public Generator {
public:
  explicit RemoteGenerator(Endpoint endpoint, int timeout_seconds = 300)
      : endpoint_(std::move(endpoint)), timeout_(timeout_seconds) {}

  std::vector<RawOutput> generate(const GenerationRequest& request) override {
    const auto res = detail::post_json(endpoint_, "/generate", make_generate_request(request), timeout_);
    auto outs = parse_generate_response(res);
    if (outs.size() != request.beam_size) {
      throw ProtocolError("/generate returned " + std::to_string(outs.size()) + " outputs, expected exactly " +
                          std::to_string(request.beam_size));
    }
    for (std::size_t i = 1; i < outs.size(); ++i) {
      if (outs[i].score > outs[i - 1].score) throw ProtocolError("/generate outputs are not score-descending");
    }
    return outs;
  }

private:
  Endpoint endpoint_;
  int timeout_;
};

}  // namespace hybridqa

#endif  // HYBRIDQA_REMOTE_HPP
