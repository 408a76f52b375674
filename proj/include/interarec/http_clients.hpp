#ifndef INTERAREC_HTTP_CLIENTS_HPP
#define INTERAREC_HTTP_CLIENTS_HPP

#include <chrono>
#include <cstdlib>
#include <functional>
#include <memory>
#include <optional>
#include <semaphore>
#include <string>
#include <thread>

// Eigen first: <resolv.h>, pulled in by httplib, defines a _res macro that
// collides with Eigen parameter names.
#include <Eigen/Dense>
#include <httplib.h>
#include <json.hpp>

#include "interarec/constraints.hpp"
#include "interarec/digest.hpp"
#include "interarec/rerank.hpp"
#include "interarec/session.hpp"
#include "interarec/summarizer.hpp"

namespace interarec {

inline std::optional<std::string> env_var(const char* name) {
  const char* v = std::getenv(name);
  if (!v || !*v) return std::nullopt;
  return std::string(v);
}

struct RetryPolicy {
  std::chrono::milliseconds base{1000};
  double factor = 2.0;
  int max_tries = 5;
  std::function<void(std::chrono::milliseconds)> sleep = [](std::chrono::milliseconds d) {
    std::this_thread::sleep_for(d);
  };
};

/// Where and how to reach a JSON-over-HTTP service.
struct HttpEndpoint {
  std::string url;  // scheme://host[:port]/path
  std::string model;
  std::string key;

  std::pair<std::string, std::string> split() const {
    const auto scheme_end = url.find("://");
    if (scheme_end == std::string::npos) throw Error(Errc::BackendUnavailable, "endpoint URL needs a scheme: " + url);
    const auto path_start = url.find('/', scheme_end + 3);
    if (path_start == std::string::npos) return {url, "/"};
    return {url.substr(0, path_start), url.substr(path_start)};
  }
};

/// POSTs JSON with bearer auth; retries throttling responses (429, 503) with
/// exponential backoff. Anything else that is not 2xx is BackendUnavailable.
inline nlohmann::json post_json(const HttpEndpoint& endpoint, const nlohmann::json& body, const RetryPolicy& retry,
                                Errc unavailable = Errc::BackendUnavailable) {
  const auto [origin, path] = endpoint.split();
  httplib::Client client(origin);
  client.set_connection_timeout(10);
  client.set_read_timeout(120);
  const httplib::Headers headers = {{"Authorization", "Bearer " + endpoint.key}};
  auto delay = retry.base;
  for (int attempt = 1;; ++attempt) {
    auto res = client.Post(path, headers, body.dump(), "application/json");
    if (!res) throw Error(unavailable, "cannot reach " + endpoint.url + ": " + httplib::to_string(res.error()));
    if (res->status >= 200 && res->status < 300) {
      auto parsed = nlohmann::json::parse(res->body, nullptr, false);
      if (parsed.is_discarded()) throw Error(unavailable, "non-JSON reply from " + endpoint.url);
      return parsed;
    }
    const bool throttled = res->status == 429 || res->status == 503;
    if (!throttled || attempt >= retry.max_tries) {
      throw Error(unavailable, endpoint.url + " answered HTTP " + std::to_string(res->status) +
                                   (throttled ? " after " + std::to_string(attempt) + " tries" : ""));
    }
    retry.sleep(delay);
    delay = std::chrono::milliseconds(static_cast<long long>(static_cast<double>(delay.count()) * retry.factor));
  }
}

/// Chat-completions multimodal backend. Screenshots are sent inline as PNG
/// data URLs. At most `max_in_flight` requests run at once per backend.
class LiveBackend : public SummarizerBackend {
 public:
  LiveBackend(HttpEndpoint endpoint, ScreenshotStore store, RetryPolicy retry = {}, std::ptrdiff_t max_in_flight = 2)
      : endpoint_(std::move(endpoint)), store_(std::move(store)), retry_(std::move(retry)),
        in_flight_(std::make_unique<std::counting_semaphore<64>>(std::clamp<std::ptrdiff_t>(max_in_flight, 1, 64))) {}

  /// Reads INTERAREC_MLLM_URL / _MODEL / _KEY. A missing URL or key is
  /// reported at call time as BackendUnavailable.
  static LiveBackend from_env(ScreenshotStore store, RetryPolicy retry = {}) {
    HttpEndpoint ep{env_var("INTERAREC_MLLM_URL").value_or(""), env_var("INTERAREC_MLLM_MODEL").value_or(""),
                    env_var("INTERAREC_MLLM_KEY").value_or("")};
    return LiveBackend(std::move(ep), std::move(store), std::move(retry));
  }

  BackendIdentity identity() const override { return BackendIdentity::Live; }

  std::string complete(const PromptSpec& prompt, const std::vector<ScreenshotRef>& batch) override {
    if (endpoint_.url.empty()) throw Error(Errc::BackendUnavailable, "INTERAREC_MLLM_URL is not set");
    if (endpoint_.key.empty()) throw Error(Errc::BackendUnavailable, "INTERAREC_MLLM_KEY is not set");
    nlohmann::json content = nlohmann::json::array();
    content.push_back({{"type", "text"}, {"text", prompt.instruction_text}});
    for (const auto& ref : batch) {
      content.push_back({{"type", "image_url"},
                         {"image_url", {{"url", "data:image/png;base64," + base64_encode(store_.read(ref.key))}}}});
    }
    nlohmann::json body = {{"model", endpoint_.model},
                           {"messages", nlohmann::json::array({{{"role", "user"}, {"content", content}}})},
                           {"max_tokens", 1024}};
    in_flight_->acquire();
    nlohmann::json reply;
    try {
      reply = post_json(endpoint_, body, retry_);
    } catch (...) {
      in_flight_->release();
      throw;
    }
    in_flight_->release();
    const auto* text = reply.contains("choices") && !reply["choices"].empty()
                           ? &reply["choices"][0]["message"]["content"]
                           : nullptr;
    if (!text || !text->is_string()) throw Error(Errc::SummaryParseError, "reply has no message content");
    return text->get<std::string>();
  }

 private:
  HttpEndpoint endpoint_;
  ScreenshotStore store_;
  RetryPolicy retry_;
  std::unique_ptr<std::counting_semaphore<64>> in_flight_;
};

/// OpenAI-style embeddings endpoint; replies are L2-normalized locally.
class HttpEmbedder : public EmbeddingProvider {
 public:
  explicit HttpEmbedder(HttpEndpoint endpoint, std::size_t dim = 0, RetryPolicy retry = {})
      : endpoint_(std::move(endpoint)), dim_(dim), retry_(std::move(retry)) {}

  static HttpEmbedder from_env() {
    return HttpEmbedder(HttpEndpoint{env_var("INTERAREC_EMBED_URL").value_or(""),
                                     env_var("INTERAREC_EMBED_MODEL").value_or(""),
                                     env_var("INTERAREC_EMBED_KEY").value_or("")});
  }

  std::string id() const override { return "http:" + endpoint_.url + "#" + endpoint_.model; }
  std::size_t dim() const override { return dim_; }

  EmbeddingVector embed(std::string_view text) override {
    if (endpoint_.url.empty()) throw Error(Errc::ProviderUnavailable, "INTERAREC_EMBED_URL is not set");
    nlohmann::json body = {{"input", std::string(text)}};
    if (!endpoint_.model.empty()) body["model"] = endpoint_.model;
    const auto reply = post_json(endpoint_, body, retry_, Errc::ProviderUnavailable);
    if (!reply.contains("data") || reply["data"].empty() || !reply["data"][0].contains("embedding")) {
      throw Error(Errc::ProviderUnavailable, "reply has no embedding");
    }
    EmbeddingVector v{reply["data"][0]["embedding"].get<std::vector<double>>()};
    if (dim_ == 0) dim_ = v.dim();
    if (v.dim() != dim_) throw Error(Errc::DimensionMismatch, "provider changed dimension");
    if (const double n = v.norm(); n > 0.0) {
      for (auto& x : v.values) x /= n;
    }
    return v;
  }

 private:
  HttpEndpoint endpoint_;
  std::size_t dim_;
  RetryPolicy retry_;
};

/// Constraint extraction through LLM function calling. The reply's arguments
/// are decoded with the same schema as the deterministic path.
class LiveDecomposer {
 public:
  explicit LiveDecomposer(HttpEndpoint endpoint, RetryPolicy retry = {})
      : endpoint_(std::move(endpoint)), retry_(std::move(retry)) {}

  nlohmann::json request_body(const KeywordSummary& summary) const {
    nlohmann::json values = nlohmann::json::object();
    for (const auto& [name, value] : summary.entries()) {
      values[name] = value ? nlohmann::json(*value) : nlohmann::json("Not Available");
    }
    const auto schema = constraint_function_schema();
    return {{"model", endpoint_.model},
            {"messages", nlohmann::json::array({{{"role", "user"},
                                                 {"content", "Decompose this summary of user behavior into "
                                                             "recommendation constraints:\n" + values.dump()}}})},
            {"tools", nlohmann::json::array({{{"type", "function"}, {"function", schema}}})},
            {"tool_choice", {{"type", "function"}, {"function", {{"name", schema["name"]}}}}}};
  }

  ConstraintSet decompose(const KeywordSummary& summary) const {
    if (endpoint_.url.empty() || endpoint_.key.empty()) {
      throw Error(Errc::BackendUnavailable, "decomposition endpoint not configured");
    }
    const auto reply = post_json(endpoint_, request_body(summary), retry_);
    try {
      const auto& call = reply.at("choices").at(0).at("message").at("tool_calls").at(0).at("function");
      if (call.at("name") != constraint_function_schema()["name"]) {
        throw Error(Errc::SummaryParseError, "unexpected function " + call.at("name").dump());
      }
      const auto& args = call.at("arguments");
      return constraints_from_json(args.is_string() ? nlohmann::json::parse(args.get<std::string>()) : args);
    } catch (const nlohmann::json::exception& e) {
      throw Error(Errc::SummaryParseError, std::string("malformed function call: ") + e.what());
    }
  }

 private:
  HttpEndpoint endpoint_;
  RetryPolicy retry_;
};

}  // namespace interarec

#endif  // INTERAREC_HTTP_CLIENTS_HPP
