#pragma once

#include <chrono>
#include <map>
#include <mutex>
#include <string>
#include <utility>

#include <httplib.h>

#include "relay/services/backend.hpp"

namespace relay {

struct HttpLlmOptions {
  std::string model = "default";
  std::string auth_token;
  std::string path = "/v1/chat/completions";
  double timeout_seconds = 300;
};

/// Client for OpenAI-compatible chat-completions endpoints. Each replica is a
/// base URL (`http://host:port`). Requests run on the executor's blocking
/// pool; connection failures and 429/5xx replies surface as
/// ReplicaUnavailable so the hub refreshes and reroutes.
class HttpLlm final : public SlotBackend {
 public:
  HttpLlm(Executor& executor, HttpLlmOptions options) : SlotBackend(executor), options_(std::move(options)) {}

  void add_endpoint(const std::string& replica_id, const std::string& base_url, std::uint32_t capacity) {
    {
      std::lock_guard lock(mu_);
      endpoints_[replica_id] = base_url;
    }
    add_replica(replica_id, capacity);
  }

  static Json request_body(const HttpLlmOptions& options, const GenerationRequest& req) {
    Json body = {{"model", options.model},
                 {"messages", Json::array({{{"role", "user"}, {"content", req.prompt}}})},
                 {"temperature", req.temperature},
                 {"seed", req.seed}};
    if (req.max_tokens > 0) body["max_tokens"] = req.max_tokens;
    return body;
  }

  static Result<GenerationResponse> parse_reply(int status, const std::string& body, const std::string& replica_id) {
    if (status == 429 || status >= 500)
      return Error(Errc::replica_unavailable, "HTTP " + std::to_string(status) + " from " + replica_id);
    if (status != 200) return Error(Errc::io_error, "HTTP " + std::to_string(status) + " from " + replica_id);
    Json reply = Json::parse(body, nullptr, false);
    if (reply.is_discarded()) return Error(Errc::io_error, "malformed JSON reply from " + replica_id);
    try {
      GenerationResponse resp;
      resp.content = reply.at("choices").at(0).at("message").at("content").get<std::string>();
      if (reply.contains("usage") && reply["usage"].contains("completion_tokens"))
        resp.output_token_count = reply["usage"]["completion_tokens"].get<std::uint64_t>();
      resp.replica_id = replica_id;
      return resp;
    } catch (const Json::exception& e) {
      return Error(Errc::io_error, std::string("unexpected reply shape: ") + e.what());
    }
  }

 protected:
  void launch(const std::string& replica_id, std::uint64_t job_id, const GenerationRequest& req) override {
    std::string base;
    {
      std::lock_guard lock(mu_);
      base = endpoints_.at(replica_id);
    }
    executor().post_blocking([this, replica_id, job_id, req, base] {
      auto result = call(base, replica_id, req);
      executor().post([this, replica_id, job_id, result = std::move(result)]() mutable {
        complete(replica_id, job_id, std::move(result));
      });
    });
  }

 private:
  Result<GenerationResponse> call(const std::string& base, const std::string& replica_id,
                                  const GenerationRequest& req) const {
    const auto started = std::chrono::steady_clock::now();
    httplib::Client client(base);
    const auto timeout = std::chrono::duration_cast<std::chrono::microseconds>(
        std::chrono::duration<double>(options_.timeout_seconds));
    client.set_connection_timeout(timeout);
    client.set_read_timeout(timeout);
    httplib::Headers headers;
    if (!options_.auth_token.empty()) headers.emplace("Authorization", "Bearer " + options_.auth_token);

    auto res = client.Post(options_.path, headers, request_body(options_, req).dump(-1, ' ', false, Json::error_handler_t::replace), "application/json");
    if (!res) return Error(Errc::replica_unavailable, "no response from " + replica_id + ": " + httplib::to_string(res.error()));
    auto parsed = parse_reply(res->status, res->body, replica_id);
    if (parsed.ok()) {
      parsed.value().latency_seconds =
          std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
      if (parsed.value().output_token_count == 0) parsed.value().output_token_count = 1;
    }
    return parsed;
  }

  HttpLlmOptions options_;
  mutable std::mutex mu_;
  std::map<std::string, std::string> endpoints_;
};

}  // namespace relay
