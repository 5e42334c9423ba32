#pragma once

#include <atomic>
#include <chrono>
#include <cstdlib>
#include <deque>
#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include <httplib.h>
#include <json.hpp>

#include "reasonforge/error.hpp"
#include "reasonforge/rng.hpp"
#include "reasonforge/tokenize.hpp"

namespace reasonforge {

struct ChatMessage {
  std::string role;  // "system" or "user"
  std::string content;
};

struct ChatRequest {
  std::string model;
  std::vector<ChatMessage> messages;
  double temperature = 1.0;
  int max_new_tokens = 0;  // 0 = endpoint default

  /// Convenience for the single-user-turn requests every pipeline stage sends.
  static ChatRequest user_turn(std::string model, std::string prompt, double temperature,
                               int max_new_tokens = 0) {
    ChatRequest req;
    req.model = std::move(model);
    req.messages.push_back({"user", std::move(prompt)});
    req.temperature = temperature;
    req.max_new_tokens = max_new_tokens;
    return req;
  }
};

inline void validate(const ChatRequest& req) {
  if (req.messages.empty()) throw validation_error("chat request has no messages");
  for (const ChatMessage& m : req.messages) {
    if (m.role != "system" && m.role != "user") {
      throw validation_error("chat message role must be \"system\" or \"user\", got \"" + m.role +
                             "\"");
    }
    if (m.content.empty()) throw validation_error("chat message has empty content");
  }
  if (!(req.temperature >= 0.0 && req.temperature <= 2.0)) {
    throw validation_error("temperature must lie in [0,2]");
  }
  if (req.max_new_tokens < 0) throw validation_error("max_new_tokens must be positive when set");
}

class ChatBackend {
 public:
  virtual ~ChatBackend() = default;
  virtual std::string complete_prompt(const ChatRequest& req) = 0;
};

inline std::string complete(const ChatRequest& req, ChatBackend& backend) {
  validate(req);
  return backend.complete_prompt(req);
}

namespace detail {

inline std::string slice_between(const std::string& text, const std::string& open,
                                 const std::string& close) {
  std::size_t a = text.find(open);
  if (a == std::string::npos) return {};
  a += open.size();
  std::size_t b = text.find(close, a);
  if (b == std::string::npos) return {};
  return text.substr(a, b - a);
}

}  // namespace detail

/// Deterministic offline stand-in for a chat endpoint. The response is a pure
/// function of (seed, full prompt text); the prompt family is recognized by
/// instruction lines that are constant in the corresponding template.
class MockChatBackend : public ChatBackend {
 public:
  explicit MockChatBackend(std::uint64_t seed) : seed_(seed) {}

  std::string complete_prompt(const ChatRequest& req) override {
    std::string prompt;
    for (const ChatMessage& m : req.messages) {
      if (!prompt.empty()) prompt += '\n';
      prompt += m.content;
    }
    const std::uint64_t h = fnv1a64_u64(fnv1a64(prompt), seed_);
    if (prompt.find("- Your output must always be \"Yes\" or \"No\".") != std::string::npos) {
      return (h % 5) != 0 ? "Yes" : "No";
    }
    if (prompt.find("The score must be placed strictly between the <score> tags") !=
        std::string::npos) {
      const int score = 1 + static_cast<int>(h % 5);
      if (prompt.find("Directly output the final relevance score") != std::string::npos) {
        return "<score>" + std::to_string(score) + "</score>";
      }
      return "1. Query Analysis: the query asks for specific supporting information.\n"
             "2. Document Analysis: the document covers the topic with varying depth.\n"
             "3. Relevance Annotation: weighing the definition against both analyses.\n"
             "<score>\n" +
             std::to_string(score) + "\n</score>";
    }
    if (prompt.find("1. Identify the essential problem.") != std::string::npos) {
      const std::string question =
          detail::slice_between(prompt, "[Begin of Question]\n", "\n[End of Question]");
      return expand_question(question, h);
    }
    if (prompt.find("[Begin of Content]") != std::string::npos) {
      const std::string content =
          detail::slice_between(prompt, "[Begin of Content]\n", "\n[End of Content]");
      return pseudo_query(content, h);
    }
    return "mock-response-" + std::to_string(h % 1000000);
  }

 private:
  // Pseudo-query built from terms of the source content so mock embeddings
  // place it near that content's neighborhood.
  static std::string pseudo_query(const std::string& content, std::uint64_t h) {
    std::vector<std::string> toks = tokenize(content);
    if (toks.empty()) return {};
    Rng rng(h);
    std::string out = "What explains";
    const std::size_t want = 4 + static_cast<std::size_t>(rng.bounded(9));
    for (std::size_t i = 0; i < want; ++i) {
      out += ' ';
      out += toks[rng.bounded(toks.size())];
    }
    out += '?';
    return out;
  }

  static std::string expand_question(const std::string& question, std::uint64_t h) {
    std::vector<std::string> toks = tokenize(question);
    Rng rng(fnv1a64_u64(h, 0x71));
    std::string picked;
    const std::size_t want = toks.empty() ? 0 : 3 + static_cast<std::size_t>(rng.bounded(5));
    for (std::size_t i = 0; i < want; ++i) {
      if (!picked.empty()) picked += ' ';
      picked += toks[rng.bounded(toks.size())];
    }
    std::string out = "1. The essential problem: " + question + "\n";
    out += "2. Relevant information: background on " + (picked.empty() ? "the topic" : picked) +
           " and how these pieces interact.\n";
    out += "3. Draft answer: the question hinges on " +
           (toks.empty() ? std::string("the stated terms") : toks[rng.bounded(toks.size())]) +
           "; a careful answer works through the relevant mechanisms step by step.";
    return out;
  }

  std::uint64_t seed_;
};

/// Test backend replaying a fixed queue of responses.
class ScriptedChatBackend : public ChatBackend {
 public:
  explicit ScriptedChatBackend(std::vector<std::string> responses)
      : responses_(responses.begin(), responses.end()) {}

  std::string complete_prompt(const ChatRequest&) override {
    std::lock_guard<std::mutex> lock(mu_);
    if (responses_.empty()) throw validation_error("scripted backend exhausted");
    std::string r = std::move(responses_.front());
    responses_.pop_front();
    return r;
  }

 private:
  std::mutex mu_;
  std::deque<std::string> responses_;
};

struct RemoteConfig {
  std::string base_url;
  std::string api_key;
  std::string model;
  int timeout_seconds = 120;
  int max_attempts = 5;
  int backoff_base_ms = 1000;  // doubles per retry
  int parallelism = 8;

  static RemoteConfig from_env() {
    RemoteConfig cfg;
    if (const char* v = std::getenv("RF_API_BASE")) cfg.base_url = v;
    if (const char* v = std::getenv("RF_API_KEY")) cfg.api_key = v;
    if (const char* v = std::getenv("RF_MODEL")) cfg.model = v;
    if (const char* v = std::getenv("RF_MAX_ATTEMPTS")) cfg.max_attempts = std::stoi(v);
    if (const char* v = std::getenv("RF_BACKOFF_MS")) cfg.backoff_base_ms = std::stoi(v);
    return cfg;
  }
};

/// OpenAI-compatible chat-completions client. Transient failures (connection
/// errors and non-2xx statuses other than 400/401/404) retry with exponential
/// backoff; 400/401/404 fail immediately.
class RemoteChatBackend : public ChatBackend {
 public:
  explicit RemoteChatBackend(RemoteConfig cfg) : cfg_(std::move(cfg)) {
    if (cfg_.base_url.empty()) {
      throw validation_error("remote backend requires a base URL (RF_API_BASE)");
    }
    if (cfg_.max_attempts < 1) throw validation_error("max_attempts must be >= 1");
  }

  std::string complete_prompt(const ChatRequest& req) override {
    nlohmann::ordered_json body;
    body["model"] = req.model.empty() ? cfg_.model : req.model;
    body["messages"] = nlohmann::ordered_json::array();
    for (const ChatMessage& m : req.messages) {
      body["messages"].push_back({{"role", m.role}, {"content", m.content}});
    }
    body["temperature"] = req.temperature;
    if (req.max_new_tokens > 0) body["max_tokens"] = req.max_new_tokens;
    const std::string payload = body.dump();

    int last_status = 0;
    std::string last_detail = "connection failed";
    for (int attempt = 1; attempt <= cfg_.max_attempts; ++attempt) {
      httplib::Client cli(cfg_.base_url);
      cli.set_connection_timeout(cfg_.timeout_seconds, 0);
      cli.set_read_timeout(cfg_.timeout_seconds, 0);
      httplib::Headers headers;
      if (!cfg_.api_key.empty()) headers.emplace("Authorization", "Bearer " + cfg_.api_key);
      auto res = cli.Post("/v1/chat/completions", headers, payload, "application/json");
      if (res) {
        if (res->status >= 200 && res->status < 300) return parse_response(res->body);
        last_status = res->status;
        last_detail = "status " + std::to_string(res->status);
        if (res->status == 400 || res->status == 401 || res->status == 404) {
          throw service_error("chat endpoint rejected the request (" + last_detail + ")",
                              res->status);
        }
      }
      if (attempt < cfg_.max_attempts) {
        const auto delay = std::chrono::milliseconds(
            static_cast<long long>(cfg_.backoff_base_ms) * (1LL << (attempt - 1)));
        std::this_thread::sleep_for(delay);
      }
    }
    throw service_error("chat endpoint failed after " + std::to_string(cfg_.max_attempts) +
                            " attempts (last: " + last_detail + ")",
                        last_status);
  }

 private:
  static std::string parse_response(const std::string& body) {
    nlohmann::json parsed;
    try {
      parsed = nlohmann::json::parse(body);
    } catch (const nlohmann::json::exception& e) {
      throw service_error(std::string("chat endpoint returned malformed JSON: ") + e.what(), 0);
    }
    if (!parsed.contains("choices") || !parsed["choices"].is_array() ||
        parsed["choices"].empty()) {
      throw service_error("chat response missing choices", 0);
    }
    const auto& first = parsed["choices"][0];
    if (!first.contains("message") || !first["message"].contains("content") ||
        !first["message"]["content"].is_string()) {
      throw service_error("chat response missing message content", 0);
    }
    return first["message"]["content"].get<std::string>();
  }

  RemoteConfig cfg_;
};

/// Applies fn to every input with at most `parallelism` calls in flight;
/// results come back in input order. The first exception wins and is rethrown
/// after all workers drain.
template <typename In, typename Out>
std::vector<Out> parallel_map(const std::vector<In>& inputs,
                              const std::function<Out(const In&)>& fn, int parallelism) {
  if (parallelism < 1) throw validation_error("parallelism must be >= 1");
  std::vector<Out> results(inputs.size());
  if (inputs.empty()) return results;
  const std::size_t workers =
      std::min<std::size_t>(static_cast<std::size_t>(parallelism), inputs.size());
  if (workers == 1) {
    for (std::size_t i = 0; i < inputs.size(); ++i) results[i] = fn(inputs[i]);
    return results;
  }
  std::atomic<std::size_t> next{0};
  std::mutex err_mu;
  std::exception_ptr first_error;
  auto work = [&]() {
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= inputs.size()) return;
      {
        std::lock_guard<std::mutex> lock(err_mu);
        if (first_error) return;
      }
      try {
        results[i] = fn(inputs[i]);
      } catch (...) {
        std::lock_guard<std::mutex> lock(err_mu);
        if (!first_error) first_error = std::current_exception();
        return;
      }
    }
  };
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(work);
  for (std::thread& t : pool) t.join();
  if (first_error) std::rethrow_exception(first_error);
  return results;
}

}  // namespace reasonforge
