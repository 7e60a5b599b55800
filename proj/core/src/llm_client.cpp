// Copyright 2026 The trirec Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "trirec/llm_client.hpp"

#include <atomic>
#include <cctype>
#include <thread>

#include <httplib.h>
#include <nlohmann/json.hpp>
#include <spdlog/spdlog.h>

#include "prompt_assets.hpp"
#include "trirec/text.hpp"

namespace trirec {

using json = nlohmann::json;

std::string build_chat_body(const ChatRequest& request, const std::string& model,
                            double temperature) {
  json messages = json::array();
  for (const auto& m : request.messages) {
    messages.push_back({{"role", m.role}, {"content", m.content}});
  }
  return json{{"model", model}, {"messages", messages}, {"temperature", temperature}}.dump();
}

std::string parse_chat_response(const std::string& body) {
  auto fail = [](const std::string& why) {
    return TransportError(TransportError::Kind::malformed, 200, 1, "malformed chat response: " + why);
  };
  json doc = json::parse(body, nullptr, /*allow_exceptions=*/false);
  if (doc.is_discarded()) throw fail("not JSON");
  if (!doc.contains("choices") || !doc["choices"].is_array() || doc["choices"].empty()) {
    throw fail("missing choices");
  }
  const auto& first = doc["choices"][0];
  if (!first.contains("message") || !first["message"].contains("content") ||
      !first["message"]["content"].is_string()) {
    throw fail("missing choices[0].message.content");
  }
  return first["message"]["content"].get<std::string>();
}

namespace {

// Splits "https://host:port/v1" into ("https://host:port", "/v1").
std::pair<std::string, std::string> split_endpoint(const std::string& endpoint) {
  const auto scheme_end = endpoint.find("://");
  if (scheme_end == std::string::npos) {
    throw ValidationError("llm endpoint must include a scheme: " + endpoint);
  }
  const auto path_begin = endpoint.find('/', scheme_end + 3);
  std::string base = endpoint.substr(0, path_begin);
  std::string path = path_begin == std::string::npos ? "" : endpoint.substr(path_begin);
  while (!path.empty() && path.back() == '/') path.pop_back();
  return {base, path + "/chat/completions"};
}

bool retryable_status(int status) { return status == 429 || status >= 500; }

}  // namespace

ChatClient::ChatClient(AgentBackendConfig cfg, Sleeper sleeper)
    : cfg_(std::move(cfg)), sleeper_(std::move(sleeper)) {
  if (cfg_.llm_endpoint.empty()) throw ValidationError("llm endpoint not configured");
  if (!sleeper_) sleeper_ = [](std::chrono::milliseconds d) { std::this_thread::sleep_for(d); };
  std::tie(base_, path_) = split_endpoint(cfg_.llm_endpoint);
}

std::string ChatClient::complete(const ChatRequest& request) const {
  const std::string body = build_chat_body(request, cfg_.llm_model, cfg_.llm_temperature);

  httplib::Client client(base_);
  const auto timeout = std::chrono::milliseconds(cfg_.llm_timeout_ms);
  client.set_connection_timeout(timeout);
  client.set_read_timeout(timeout);
  client.set_write_timeout(timeout);

  httplib::Headers headers;
  if (!cfg_.llm_api_key.empty()) headers.emplace("Authorization", "Bearer " + cfg_.llm_api_key);

  const int max_attempts = cfg_.llm_max_retries + 1;
  TransportError last(TransportError::Kind::connection, 0, 0, "no attempt made");
  for (int attempt = 1; attempt <= max_attempts; ++attempt) {
    if (attempt > 1) {
      sleeper_(std::chrono::milliseconds(static_cast<std::int64_t>(cfg_.llm_backoff_base_ms)
                                         << (attempt - 2)));
    }
    auto res = client.Post(path_, headers, body, "application/json");
    if (!res) {
      const auto err = res.error();
      const auto kind = (err == httplib::Error::ConnectionTimeout || err == httplib::Error::Read)
                            ? TransportError::Kind::timeout
                            : TransportError::Kind::connection;
      last = TransportError(kind, 0, attempt, "chat request failed: " + httplib::to_string(err));
      continue;
    }
    if (res->status >= 200 && res->status < 300) {
      try {
        return parse_chat_response(res->body);
      } catch (const TransportError& e) {
        throw TransportError(e.kind(), res->status, attempt, e.what());
      }
    }
    last = TransportError(TransportError::Kind::http_status, res->status, attempt,
                          "chat request returned HTTP " + std::to_string(res->status));
    if (!retryable_status(res->status)) throw last;
  }
  throw last;
}

std::string llm_chat_call(const ChatRequest& request, const AgentBackendConfig& cfg) {
  if (cfg.backend != BackendKind::llm) throw ValidationError("llm_chat_call requires the llm backend");
  return ChatClient(cfg).complete(request);
}

namespace prompts {

const std::string& promotion_template() {
  static const std::string text = assets::kPromotionPrompt;
  return text;
}

const std::string& score_template() {
  static const std::string text = assets::kScorePrompt;
  return text;
}

const std::string& version() {
  static const std::string v = assets::kPromptVersion;
  return v;
}

namespace {

std::string render(std::string tmpl, const std::vector<std::pair<std::string, std::string>>& slots) {
  for (const auto& [name, value] : slots) {
    const std::string key = "{{" + name + "}}";
    for (auto pos = tmpl.find(key); pos != std::string::npos; pos = tmpl.find(key, pos + value.size())) {
      tmpl.replace(pos, key.size(), value);
    }
  }
  return tmpl;
}

std::string recent(const std::vector<std::string>& memory, std::size_t n) {
  if (memory.empty()) return "(none)";
  std::string out;
  for (std::size_t i = memory.size() > n ? memory.size() - n : 0; i < memory.size(); ++i) {
    out += "- " + memory[i] + "\n";
  }
  out.pop_back();
  return out;
}

}  // namespace

ChatRequest promotion_request(const ItemRecord& item, const ItemAgentState& agent,
                              const UserProfile& user) {
  return ChatRequest{{{"user", render(promotion_template(), {{"title", item.title},
                                                             {"category", item.category},
                                                             {"description", item.description},
                                                             {"item_memory", recent(agent.memory, 3)},
                                                             {"profile", user.profile_text}})}}};
}

ChatRequest score_request(const UserProfile& user, const ItemRecord& item,
                          const Promotion& promotion) {
  return ChatRequest{{{"user", render(score_template(), {{"profile", user.profile_text},
                                                         {"user_memory", recent(user.memory, 3)},
                                                         {"title", item.title},
                                                         {"promotion", promotion.text}})}}};
}

std::optional<int> parse_score(const std::string& content) {
  std::size_t i = 0;
  auto skip_ws = [&] {
    while (i < content.size() && std::isspace(static_cast<unsigned char>(content[i]))) ++i;
  };
  skip_ws();
  const std::size_t digits_begin = i;
  while (i < content.size() && std::isdigit(static_cast<unsigned char>(content[i]))) ++i;
  if (i == digits_begin || i - digits_begin > 2) return std::nullopt;
  const int value = std::stoi(content.substr(digits_begin, i - digits_begin));
  if (content.compare(i, 3, "/10") == 0) i += 3;
  skip_ws();
  if (i != content.size() || value > 10) return std::nullopt;
  return value;
}

}  // namespace prompts

void run_bounded(std::size_t n, int max_in_flight, const std::function<void(std::size_t)>& task) {
  const std::size_t workers = std::min<std::size_t>(n, static_cast<std::size_t>(std::max(1, max_in_flight)));
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) task(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::exception_ptr> errors(workers);
  std::vector<std::thread> threads;
  threads.reserve(workers);
  for (std::size_t w = 0; w < workers; ++w) {
    threads.emplace_back([&, w] {
      try {
        for (std::size_t i = next++; i < n; i = next++) task(i);
      } catch (...) {
        errors[w] = std::current_exception();
      }
    });
  }
  for (auto& t : threads) t.join();
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

LlmBackend::LlmBackend(AgentBackendConfig cfg, ChatClient::Sleeper sleeper)
    : client_(std::move(cfg), std::move(sleeper)) {}

Promotion LlmBackend::generate_promotion(const ItemRecord& item, const ItemAgentState& agent,
                                         const UserProfile& user) {
  std::string content;
  try {
    content = client_.complete(prompts::promotion_request(item, agent, user));
  } catch (const TransportError& e) {
    throw PromotionUnavailable("promotion for " + item.item_id + " unavailable: " + e.what());
  }
  if (content.find_first_not_of(" \t\r\n") == std::string::npos) {
    throw PromotionUnavailable("promotion for " + item.item_id + " came back empty");
  }
  return Promotion{item.item_id, user.user_id, std::move(content), PromotionSource::llm};
}

std::vector<Promotion> LlmBackend::generate_promotions(
    std::span<const ItemRecord* const> items, std::span<const ItemAgentState* const> agents,
    const UserProfile& user) {
  if (items.size() != agents.size()) throw ValidationError("generate_promotions: size mismatch");
  std::vector<Promotion> out(items.size());
  run_bounded(items.size(), client_.config().llm_max_in_flight, [&](std::size_t i) {
    try {
      out[i] = generate_promotion(*items[i], *agents[i], user);
    } catch (const PromotionUnavailable& e) {
      spdlog::warn("{}; substituting mock promotion", e.what());
      out[i] = Promotion{items[i]->item_id, user.user_id, mock::promotion_text(*items[i], user),
                         PromotionSource::mock};
    }
  });
  return out;
}

Stage1Result LlmBackend::evaluate_preferences(const UserProfile& user,
                                              std::span<const Candidate> candidates) {
  if (candidates.empty()) throw ValidationError("evaluate_preferences: no candidates");

  std::vector<std::optional<int>> verdicts(candidates.size());
  std::vector<std::string> failures(candidates.size());
  const int attempts = client_.config().llm_max_retries + 1;
  run_bounded(candidates.size(), client_.config().llm_max_in_flight, [&](std::size_t i) {
    const auto request = prompts::score_request(user, candidates[i].item.get(), candidates[i].promotion);
    for (int a = 0; a < attempts && !verdicts[i]; ++a) {
      try {
        const auto content = client_.complete(request);
        verdicts[i] = prompts::parse_score(content);
        if (!verdicts[i]) failures[i] = "unparseable verdict '" + content + "'";
      } catch (const TransportError& e) {
        failures[i] = e.what();
        return;
      }
    }
  });

  for (std::size_t i = 0; i < candidates.size(); ++i) {
    if (verdicts[i]) continue;
    const double beta = client_.config().mock_beta;
    auto fallback = MockBackend(beta).evaluate_preferences(user, candidates);
    fallback.degraded = true;
    fallback.degraded_reason = candidates[i].item.get().item_id + ": " + failures[i];
    spdlog::warn("user {}: falling back to mock scores ({})", user.user_id, fallback.degraded_reason);
    return fallback;
  }

  Stage1Result result;
  result.user_id = user.user_id;
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    const auto& id = candidates[i].item.get().item_id;
    if (!result.scores.emplace(id, *verdicts[i] / 10.0).second) {
      throw ValidationError("evaluate_preferences: duplicate candidate " + id);
    }
    result.promotions.push_back(candidates[i].promotion);
  }
  result.ranking = rank_by_scores(result.scores);
  return result;
}

}  // namespace trirec
