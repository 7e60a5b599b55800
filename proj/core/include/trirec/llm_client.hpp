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

// OpenAI-compatible chat-completions transport and the LLM-backed agents.
//
// Wire protocol: POST {endpoint}/chat/completions with a JSON body
// {model, messages: [{role, content}], temperature}; bearer auth from
// TRIREC_LLM_API_KEY; the reply text is choices[0].message.content.
// Transport failures and HTTP 429/5xx are retried with exponential backoff
// (base llm_backoff_base_ms, factor 2) up to llm_max_retries extra attempts.
#pragma once

#include <chrono>
#include <functional>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "trirec/stage1.hpp"

namespace trirec {

struct ChatMessage {
  std::string role;
  std::string content;
};

struct ChatRequest {
  std::vector<ChatMessage> messages;
};

class TransportError : public std::runtime_error {
 public:
  enum class Kind { connection, timeout, http_status, malformed };

  TransportError(Kind kind, int status, int attempts, const std::string& what)
      : std::runtime_error(what), kind_(kind), status_(status), attempts_(attempts) {}

  Kind kind() const { return kind_; }
  /// HTTP status of the last response, 0 when none was received.
  int status() const { return status_; }
  int attempts() const { return attempts_; }

 private:
  Kind kind_;
  int status_;
  int attempts_;
};

/// Serialized request body for the chat-completions endpoint.
std::string build_chat_body(const ChatRequest& request, const std::string& model,
                            double temperature);

/// Extracts choices[0].message.content; throws TransportError(malformed).
std::string parse_chat_response(const std::string& body);

class ChatClient {
 public:
  using Sleeper = std::function<void(std::chrono::milliseconds)>;

  explicit ChatClient(AgentBackendConfig cfg, Sleeper sleeper = {});

  /// Sends one request, retrying as described above.
  std::string complete(const ChatRequest& request) const;

  const AgentBackendConfig& config() const { return cfg_; }

 private:
  AgentBackendConfig cfg_;
  Sleeper sleeper_;
  std::string base_;
  std::string path_;
};

std::string llm_chat_call(const ChatRequest& request, const AgentBackendConfig& cfg);

namespace prompts {

/// Template text with {{placeholder}} slots; versioned assets under core/prompts.
const std::string& promotion_template();
const std::string& score_template();
const std::string& version();

ChatRequest promotion_request(const ItemRecord& item, const ItemAgentState& agent,
                              const UserProfile& user);
ChatRequest score_request(const UserProfile& user, const ItemRecord& item,
                          const Promotion& promotion);

/// Parses a 0-10 integer verdict. Accepts surrounding whitespace and a
/// trailing "/10"; anything else is rejected.
std::optional<int> parse_score(const std::string& content);

}  // namespace prompts

/// Agents backed by a chat-completions endpoint. Requests within one call
/// run with at most llm_max_in_flight in flight; results keep input order.
class LlmBackend final : public AgentBackend {
 public:
  explicit LlmBackend(AgentBackendConfig cfg, ChatClient::Sleeper sleeper = {});

  /// Throws PromotionUnavailable when the endpoint gives up.
  Promotion generate_promotion(const ItemRecord& item, const ItemAgentState& agent,
                               const UserProfile& user) override;

  /// Concurrent; an item whose request fails gets the mock promotion.
  std::vector<Promotion> generate_promotions(std::span<const ItemRecord* const> items,
                                             std::span<const ItemAgentState* const> agents,
                                             const UserProfile& user) override;

  /// Falls back to mock scores for the whole set if any verdict is missing.
  Stage1Result evaluate_preferences(const UserProfile& user,
                                    std::span<const Candidate> candidates) override;

 private:
  ChatClient client_;
};

/// Runs task(i) for i in [0, n) on at most `max_in_flight` threads.
void run_bounded(std::size_t n, int max_in_flight, const std::function<void(std::size_t)>& task);

}  // namespace trirec
