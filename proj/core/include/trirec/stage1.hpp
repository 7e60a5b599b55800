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

// Stage 1: item agents write a user-conditioned self-promotion, the user
// agent scores every candidate over those promotions, and the scores give
// the relevance ranking plus the per-item intensities consumed by Stage 2.
//
// Two backends share this surface. The mock backend is a pure function of
// its inputs and is what tests and the synthetic benchmark run on. The LLM
// backend talks to an OpenAI-compatible endpoint and degrades to the mock
// output whenever the endpoint cannot produce a usable answer.
#pragma once

#include <functional>
#include <map>
#include <memory>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "trirec/core_model.hpp"

namespace trirec {

enum class PromotionSource { mock, llm };
enum class BackendKind { mock, llm };

std::string to_string(PromotionSource s);
std::string to_string(BackendKind b);
BackendKind parse_backend_kind(const std::string& s);

struct Promotion {
  ItemId item_id;
  UserId user_id;
  std::string text;
  PromotionSource source = PromotionSource::mock;
};

struct ItemAgentState {
  ItemId item_id;
  std::vector<std::string> memory;
};

struct AgentBackendConfig {
  BackendKind backend = BackendKind::mock;
  /// Weight of promotion/profile token overlap in the mock scorer; the
  /// overlap enters with w = beta / (1 + beta).
  double mock_beta = 1.0;

  std::string llm_endpoint;  // base URL, e.g. https://api.openai.com/v1
  std::string llm_model;
  double llm_temperature = 0.0;
  int llm_max_retries = 3;
  int llm_timeout_ms = 30000;
  int llm_backoff_base_ms = 500;
  int llm_max_in_flight = 4;
  /// Never read from config files; filled from TRIREC_LLM_API_KEY.
  std::string llm_api_key;

  void validate() const;
};

/// Fills endpoint and key from TRIREC_LLM_BASE_URL / TRIREC_LLM_API_KEY.
/// A configured endpoint wins over the environment.
void apply_llm_environment(AgentBackendConfig& cfg);

struct Candidate {
  std::reference_wrapper<const ItemRecord> item;
  Promotion promotion;
};

struct Stage1Result {
  UserId user_id;
  RankedList ranking;
  std::map<ItemId, double> scores;  // r_LLM in [0, 1]
  std::vector<Promotion> promotions;
  /// Set when the LLM backend failed and mock scores were substituted.
  bool degraded = false;
  std::string degraded_reason;
};

/// LLM promotion generation failed after all retries.
class PromotionUnavailable : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Stable non-increasing order of scores, ties broken by ascending item id.
RankedList rank_by_scores(const std::map<ItemId, double>& scores);

namespace mock {

/// Deterministic self-promotion built from the item metadata and the
/// user's leading interest tokens.
std::string promotion_text(const ItemRecord& item, const UserProfile& user);

/// 0.5·(cos+1)·(1−w) + w·jaccard(profile tokens, promotion tokens),
/// w = beta/(1+beta), clamped to [0, 1].
double preference_score(const UserProfile& user, const ItemRecord& item,
                        const std::string& promotion, double mock_beta);

/// The two additive parts of preference_score.
struct ScoreParts {
  double cosine_part = 0.0;
  double overlap_part = 0.0;
};
ScoreParts preference_score_parts(const UserProfile& user, const ItemRecord& item,
                                  const std::string& promotion, double mock_beta);

}  // namespace mock

/// Backend interface behind generate_promotion / evaluate_preferences.
class AgentBackend {
 public:
  virtual ~AgentBackend() = default;

  virtual Promotion generate_promotion(const ItemRecord& item, const ItemAgentState& agent,
                                       const UserProfile& user) = 0;

  /// One promotion per item, in input order.
  virtual std::vector<Promotion> generate_promotions(std::span<const ItemRecord* const> items,
                                                     std::span<const ItemAgentState* const> agents,
                                                     const UserProfile& user);

  virtual Stage1Result evaluate_preferences(const UserProfile& user,
                                            std::span<const Candidate> candidates) = 0;
};

class MockBackend final : public AgentBackend {
 public:
  explicit MockBackend(double mock_beta = 1.0) : mock_beta_(mock_beta) {}

  Promotion generate_promotion(const ItemRecord& item, const ItemAgentState& agent,
                               const UserProfile& user) override;
  Stage1Result evaluate_preferences(const UserProfile& user,
                                    std::span<const Candidate> candidates) override;

 private:
  double mock_beta_;
};

std::unique_ptr<AgentBackend> make_backend(const AgentBackendConfig& cfg);

Promotion generate_promotion(const ItemRecord& item, const ItemAgentState& agent,
                             const UserProfile& user, const AgentBackendConfig& cfg);

Stage1Result evaluate_preferences(const UserProfile& user, std::span<const Candidate> candidates,
                                  const AgentBackendConfig& cfg);

}  // namespace trirec
