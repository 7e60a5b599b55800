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

#include "trirec/stage1.hpp"

#include <algorithm>
#include <cstdlib>

#include "trirec/llm_client.hpp"
#include "trirec/text.hpp"

namespace trirec {

std::string to_string(PromotionSource s) { return s == PromotionSource::mock ? "mock" : "llm"; }
std::string to_string(BackendKind b) { return b == BackendKind::mock ? "mock" : "llm"; }

BackendKind parse_backend_kind(const std::string& s) {
  if (s == "mock") return BackendKind::mock;
  if (s == "llm") return BackendKind::llm;
  throw ValidationError("unknown backend '" + s + "' (expected mock or llm)");
}

void AgentBackendConfig::validate() const {
  if (!(mock_beta >= 0.0)) throw ValidationError("backend.mock_beta must be >= 0");
  if (backend == BackendKind::llm) {
    if (llm_endpoint.empty()) throw ValidationError("backend.llm_endpoint must be set for the llm backend");
    if (llm_model.empty()) throw ValidationError("backend.llm_model must be set for the llm backend");
  }
  if (llm_max_retries < 0) throw ValidationError("backend.llm_max_retries must be >= 0");
  if (llm_timeout_ms <= 0) throw ValidationError("backend.llm_timeout_ms must be > 0");
  if (llm_backoff_base_ms < 0) throw ValidationError("backend.llm_backoff_base_ms must be >= 0");
  if (llm_max_in_flight < 1) throw ValidationError("backend.llm_max_in_flight must be >= 1");
}

void apply_llm_environment(AgentBackendConfig& cfg) {
  if (const char* key = std::getenv("TRIREC_LLM_API_KEY")) cfg.llm_api_key = key;
  if (cfg.llm_endpoint.empty()) {
    if (const char* base = std::getenv("TRIREC_LLM_BASE_URL")) cfg.llm_endpoint = base;
  }
}

RankedList rank_by_scores(const std::map<ItemId, double>& scores) {
  std::vector<std::pair<ItemId, double>> entries(scores.begin(), scores.end());
  // std::map iteration is already ascending by id, so a stable sort on the
  // score alone yields the id tie-break.
  std::stable_sort(entries.begin(), entries.end(),
                   [](const auto& a, const auto& b) { return a.second > b.second; });
  std::vector<ItemId> ids;
  ids.reserve(entries.size());
  for (auto& e : entries) ids.push_back(std::move(e.first));
  return RankedList(std::move(ids));
}

namespace mock {

std::string promotion_text(const ItemRecord& item, const UserProfile& user) {
  std::string out = item.title;
  if (!item.category.empty()) out += " (" + item.category + ")";
  out += ".";

  const auto interests = text::leading_tokens(user.profile_text, 4);
  if (!interests.empty()) {
    const auto profile = text::token_set(user.profile_text);
    std::vector<std::string> shared;
    for (auto& tok : text::tokenize(item.title + " " + item.category + " " + item.description)) {
      if (profile.count(tok) && std::find(shared.begin(), shared.end(), tok) == shared.end()) {
        shared.push_back(std::move(tok));
      }
    }
    out += " Made for fans of " + text::join(interests, ", ");
    if (!shared.empty()) out += ": it speaks to " + text::join(shared, ", ");
    out += ".";
  }
  if (!item.description.empty()) out += " " + item.description;
  return out;
}

ScoreParts preference_score_parts(const UserProfile& user, const ItemRecord& item,
                                  const std::string& promotion, double mock_beta) {
  const double w = mock_beta / (1.0 + mock_beta);
  const double cosine = cosine_similarity(user.embedding, item.embedding);
  ScoreParts parts;
  parts.cosine_part = 0.5 * (cosine + 1.0) * (1.0 - w);
  parts.overlap_part =
      w == 0.0 ? 0.0 : w * text::jaccard(text::token_set(user.profile_text), text::token_set(promotion));
  return parts;
}

double preference_score(const UserProfile& user, const ItemRecord& item,
                        const std::string& promotion, double mock_beta) {
  const auto parts = preference_score_parts(user, item, promotion, mock_beta);
  return std::clamp(parts.cosine_part + parts.overlap_part, 0.0, 1.0);
}

}  // namespace mock

std::vector<Promotion> AgentBackend::generate_promotions(
    std::span<const ItemRecord* const> items, std::span<const ItemAgentState* const> agents,
    const UserProfile& user) {
  if (items.size() != agents.size()) throw ValidationError("generate_promotions: size mismatch");
  std::vector<Promotion> out;
  out.reserve(items.size());
  for (std::size_t i = 0; i < items.size(); ++i) {
    out.push_back(generate_promotion(*items[i], *agents[i], user));
  }
  return out;
}

Promotion MockBackend::generate_promotion(const ItemRecord& item, const ItemAgentState&,
                                          const UserProfile& user) {
  return Promotion{item.item_id, user.user_id, mock::promotion_text(item, user),
                   PromotionSource::mock};
}

Stage1Result MockBackend::evaluate_preferences(const UserProfile& user,
                                               std::span<const Candidate> candidates) {
  if (candidates.empty()) throw ValidationError("evaluate_preferences: no candidates");
  Stage1Result result;
  result.user_id = user.user_id;
  for (const auto& c : candidates) {
    const ItemRecord& item = c.item.get();
    if (c.promotion.item_id != item.item_id) {
      throw ValidationError("evaluate_preferences: promotion for " + c.promotion.item_id +
                            " attached to " + item.item_id);
    }
    if (!result.scores
             .emplace(item.item_id,
                      mock::preference_score(user, item, c.promotion.text, mock_beta_))
             .second) {
      throw ValidationError("evaluate_preferences: duplicate candidate " + item.item_id);
    }
    result.promotions.push_back(c.promotion);
  }
  result.ranking = rank_by_scores(result.scores);
  return result;
}

std::unique_ptr<AgentBackend> make_backend(const AgentBackendConfig& cfg) {
  cfg.validate();
  if (cfg.backend == BackendKind::mock) return std::make_unique<MockBackend>(cfg.mock_beta);
  return std::make_unique<LlmBackend>(cfg);
}

Promotion generate_promotion(const ItemRecord& item, const ItemAgentState& agent,
                             const UserProfile& user, const AgentBackendConfig& cfg) {
  return make_backend(cfg)->generate_promotion(item, agent, user);
}

Stage1Result evaluate_preferences(const UserProfile& user, std::span<const Candidate> candidates,
                                  const AgentBackendConfig& cfg) {
  return make_backend(cfg)->evaluate_preferences(user, candidates);
}

}  // namespace trirec
