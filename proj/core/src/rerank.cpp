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

#include "trirec/rerank.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "trirec/metrics.hpp"
#include "trirec/rng.hpp"

namespace trirec {

void RerankConfig::validate() const {
  auto in_unit = [](double x) { return x >= 0.0 && x <= 1.0; };
  if (!in_unit(alpha_min)) throw ValidationError("rerank.alpha_min must be in [0, 1]");
  if (!in_unit(alpha_max) || alpha_max < alpha_min) {
    throw ValidationError("rerank.alpha_max must be in [alpha_min, 1]");
  }
  if (!(p > 0.0)) throw ValidationError("rerank.p must be > 0");
  if (!(lambda1 >= 0.0) || !(lambda2 >= 0.0)) throw ValidationError("rerank.lambda1/lambda2 must be >= 0");
  if (!(lambda_item >= 0.0)) throw ValidationError("rerank.lambda_item must be >= 0");
  if (K < 1) throw ValidationError("rerank.K must be >= 1");
  if (ablation.static_alpha && !in_unit(*ablation.static_alpha)) {
    throw ValidationError("rerank.ablation.static_alpha must be in [0, 1]");
  }
}

double position_weight(std::size_t k) { return exposure_decay(k) / exposure_decay(1); }

double participation_alpha(std::size_t k, const RerankConfig& cfg) {
  if (cfg.ablation.static_alpha) return *cfg.ablation.static_alpha;
  return cfg.alpha_min + (cfg.alpha_max - cfg.alpha_min) * std::pow(position_weight(k), cfg.p);
}

double ctr_estimate(const UserProfile& user, const ItemRecord& item) {
  return sigmoid(cosine_similarity(user.embedding, item.embedding));
}

double user_utility(double r_llm, double sim) { return r_llm * std::exp(sim); }

double item_utility(std::size_t k, double ctr) { return exposure_decay(k) * ctr; }

std::vector<double> minmax_normalize(std::span<const double> values) {
  if (values.empty()) throw ValidationError("minmax_normalize: empty input");
  const auto [lo, hi] = std::minmax_element(values.begin(), values.end());
  const double min = *lo;
  const double range = *hi - min;
  std::vector<double> out(values.size(), 1.0);
  if (range > 0.0) {
    for (std::size_t i = 0; i < values.size(); ++i) {
      out[i] = std::clamp((values[i] - min) / range, 0.0, 1.0);
    }
  }
  return out;
}

std::vector<double> group_mass(const ExposureState& state, const PopularityGroups& groups) {
  std::vector<double> mass(static_cast<std::size_t>(groups.count), 0.0);
  for (const auto& [id, e] : state.values()) {
    mass[static_cast<std::size_t>(groups.group(id))] += e;
  }
  return mass;
}

FairnessGain marginal_fairness_gain(int group, double amount, std::span<const double> mass,
                                    std::span<const double> historical_share) {
  const auto before = metrics::shares_from_mass(mass, historical_share);
  std::vector<double> bumped(mass.begin(), mass.end());
  bumped.at(static_cast<std::size_t>(group)) += amount;
  const auto after = metrics::shares_from_mass(bumped, historical_share);
  return FairnessGain{
      metrics::dgu_at_k(before, historical_share) - metrics::dgu_at_k(after, historical_share),
      metrics::mgu_at_k(before, historical_share) - metrics::mgu_at_k(after, historical_share)};
}

FairnessGain marginal_fairness_gain(const ItemRecord& item, std::size_t k,
                                    const ExposureState& state, const PopularityGroups& groups) {
  const auto mass = group_mass(state, groups);
  return marginal_fairness_gain(groups.group(item.item_id), exposure_decay(k), mass,
                                groups.historical_share);
}

double platform_utility(double dgu_gain_norm, double mgu_gain_norm, const RerankConfig& cfg) {
  return cfg.lambda1 * dgu_gain_norm + cfg.lambda2 * mgu_gain_norm;
}

JointUtilityBreakdown joint_utility(double user_n, double platform_n, double item_n, std::size_t k,
                                    const RerankConfig& cfg) {
  const auto& ab = cfg.ablation;
  JointUtilityBreakdown b;
  b.k = static_cast<int>(k);
  b.u_user_norm = user_n;
  b.u_platform_norm = platform_n;
  b.u_item_norm = item_n;
  b.alpha_k = participation_alpha(k, cfg);

  const double user_term = ab.disable_user_utility ? 0.0 : b.alpha_k * user_n;
  const double platform_term = ab.disable_platform_utility ? 0.0 : (1.0 - b.alpha_k) * platform_n;
  b.g = user_term + platform_term;

  if (ab.disable_item_utility || cfg.lambda_item == 0.0) {
    b.u_expo_item = 1.0;
  } else {
    b.u_expo_item = std::pow(item_n, cfg.lambda_item);
  }
  b.u_joint = b.g * b.u_expo_item;
  return b;
}

double randomized_similarity(std::uint64_t seed, const UserId& user, const ItemId& item) {
  Rng rng(derive_seed(derive_seed(seed, user), item));
  return rng.uniform(-1.0, 1.0);
}

RerankResult greedy_rerank(const UserProfile& user, const Stage1Result& stage1,
                           const Catalog& catalog, const ExposureState& state,
                           const PopularityGroups& groups, const RerankConfig& cfg) {
  cfg.validate();
  const auto& order = stage1.ranking.entries();
  if (order.empty()) throw ValidationError("greedy_rerank: empty candidate set");

  // Candidate attributes that do not depend on the position, in Stage-1 order.
  struct Slot {
    const ItemRecord* item;
    int group;
    double user_raw;
    double ctr;
  };
  std::vector<Slot> slots;
  slots.reserve(order.size());
  const auto& ab = cfg.ablation;
  for (const auto& id : order) {
    const ItemRecord& item = catalog.at(id);
    auto score = stage1.scores.find(id);
    if (score == stage1.scores.end()) {
      throw ValidationError("greedy_rerank: no Stage-1 score for " + id);
    }
    const double cosine = cosine_similarity(user.embedding, item.embedding);
    double sim = cosine;
    if (ab.randomize_embedding_sim) sim = randomized_similarity(*ab.randomize_embedding_sim, user.user_id, id);
    const double user_raw = ab.disable_embedding_sim ? score->second : user_utility(score->second, sim);
    slots.push_back(Slot{&item, groups.group(id), user_raw, sigmoid(cosine)});
  }

  auto mass = group_mass(state, groups);
  const std::size_t length = std::min<std::size_t>(static_cast<std::size_t>(cfg.K), slots.size());

  std::vector<std::size_t> remaining(slots.size());
  for (std::size_t i = 0; i < remaining.size(); ++i) remaining[i] = i;

  RerankResult result;
  std::vector<ItemId> chosen;
  chosen.reserve(length);

  std::vector<double> user_raw, dgu_raw, mgu_raw, item_raw;
  for (std::size_t k = 1; k <= length; ++k) {
    const double v = exposure_decay(k);
    std::vector<std::optional<FairnessGain>> by_group(static_cast<std::size_t>(groups.count));

    user_raw.clear();
    dgu_raw.clear();
    mgu_raw.clear();
    item_raw.clear();
    for (std::size_t idx : remaining) {
      const auto& s = slots[idx];
      auto& gain = by_group[static_cast<std::size_t>(s.group)];
      if (!gain) gain = marginal_fairness_gain(s.group, v, mass, groups.historical_share);
      user_raw.push_back(s.user_raw);
      dgu_raw.push_back(gain->dgu_gain);
      mgu_raw.push_back(gain->mgu_gain);
      item_raw.push_back(item_utility(k, s.ctr));
    }
    const auto user_n = minmax_normalize(user_raw);
    const auto dgu_n = minmax_normalize(dgu_raw);
    const auto mgu_n = minmax_normalize(mgu_raw);
    const auto item_n = minmax_normalize(item_raw);

    std::size_t best = 0;
    JointUtilityBreakdown best_b;
    best_b.u_joint = -std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < remaining.size(); ++j) {
      auto b = joint_utility(user_n[j], platform_utility(dgu_n[j], mgu_n[j], cfg), item_n[j], k, cfg);
      // `remaining` stays in Stage-1 order, so strict > keeps the better-ranked item on ties.
      if (b.u_joint > best_b.u_joint) {
        b.u_user_raw = user_raw[j];
        b.u_dgu_gain = dgu_raw[j];
        b.u_mgu_gain = mgu_raw[j];
        b.u_item_raw = item_raw[j];
        best = j;
        best_b = std::move(b);
      }
    }

    const auto& picked = slots[remaining[best]];
    best_b.item_id = picked.item->item_id;
    chosen.push_back(picked.item->item_id);
    result.breakdowns.push_back(std::move(best_b));
    if (cfg.intra_list_state_propagation) mass[static_cast<std::size_t>(picked.group)] += v;
    remaining.erase(remaining.begin() + static_cast<std::ptrdiff_t>(best));
  }

  result.list = RankedList(std::move(chosen));
  return result;
}

ExposureState apply_exposure_update(ExposureState state, const RankedList& list) {
  for (std::size_t k = 1; k <= list.size(); ++k) state.add(list.at_position(k), exposure_decay(k));
  state.advance_round();
  return state;
}

ExposureState warm_start_state(const Catalog& catalog, std::span<const Interaction> train) {
  ExposureState state;
  std::int64_t total = 0;
  const auto counts = interaction_counts(train);
  for (const auto& item : catalog.items()) {
    auto it = counts.find(item.item_id);
    if (it != counts.end()) total += it->second;
  }
  if (total == 0) return state;
  for (const auto& item : catalog.items()) {
    auto it = counts.find(item.item_id);
    if (it != counts.end() && it->second > 0) {
      state.set(item.item_id, static_cast<double>(it->second) / static_cast<double>(total));
    }
  }
  return state;
}

}  // namespace trirec
