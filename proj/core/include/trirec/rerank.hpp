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

// Stage 2: the platform agent. Observes the cumulative exposure state and
// the Stage-1 list, fills the served list top-down by the position-aware
// joint utility, and advances the exposure state with what was displayed.
//
// At position k every remaining candidate i gets
//
//   g      = α_k · Ũ_user(i) + (1 − α_k) · Ũ_platform(i)
//   U_joint = g · Ũ_item(i, k)^λ_item
//
// where Ũ is min-max normalization over the remaining candidates,
// U_user = r_LLM · exp(cos(z_u, h_i)), U_platform = λ1 · ΔDGU + λ2 · ΔMGU
// (each gain normalized on its own), U_item = v(k) · σ(cos(z_u, h_i)) and
// α_k = α_min + (α_max − α_min) · (v(k) / v(1))^p.
#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "trirec/core_model.hpp"
#include "trirec/decay.hpp"
#include "trirec/stage1.hpp"

namespace trirec {

struct AblationFlags {
  bool disable_platform_utility = false;
  /// Replaces the position-aware α_k by this constant.
  std::optional<double> static_alpha;
  bool disable_user_utility = false;
  bool disable_item_utility = false;
  /// exp(sim) factor of U_user replaced by 1.
  bool disable_embedding_sim = false;
  /// sim replaced by a seeded uniform draw in [-1, 1].
  std::optional<std::uint64_t> randomize_embedding_sim;

  bool operator==(const AblationFlags&) const = default;
};

struct RerankConfig {
  double alpha_min = 0.1;
  double alpha_max = 0.7;
  double p = 1.0;
  double lambda1 = 0.5;
  double lambda2 = 0.5;
  double lambda_item = 1.0;
  int K = 10;
  AblationFlags ablation;
  /// Later positions see the exposure granted to earlier ones in the same
  /// list. false scores every position against the round's e^t only.
  bool intra_list_state_propagation = true;
  /// Seed e^0 from normalized training interaction counts instead of 0.
  bool warm_start_exposure = false;

  void validate() const;
};

struct JointUtilityBreakdown {
  ItemId item_id;
  int k = 0;
  double u_user_raw = 0.0;
  double u_user_norm = 0.0;
  double u_platform_norm = 0.0;
  double u_dgu_gain = 0.0;
  double u_mgu_gain = 0.0;
  double u_item_raw = 0.0;
  double u_item_norm = 0.0;
  double alpha_k = 0.0;
  double g = 0.0;
  double u_expo_item = 0.0;
  double u_joint = 0.0;
};

/// ω_k = v(k) / v(1).
double position_weight(std::size_t k);

double participation_alpha(std::size_t k, const RerankConfig& cfg);

/// σ(cos(z_u, h_i)).
double ctr_estimate(const UserProfile& user, const ItemRecord& item);

/// r_LLM · exp(sim).
double user_utility(double r_llm, double sim);

/// v(k) · ctr.
double item_utility(std::size_t k, double ctr);

/// (x − min) / (max − min); all ones when every value is equal.
std::vector<double> minmax_normalize(std::span<const double> values);

struct FairnessGain {
  double dgu_gain = 0.0;
  double mgu_gain = 0.0;
};

/// Per-group exposure mass derived from an exposure state.
std::vector<double> group_mass(const ExposureState& state, const PopularityGroups& groups);

/// Reduction of DGU and MGU (state shares vs historical shares) obtained by
/// granting `item` the exposure of position k. Positive means fairer.
FairnessGain marginal_fairness_gain(const ItemRecord& item, std::size_t k,
                                    const ExposureState& state, const PopularityGroups& groups);

/// Same, working directly on per-group mass.
FairnessGain marginal_fairness_gain(int group, double amount, std::span<const double> mass,
                                    std::span<const double> historical_share);

double platform_utility(double dgu_gain_norm, double mgu_gain_norm, const RerankConfig& cfg);

/// Combines normalized signals at position k. Fills alpha_k, g, u_expo_item
/// and u_joint plus the normalized inputs; raw fields are left at zero.
JointUtilityBreakdown joint_utility(double user_n, double platform_n, double item_n, std::size_t k,
                                    const RerankConfig& cfg);

struct RerankResult {
  RankedList list;
  std::vector<JointUtilityBreakdown> breakdowns;  // one per filled position
};

/// Greedy top-down construction of the served list. Length is
/// min(K, |candidates|). Ties on U_joint go to the better Stage-1 rank.
/// `state` is never modified.
RerankResult greedy_rerank(const UserProfile& user, const Stage1Result& stage1,
                           const Catalog& catalog, const ExposureState& state,
                           const PopularityGroups& groups, const RerankConfig& cfg);

/// e_i += v(k) for the item at position k; round += 1.
ExposureState apply_exposure_update(ExposureState state, const RankedList& list);

/// e^0 proportional to training counts, summing to 1 (warm start).
ExposureState warm_start_state(const Catalog& catalog, std::span<const Interaction> train);

/// The seeded stand-in for sim used by the randomize_embedding_sim ablation.
double randomized_similarity(std::uint64_t seed, const UserId& user, const ItemId& item);

}  // namespace trirec
