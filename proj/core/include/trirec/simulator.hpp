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

// Closed-loop harness. One round is one user request: sample candidates,
// run Stage 1, re-rank against the current exposure state, serve, update
// the state. The state persists across all rounds of a run.
//
// Randomness is split per purpose and per user (run seed → user seed →
// substream) so that ablations which only change scoring see exactly the
// same candidate sets as the full model.
#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "trirec/core_model.hpp"
#include "trirec/metrics.hpp"
#include "trirec/rerank.hpp"
#include "trirec/rng.hpp"
#include "trirec/stage1.hpp"

namespace trirec {

struct Dataset {
  Catalog catalog;
  std::vector<UserProfile> users;
  std::vector<Interaction> interactions;
};

struct LeaveOneOutSplit {
  std::vector<Interaction> train;
  std::map<UserId, Interaction> test;
  std::map<UserId, std::set<ItemId>> train_items;
  std::vector<UserId> dropped_users;
};

/// Holds out each user's latest interaction (ties: larger item id). Users
/// with fewer than two interactions are dropped and reported.
LeaveOneOutSplit leave_one_out_split(std::span<const Interaction> interactions);

/// {test item} plus n−1 items drawn uniformly without replacement from the
/// catalog minus the user's training items, shuffled.
std::vector<ItemId> sample_candidates(const ItemId& test_item, const std::set<ItemId>& train_items,
                                      const Catalog& catalog, int n_candidates, Rng& rng);

enum class UserOrder { dataset, shuffled };

/// Pipeline-level switches used by the Stage-1 / Stage-2 ablations.
struct PipelineOverrides {
  /// Stage-1 scores replaced by seeded uniform draws (random Y^(1)).
  bool random_stage1 = false;
  /// Promotions replaced by empty text.
  bool disable_promotions = false;
  /// Serve Y^(1) truncated to K; no re-ranking.
  bool bypass_stage2 = false;

  bool operator==(const PipelineOverrides&) const = default;
};

struct SimulationConfig {
  std::uint64_t seed = 42;
  int n_candidates = 10;
  RerankConfig rerank;
  AgentBackendConfig backend;
  UserOrder user_order = UserOrder::dataset;
  std::optional<int> rounds;
  int group_count = 8;
  std::vector<int> metric_ks{1, 5, 10};
  metrics::ExposureWeighting exposure_weighting = metrics::ExposureWeighting::position;
  PipelineOverrides pipeline;

  void validate() const;
};

struct RoundRecord {
  std::int64_t t = 0;
  UserId user_id;
  ItemId ground_truth;
  std::vector<ItemId> candidates;
  RankedList stage1;
  std::map<ItemId, double> stage1_scores;
  bool stage1_degraded = false;
  RankedList stage2;
  std::vector<JointUtilityBreakdown> breakdowns;
  std::vector<std::pair<ItemId, double>> exposure_deltas;
  std::vector<double> served_ctr;  // CTR of stage2 entries, in order
  std::vector<int> served_group;
  metrics::UserEvaluation evaluation;
};

struct EpisodeLog {
  std::vector<RoundRecord> rounds;
  ExposureState final_state;
  PopularityGroups groups;
  std::optional<metrics::MetricReport> report;  // absent when no round ran
  std::vector<UserId> dropped_users;
};

/// Runs the closed loop over all test users (or the first `rounds`).
EpisodeLog run_simulation(const Dataset& data, const SimulationConfig& cfg);

/// Recomputes the report from the per-round records.
metrics::MetricReport report_from_rounds(const std::vector<RoundRecord>& rounds,
                                         const PopularityGroups& groups,
                                         const SimulationConfig& cfg);

enum class AblationVariant {
  no_stage1,               // a
  no_promotion_no_stage2,  // b
  no_stage2,               // c
  no_platform_utility,     // d
  static_alpha,            // e
  no_user_utility,         // f
  no_item_utility,         // g
  no_emb_sim,              // h
  random_emb_sim,          // i
};

/// Accepts the row letter (a..i) or the variant name.
AblationVariant parse_ablation_variant(const std::string& s);
std::string to_string(AblationVariant v);
char ablation_letter(AblationVariant v);
std::vector<AblationVariant> all_ablation_variants();

/// The full configuration with one variant switched on.
/// `static_alpha` is used by variant e.
SimulationConfig apply_ablation(SimulationConfig base, AblationVariant variant,
                                double static_alpha = 0.1);

struct AblationRun {
  AblationVariant variant;
  EpisodeLog full;
  EpisodeLog ablated;
};

AblationRun run_ablation(const Dataset& data, const SimulationConfig& base, AblationVariant variant,
                         double static_alpha = 0.1);

struct SweepPoint {
  double alpha_max = 0.0;
  metrics::MetricReport report;
};

/// One run per α_max on a shared seed.
std::vector<SweepPoint> sweep_alpha_max(const Dataset& data, const SimulationConfig& cfg,
                                        std::span<const double> grid);

/// Parses "lo:hi:step" into an inclusive grid.
std::vector<double> parse_grid(const std::string& spec);

}  // namespace trirec
