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

// Ranking accuracy (NDCG@K, MRR), group exposure fairness (DGU@K, MGU@K)
// and expected item utility, plus the run-level aggregation.
#pragma once

#include <functional>
#include <map>
#include <set>
#include <span>
#include <vector>

#include "trirec/core_model.hpp"

namespace trirec::metrics {

/// How displayed positions contribute exposure mass to a group.
enum class ExposureWeighting {
  position,  // v(k)
  uniform,   // 1 per displayed item
};

double ndcg_at_k(const RankedList& list, const std::set<ItemId>& relevant, int k);

double mrr(const RankedList& list, const std::set<ItemId>& relevant);

/// Normalizes per-group exposure mass into shares. A zero total yields the
/// historical shares themselves, i.e. a cold system counts as fair.
std::vector<double> shares_from_mass(std::span<const double> mass,
                                     std::span<const double> historical_share);

/// Per-group exposure mass of the top-k of every list.
std::vector<double> group_exposure_mass(std::span<const RankedList> lists,
                                        const PopularityGroups& groups, int k,
                                        ExposureWeighting weighting = ExposureWeighting::position);

std::vector<double> group_exposure_shares(std::span<const RankedList> lists,
                                          const PopularityGroups& groups, int k,
                                          ExposureWeighting weighting = ExposureWeighting::position);

/// Mean absolute deviation between exposure shares p and historical shares q.
double dgu_at_k(std::span<const double> p, std::span<const double> q);

/// Maximum absolute deviation between p and q.
double mgu_at_k(std::span<const double> p, std::span<const double> q);

struct EiuResult {
  double target = 0.0;      // ground-truth item's v(rank) * CTR, 0 if absent
  double cumulative = 0.0;  // Σ_k v(k) * CTR over the whole list
};

using CtrFn = std::function<double(const ItemId&)>;

EiuResult eiu_of_list(const RankedList& list, const ItemId& ground_truth, const CtrFn& ctr);

/// Everything recorded about one served list that the report needs.
struct UserEvaluation {
  UserId user_id;
  ItemId ground_truth;
  RankedList served;
  std::map<int, double> ndcg_at;
  double mrr = 0.0;
  EiuResult eiu;
  double joint_utility = 0.0;  // Σ_k U_joint realized in this round
};

UserEvaluation evaluate_list(const UserId& user, const ItemId& ground_truth,
                             const RankedList& served, std::span<const int> ks,
                             const CtrFn& ctr, double joint_utility = 0.0);

struct MetricReport {
  std::map<int, double> ndcg_at;
  double mrr = 0.0;
  std::map<int, double> dgu_at;
  std::map<int, double> mgu_at;
  double eiu_target_mean = 0.0;
  double eiu_cumulative = 0.0;
  double joint_utility_mean = 0.0;
  int n_users = 0;
};

struct AggregateOptions {
  std::vector<int> ks{1, 5, 10};
  ExposureWeighting weighting = ExposureWeighting::position;
};

/// Means of the per-user values; DGU/MGU are computed once from the exposure
/// pooled over all served lists, never averaged per user.
MetricReport aggregate(std::span<const UserEvaluation> evaluations,
                       const PopularityGroups& groups, const AggregateOptions& options);

}  // namespace trirec::metrics
