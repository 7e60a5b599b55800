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

#include "trirec/metrics.hpp"

#include <algorithm>
#include <cmath>

#include "trirec/decay.hpp"

namespace trirec::metrics {

double ndcg_at_k(const RankedList& list, const std::set<ItemId>& relevant, int k) {
  if (k < 1) throw ValidationError("ndcg_at_k: k must be >= 1");
  if (relevant.empty()) throw ValidationError("ndcg_at_k: empty relevant set");

  const auto cutoff = std::min<std::size_t>(static_cast<std::size_t>(k), list.size());
  double dcg = 0.0;
  for (std::size_t pos = 1; pos <= cutoff; ++pos) {
    if (relevant.count(list.at_position(pos))) dcg += 1.0 / std::log2(static_cast<double>(pos) + 1.0);
  }
  const auto ideal_hits = std::min<std::size_t>(static_cast<std::size_t>(k), relevant.size());
  double idcg = 0.0;
  for (std::size_t pos = 1; pos <= ideal_hits; ++pos) {
    idcg += 1.0 / std::log2(static_cast<double>(pos) + 1.0);
  }
  return dcg / idcg;
}

double mrr(const RankedList& list, const std::set<ItemId>& relevant) {
  if (relevant.empty()) throw ValidationError("mrr: empty relevant set");
  for (std::size_t pos = 1; pos <= list.size(); ++pos) {
    if (relevant.count(list.at_position(pos))) return 1.0 / static_cast<double>(pos);
  }
  return 0.0;
}

std::vector<double> shares_from_mass(std::span<const double> mass,
                                     std::span<const double> historical_share) {
  if (mass.size() != historical_share.size()) {
    throw ValidationError("shares_from_mass: group count mismatch");
  }
  double total = 0.0;
  for (double m : mass) total += m;
  if (total <= 0.0) return {historical_share.begin(), historical_share.end()};
  std::vector<double> shares(mass.size());
  for (std::size_t g = 0; g < mass.size(); ++g) shares[g] = mass[g] / total;
  return shares;
}

std::vector<double> group_exposure_mass(std::span<const RankedList> lists,
                                        const PopularityGroups& groups, int k,
                                        ExposureWeighting weighting) {
  if (k < 1) throw ValidationError("group_exposure_mass: k must be >= 1");
  std::vector<double> mass(static_cast<std::size_t>(groups.count), 0.0);
  for (const auto& list : lists) {
    const auto cutoff = std::min<std::size_t>(static_cast<std::size_t>(k), list.size());
    for (std::size_t pos = 1; pos <= cutoff; ++pos) {
      const auto g = static_cast<std::size_t>(groups.group(list.at_position(pos)));
      mass[g] += weighting == ExposureWeighting::position ? exposure_decay(pos) : 1.0;
    }
  }
  return mass;
}

std::vector<double> group_exposure_shares(std::span<const RankedList> lists,
                                          const PopularityGroups& groups, int k,
                                          ExposureWeighting weighting) {
  const auto mass = group_exposure_mass(lists, groups, k, weighting);
  return shares_from_mass(mass, groups.historical_share);
}

namespace {
void check_same_length(std::span<const double> p, std::span<const double> q, const char* what) {
  if (p.size() != q.size() || p.empty()) {
    throw ValidationError(std::string(what) + ": share vectors must be non-empty and equal length (" +
                          std::to_string(p.size()) + " vs " + std::to_string(q.size()) + ")");
  }
}
}  // namespace

double dgu_at_k(std::span<const double> p, std::span<const double> q) {
  check_same_length(p, q, "dgu_at_k");
  double sum = 0.0;
  for (std::size_t g = 0; g < p.size(); ++g) sum += std::abs(p[g] - q[g]);
  return sum / static_cast<double>(p.size());
}

double mgu_at_k(std::span<const double> p, std::span<const double> q) {
  check_same_length(p, q, "mgu_at_k");
  double worst = 0.0;
  for (std::size_t g = 0; g < p.size(); ++g) worst = std::max(worst, std::abs(p[g] - q[g]));
  return worst;
}

EiuResult eiu_of_list(const RankedList& list, const ItemId& ground_truth, const CtrFn& ctr) {
  EiuResult out;
  for (std::size_t pos = 1; pos <= list.size(); ++pos) {
    const auto& id = list.at_position(pos);
    const double value = exposure_decay(pos) * ctr(id);
    out.cumulative += value;
    if (id == ground_truth) out.target = value;
  }
  return out;
}

UserEvaluation evaluate_list(const UserId& user, const ItemId& ground_truth,
                             const RankedList& served, std::span<const int> ks,
                             const CtrFn& ctr, double joint_utility) {
  UserEvaluation ev;
  ev.user_id = user;
  ev.ground_truth = ground_truth;
  ev.served = served;
  const std::set<ItemId> relevant{ground_truth};
  for (int k : ks) ev.ndcg_at[k] = ndcg_at_k(served, relevant, k);
  ev.mrr = mrr(served, relevant);
  ev.eiu = eiu_of_list(served, ground_truth, ctr);
  ev.joint_utility = joint_utility;
  return ev;
}

MetricReport aggregate(std::span<const UserEvaluation> evaluations,
                       const PopularityGroups& groups, const AggregateOptions& options) {
  if (evaluations.empty()) throw ValidationError("aggregate: no evaluated users");

  MetricReport report;
  report.n_users = static_cast<int>(evaluations.size());
  const double n = static_cast<double>(evaluations.size());

  for (const auto& ev : evaluations) {
    for (int k : options.ks) {
      auto it = ev.ndcg_at.find(k);
      if (it == ev.ndcg_at.end()) {
        throw ValidationError("aggregate: evaluation for " + ev.user_id + " lacks NDCG@" +
                              std::to_string(k));
      }
      report.ndcg_at[k] += it->second;
    }
    report.mrr += ev.mrr;
    report.eiu_target_mean += ev.eiu.target;
    report.eiu_cumulative += ev.eiu.cumulative;
    report.joint_utility_mean += ev.joint_utility;
  }
  for (auto& [_, v] : report.ndcg_at) v /= n;
  report.mrr /= n;
  report.eiu_target_mean /= n;
  report.eiu_cumulative /= n;
  report.joint_utility_mean /= n;

  std::vector<RankedList> lists;
  lists.reserve(evaluations.size());
  for (const auto& ev : evaluations) lists.push_back(ev.served);
  for (int k : options.ks) {
    const auto p = group_exposure_shares(lists, groups, k, options.weighting);
    report.dgu_at[k] = dgu_at_k(p, groups.historical_share);
    report.mgu_at[k] = mgu_at_k(p, groups.historical_share);
  }
  return report;
}

}  // namespace trirec::metrics
