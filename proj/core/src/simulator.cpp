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

#include "trirec/simulator.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_map>
#include <unordered_set>

#include <spdlog/spdlog.h>

namespace trirec {

void SimulationConfig::validate() const {
  if (n_candidates < 2) throw ValidationError("simulation.n_candidates must be >= 2");
  if (rounds && *rounds < 0) throw ValidationError("simulation.rounds must be >= 0");
  if (group_count < 2) throw ValidationError("simulation.group_count must be >= 2");
  if (metric_ks.empty()) throw ValidationError("simulation.metric_ks must not be empty");
  for (int k : metric_ks) {
    if (k < 1) throw ValidationError("simulation.metric_ks entries must be >= 1");
  }
  rerank.validate();
  backend.validate();
}

LeaveOneOutSplit leave_one_out_split(std::span<const Interaction> interactions) {
  if (interactions.empty()) throw ValidationError("leave_one_out_split: empty dataset");

  std::map<UserId, std::vector<const Interaction*>> by_user;
  for (const auto& it : interactions) by_user[it.user_id].push_back(&it);

  LeaveOneOutSplit split;
  for (auto& [user, rows] : by_user) {
    if (rows.size() < 2) {
      split.dropped_users.push_back(user);
      continue;
    }
    const auto latest = std::max_element(rows.begin(), rows.end(), [](const auto* a, const auto* b) {
      if (a->timestamp != b->timestamp) return a->timestamp < b->timestamp;
      return a->item_id < b->item_id;
    });
    split.test.emplace(user, **latest);
    auto& items = split.train_items[user];
    for (const auto* row : rows) {
      if (row == *latest) continue;
      split.train.push_back(*row);
      items.insert(row->item_id);
    }
  }
  if (!split.dropped_users.empty()) {
    spdlog::warn("leave-one-out: dropped {} user(s) with fewer than 2 interactions",
                 split.dropped_users.size());
  }
  return split;
}

std::vector<ItemId> sample_candidates(const ItemId& test_item, const std::set<ItemId>& train_items,
                                      const Catalog& catalog, int n_candidates, Rng& rng) {
  if (n_candidates < 1) throw ValidationError("sample_candidates: n_candidates must be >= 1");
  if (!catalog.contains(test_item)) throw ValidationError("sample_candidates: unknown test item " + test_item);

  std::vector<ItemId> pool;
  pool.reserve(catalog.size());
  for (const auto& item : catalog.items()) {
    if (item.item_id != test_item && !train_items.count(item.item_id)) pool.push_back(item.item_id);
  }
  const auto needed = static_cast<std::size_t>(n_candidates - 1);
  if (pool.size() < needed) {
    throw ValidationError("sample_candidates: need " + std::to_string(needed) +
                          " negatives but only " + std::to_string(pool.size()) +
                          " eligible items (short by " + std::to_string(needed - pool.size()) + ")");
  }

  // Partial Fisher-Yates over the eligible pool.
  std::vector<ItemId> out;
  out.reserve(static_cast<std::size_t>(n_candidates));
  out.push_back(test_item);
  for (std::size_t i = 0; i < needed; ++i) {
    const auto j = i + static_cast<std::size_t>(rng.index(pool.size() - i));
    std::swap(pool[i], pool[j]);
    out.push_back(pool[i]);
  }
  rng.shuffle(out);
  return out;
}

namespace {

std::vector<const UserProfile*> arrival_order(const Dataset& data, const LeaveOneOutSplit& split,
                                              const SimulationConfig& cfg) {
  std::unordered_set<UserId> known;
  std::vector<const UserProfile*> order;
  for (const auto& user : data.users) {
    known.insert(user.user_id);
    if (split.test.count(user.user_id)) order.push_back(&user);
  }
  for (const auto& [user, _] : split.test) {
    if (!known.count(user)) throw ValidationError("interactions reference unknown user " + user);
  }
  if (cfg.user_order == UserOrder::shuffled) {
    Rng rng(derive_seed(cfg.seed, "user-order"));
    rng.shuffle(order);
  }
  return order;
}

metrics::CtrFn ctr_lookup(const std::map<ItemId, double>& ctr) {
  return [&ctr](const ItemId& id) { return ctr.at(id); };
}

}  // namespace

metrics::MetricReport report_from_rounds(const std::vector<RoundRecord>& rounds,
                                         const PopularityGroups& groups,
                                         const SimulationConfig& cfg) {
  std::vector<metrics::UserEvaluation> evals;
  evals.reserve(rounds.size());
  for (const auto& r : rounds) evals.push_back(r.evaluation);
  return metrics::aggregate(evals, groups, {cfg.metric_ks, cfg.exposure_weighting});
}

EpisodeLog run_simulation(const Dataset& data, const SimulationConfig& cfg) {
  cfg.validate();
  const auto& catalog = data.catalog;
  for (const auto& it : data.interactions) {
    if (!catalog.contains(it.item_id)) {
      throw ValidationError("interaction references unknown item " + it.item_id);
    }
  }

  const auto split = leave_one_out_split(data.interactions);
  EpisodeLog log;
  log.dropped_users = split.dropped_users;
  log.groups = build_popularity_groups(catalog.items(), split.train, cfg.group_count);

  const auto order = arrival_order(data, split, cfg);
  std::size_t horizon = order.size();
  if (cfg.rounds) horizon = std::min(horizon, static_cast<std::size_t>(*cfg.rounds));

  ExposureState state = cfg.rerank.warm_start_exposure ? warm_start_state(catalog, split.train)
                                                       : ExposureState{};
  auto backend = make_backend(cfg.backend);

  std::unordered_map<ItemId, ItemAgentState> item_agents;
  for (const auto& item : catalog.items()) item_agents[item.item_id].item_id = item.item_id;

  static const std::set<ItemId> kNoItems;
  for (std::size_t t = 0; t < horizon; ++t) {
    UserProfile user = *order[t];
    const Interaction& test = split.test.at(user.user_id);
    const auto train_it = split.train_items.find(user.user_id);
    const auto& train_items = train_it == split.train_items.end() ? kNoItems : train_it->second;
    const std::uint64_t user_seed = derive_seed(cfg.seed, user.user_id);

    RoundRecord rec;
    rec.t = static_cast<std::int64_t>(t) + 1;
    rec.user_id = user.user_id;
    rec.ground_truth = test.item_id;
    {
      Rng rng(derive_seed(user_seed, "candidates"));
      rec.candidates = sample_candidates(test.item_id, train_items, catalog, cfg.n_candidates, rng);
    }

    // Stage 1.
    std::vector<const ItemRecord*> items;
    std::vector<const ItemAgentState*> agents;
    for (const auto& id : rec.candidates) {
      items.push_back(&catalog.at(id));
      agents.push_back(&item_agents.at(id));
    }
    std::vector<Promotion> promotions;
    if (cfg.pipeline.disable_promotions) {
      for (const auto* item : items) {
        promotions.push_back(Promotion{item->item_id, user.user_id, "", PromotionSource::mock});
      }
    } else {
      promotions = backend->generate_promotions(items, agents, user);
    }
    std::vector<Candidate> candidates;
    for (std::size_t i = 0; i < items.size(); ++i) candidates.push_back(Candidate{*items[i], promotions[i]});
    Stage1Result stage1 = backend->evaluate_preferences(user, candidates);
    if (cfg.pipeline.random_stage1) {
      Rng rng(derive_seed(user_seed, "stage1-random"));
      for (const auto& id : rec.candidates) stage1.scores[id] = rng.uniform();
      stage1.ranking = rank_by_scores(stage1.scores);
    }
    rec.stage1 = stage1.ranking;
    rec.stage1_scores = stage1.scores;
    rec.stage1_degraded = stage1.degraded;

    // Stage 2.
    double joint_sum = 0.0;
    if (cfg.pipeline.bypass_stage2) {
      rec.stage2 = stage1.ranking.truncated(static_cast<std::size_t>(cfg.rerank.K));
    } else {
      auto rr = greedy_rerank(user, stage1, catalog, state, log.groups, cfg.rerank);
      rec.stage2 = std::move(rr.list);
      rec.breakdowns = std::move(rr.breakdowns);
      for (const auto& b : rec.breakdowns) joint_sum += b.u_joint;
    }

    // Transition.
    for (std::size_t k = 1; k <= rec.stage2.size(); ++k) {
      rec.exposure_deltas.emplace_back(rec.stage2.at_position(k), exposure_decay(k));
    }
    state = apply_exposure_update(std::move(state), rec.stage2);

    std::map<ItemId, double> ctr;
    for (const auto& id : rec.candidates) ctr[id] = ctr_estimate(user, catalog.at(id));
    for (const auto& id : rec.stage2.entries()) {
      rec.served_ctr.push_back(ctr.at(id));
      rec.served_group.push_back(log.groups.group(id));
    }
    rec.evaluation = metrics::evaluate_list(user.user_id, test.item_id, rec.stage2, cfg.metric_ks,
                                            ctr_lookup(ctr), joint_sum);

    // Agent memory: recorded for prompt context, never read by the mock scorer.
    for (const auto& promo : promotions) {
      if (!promo.text.empty()) {
        item_agents.at(promo.item_id).memory.push_back("pitched to " + user.user_id + ": " + promo.text);
      }
    }

    log.rounds.push_back(std::move(rec));
  }

  log.final_state = std::move(state);
  if (!log.rounds.empty()) log.report = report_from_rounds(log.rounds, log.groups, cfg);
  return log;
}

AblationVariant parse_ablation_variant(const std::string& s) {
  for (auto v : all_ablation_variants()) {
    if (s.size() == 1 && s[0] == ablation_letter(v)) return v;
    if (s == to_string(v)) return v;
  }
  throw ValidationError("unknown ablation variant '" + s + "' (expected a..i)");
}

std::string to_string(AblationVariant v) {
  switch (v) {
    case AblationVariant::no_stage1: return "no_stage1";
    case AblationVariant::no_promotion_no_stage2: return "no_promotion_no_stage2";
    case AblationVariant::no_stage2: return "no_stage2";
    case AblationVariant::no_platform_utility: return "no_platform_utility";
    case AblationVariant::static_alpha: return "static_alpha";
    case AblationVariant::no_user_utility: return "no_user_utility";
    case AblationVariant::no_item_utility: return "no_item_utility";
    case AblationVariant::no_emb_sim: return "no_emb_sim";
    case AblationVariant::random_emb_sim: return "random_emb_sim";
  }
  return "unknown";
}

char ablation_letter(AblationVariant v) { return static_cast<char>('a' + static_cast<int>(v)); }

std::vector<AblationVariant> all_ablation_variants() {
  std::vector<AblationVariant> out;
  for (int i = 0; i <= static_cast<int>(AblationVariant::random_emb_sim); ++i) {
    out.push_back(static_cast<AblationVariant>(i));
  }
  return out;
}

SimulationConfig apply_ablation(SimulationConfig cfg, AblationVariant variant, double static_alpha) {
  auto& ab = cfg.rerank.ablation;
  switch (variant) {
    case AblationVariant::no_stage1:
      cfg.pipeline.random_stage1 = true;
      cfg.pipeline.disable_promotions = true;
      break;
    case AblationVariant::no_promotion_no_stage2:
      cfg.pipeline.disable_promotions = true;
      cfg.pipeline.bypass_stage2 = true;
      break;
    case AblationVariant::no_stage2:
      cfg.pipeline.bypass_stage2 = true;
      break;
    case AblationVariant::no_platform_utility:
      ab.disable_platform_utility = true;
      break;
    case AblationVariant::static_alpha:
      ab.static_alpha = static_alpha;
      break;
    case AblationVariant::no_user_utility:
      ab.disable_user_utility = true;
      break;
    case AblationVariant::no_item_utility:
      ab.disable_item_utility = true;
      break;
    case AblationVariant::no_emb_sim:
      ab.disable_embedding_sim = true;
      break;
    case AblationVariant::random_emb_sim:
      ab.randomize_embedding_sim = derive_seed(cfg.seed, "random-embedding-sim");
      break;
  }
  return cfg;
}

AblationRun run_ablation(const Dataset& data, const SimulationConfig& base, AblationVariant variant,
                         double static_alpha) {
  AblationRun run{variant, run_simulation(data, base), {}};
  run.ablated = run_simulation(data, apply_ablation(base, variant, static_alpha));
  return run;
}

std::vector<SweepPoint> sweep_alpha_max(const Dataset& data, const SimulationConfig& cfg,
                                        std::span<const double> grid) {
  std::vector<SweepPoint> out;
  for (double a : grid) {
    if (a < cfg.rerank.alpha_min || a > 1.0) {
      throw ValidationError("sweep: alpha_max " + std::to_string(a) + " outside [alpha_min, 1]");
    }
  }
  for (double a : grid) {
    SimulationConfig point = cfg;
    point.rerank.alpha_max = a;
    auto log = run_simulation(data, point);
    if (!log.report) throw ValidationError("sweep: run produced no rounds");
    out.push_back(SweepPoint{a, *log.report});
  }
  return out;
}

std::vector<double> parse_grid(const std::string& spec) {
  double lo = 0, hi = 0, step = 0;
  std::size_t used = 0;
  try {
    const auto p1 = spec.find(':');
    const auto p2 = spec.find(':', p1 == std::string::npos ? p1 : p1 + 1);
    if (p1 == std::string::npos || p2 == std::string::npos) throw std::invalid_argument("shape");
    lo = std::stod(spec.substr(0, p1), &used);
    if (used != p1) throw std::invalid_argument("lo");
    hi = std::stod(spec.substr(p1 + 1, p2 - p1 - 1), &used);
    if (used != p2 - p1 - 1) throw std::invalid_argument("hi");
    step = std::stod(spec.substr(p2 + 1), &used);
    if (used != spec.size() - p2 - 1) throw std::invalid_argument("step");
  } catch (const std::exception&) {
    throw ValidationError("grid must look like lo:hi:step, got '" + spec + "'");
  }
  if (!(step > 0.0) || hi < lo) throw ValidationError("grid needs step > 0 and hi >= lo: " + spec);

  const auto steps = static_cast<std::int64_t>(std::floor((hi - lo) / step + 1e-9));
  std::vector<double> grid;
  for (std::int64_t i = 0; i <= steps; ++i) {
    const double v = lo + static_cast<double>(i) * step;
    grid.push_back(std::round(v * 1e12) / 1e12);
  }
  return grid;
}

}  // namespace trirec
