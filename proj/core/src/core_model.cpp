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

#include "trirec/core_model.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <unordered_set>

namespace trirec {

Catalog::Catalog(std::vector<ItemRecord> items) : items_(std::move(items)) {
  index_.reserve(items_.size());
  for (std::size_t i = 0; i < items_.size(); ++i) {
    const auto& item = items_[i];
    if (item.item_id.empty()) {
      throw ValidationError("catalog: empty item_id at index " + std::to_string(i));
    }
    if (item.training_pop < 0) {
      throw ValidationError("catalog: negative training_pop for " + item.item_id);
    }
    if (!index_.emplace(item.item_id, i).second) {
      throw ValidationError("catalog: duplicate item_id " + item.item_id);
    }
    if (i == 0) {
      dim_ = item.embedding.size();
    } else if (item.embedding.size() != dim_) {
      throw ValidationError("catalog: embedding dimension of " + item.item_id + " is " +
                            std::to_string(item.embedding.size()) + ", expected " +
                            std::to_string(dim_));
    }
  }
}

const ItemRecord& Catalog::at(const ItemId& id) const {
  const auto* item = find(id);
  if (item == nullptr) throw ValidationError("unknown item_id " + id);
  return *item;
}

const ItemRecord* Catalog::find(const ItemId& id) const {
  auto it = index_.find(id);
  return it == index_.end() ? nullptr : &items_[it->second];
}

double ExposureState::exposure(const ItemId& id) const {
  auto it = exposure_.find(id);
  return it == exposure_.end() ? 0.0 : it->second;
}

double ExposureState::total() const {
  double sum = 0.0;
  for (const auto& [_, e] : exposure_) sum += e;
  return sum;
}

void ExposureState::add(const ItemId& id, double amount) {
  if (!(amount >= 0.0) || !std::isfinite(amount)) {
    throw ValidationError("exposure increment must be finite and non-negative");
  }
  exposure_[id] += amount;
}

void ExposureState::set(const ItemId& id, double value) {
  if (!(value >= 0.0) || !std::isfinite(value)) {
    throw ValidationError("exposure must be finite and non-negative");
  }
  exposure_[id] = value;
}

RankedList::RankedList(std::vector<ItemId> entries) : entries_(std::move(entries)) {
  std::unordered_set<ItemId> seen;
  for (const auto& id : entries_) {
    if (!seen.insert(id).second) {
      throw ValidationError("ranked list contains duplicate item " + id);
    }
  }
}

std::optional<std::size_t> RankedList::position_of(const ItemId& id) const {
  auto it = std::find(entries_.begin(), entries_.end(), id);
  if (it == entries_.end()) return std::nullopt;
  return static_cast<std::size_t>(it - entries_.begin()) + 1;
}

RankedList RankedList::truncated(std::size_t k) const {
  RankedList out;
  out.entries_.assign(entries_.begin(),
                      entries_.begin() + static_cast<std::ptrdiff_t>(std::min(k, entries_.size())));
  return out;
}

int PopularityGroups::group(const ItemId& id) const {
  auto it = group_of.find(id);
  if (it == group_of.end()) throw ValidationError("item not assigned to a group: " + id);
  return it->second;
}

std::vector<std::vector<ItemId>> PopularityGroups::members() const {
  std::vector<std::vector<ItemId>> out(static_cast<std::size_t>(count));
  for (const auto& [id, g] : group_of) out[static_cast<std::size_t>(g)].push_back(id);
  for (auto& ids : out) std::sort(ids.begin(), ids.end());
  return out;
}

double cosine_similarity(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) {
    throw ValidationError("cosine_similarity: dimension mismatch (" + std::to_string(a.size()) +
                          " vs " + std::to_string(b.size()) + ")");
  }
  double dot = 0.0, na = 0.0, nb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    dot += a[i] * b[i];
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  if (na == 0.0 || nb == 0.0) {
    throw ValidationError("cosine_similarity: zero vector");
  }
  return std::clamp(dot / (std::sqrt(na) * std::sqrt(nb)), -1.0, 1.0);
}

std::unordered_map<ItemId, std::int64_t> interaction_counts(
    std::span<const Interaction> interactions) {
  std::unordered_map<ItemId, std::int64_t> counts;
  for (const auto& it : interactions) ++counts[it.item_id];
  return counts;
}

PopularityGroups build_popularity_groups(std::span<const ItemRecord> items,
                                         std::span<const Interaction> interactions,
                                         int group_count) {
  if (group_count < 2) throw ValidationError("popularity groups: G must be >= 2");
  if (items.empty()) throw ValidationError("popularity groups: empty catalog");
  if (static_cast<std::size_t>(group_count) > items.size()) {
    throw ValidationError("popularity groups: G=" + std::to_string(group_count) +
                          " exceeds catalog size " + std::to_string(items.size()));
  }

  const auto counts = interaction_counts(interactions);
  auto count_of = [&](const ItemId& id) -> std::int64_t {
    auto it = counts.find(id);
    return it == counts.end() ? 0 : it->second;
  };

  std::vector<std::pair<std::int64_t, const ItemId*>> order;
  order.reserve(items.size());
  for (const auto& item : items) order.emplace_back(count_of(item.item_id), &item.item_id);
  std::sort(order.begin(), order.end(), [](const auto& a, const auto& b) {
    if (a.first != b.first) return a.first > b.first;
    return *a.second < *b.second;
  });

  PopularityGroups groups;
  groups.count = group_count;
  groups.historical_share.assign(static_cast<std::size_t>(group_count), 0.0);

  const std::size_t n = order.size();
  const std::size_t base = n / static_cast<std::size_t>(group_count);
  const std::size_t extra = n % static_cast<std::size_t>(group_count);
  std::vector<std::int64_t> group_mass(static_cast<std::size_t>(group_count), 0);
  std::int64_t total = 0;

  std::size_t cursor = 0;
  for (std::size_t g = 0; g < static_cast<std::size_t>(group_count); ++g) {
    const std::size_t size = base + (g < extra ? 1 : 0);
    for (std::size_t j = 0; j < size; ++j, ++cursor) {
      groups.group_of.emplace(*order[cursor].second, static_cast<int>(g));
      group_mass[g] += order[cursor].first;
      total += order[cursor].first;
    }
  }

  for (std::size_t g = 0; g < group_mass.size(); ++g) {
    groups.historical_share[g] = total > 0
                                     ? static_cast<double>(group_mass[g]) / static_cast<double>(total)
                                     : 1.0 / static_cast<double>(group_count);
  }
  return groups;
}

}  // namespace trirec
