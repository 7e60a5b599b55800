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

// Domain types shared by every stage of the pipeline: catalog items, user
// profiles, interactions, the cumulative exposure state and popularity
// groups. Also hosts the two scalar primitives the utilities are built on.
#pragma once

#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

namespace trirec {

using ItemId = std::string;
using UserId = std::string;
using Embedding = std::vector<double>;

/// Raised when an input violates a documented precondition. The CLI maps
/// this to exit code 1.
class ValidationError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

struct ItemRecord {
  ItemId item_id;
  std::string title;
  std::string category;
  std::string description;
  std::int64_t training_pop = 0;
  Embedding embedding;
};

struct UserProfile {
  UserId user_id;
  std::string profile_text;
  Embedding embedding;
  std::vector<std::string> memory;
};

struct Interaction {
  UserId user_id;
  ItemId item_id;
  std::int64_t timestamp = 0;
  double weight = 1.0;
};

/// Immutable item collection with id lookup. Enforces unique ids and a
/// single embedding dimension (0 while embeddings are not attached yet).
class Catalog {
 public:
  Catalog() = default;
  explicit Catalog(std::vector<ItemRecord> items);

  const std::vector<ItemRecord>& items() const { return items_; }
  std::size_t size() const { return items_.size(); }
  bool empty() const { return items_.empty(); }
  std::size_t dim() const { return dim_; }

  bool contains(const ItemId& id) const { return index_.count(id) != 0; }
  const ItemRecord& at(const ItemId& id) const;
  const ItemRecord* find(const ItemId& id) const;

 private:
  std::vector<ItemRecord> items_;
  std::unordered_map<ItemId, std::size_t> index_;
  std::size_t dim_ = 0;
};

/// Cumulative per-item exposure e^t together with the round counter t.
/// Items never displayed are implicitly at zero.
class ExposureState {
 public:
  double exposure(const ItemId& id) const;
  const std::map<ItemId, double>& values() const { return exposure_; }
  std::int64_t round() const { return round_; }
  double total() const;

  /// Adds a non-negative amount to one item.
  void add(const ItemId& id, double amount);
  void set(const ItemId& id, double value);
  void advance_round() { ++round_; }

  bool operator==(const ExposureState&) const = default;

 private:
  std::map<ItemId, double> exposure_;
  std::int64_t round_ = 0;
};

/// Ordered list of distinct item ids. Positions are 1-based.
class RankedList {
 public:
  RankedList() = default;
  explicit RankedList(std::vector<ItemId> entries);

  const std::vector<ItemId>& entries() const { return entries_; }
  std::size_t size() const { return entries_.size(); }
  bool empty() const { return entries_.empty(); }
  const ItemId& at_position(std::size_t k) const { return entries_.at(k - 1); }
  std::optional<std::size_t> position_of(const ItemId& id) const;

  RankedList truncated(std::size_t k) const;

  bool operator==(const RankedList&) const = default;

 private:
  std::vector<ItemId> entries_;
};

struct PopularityGroups {
  std::unordered_map<ItemId, int> group_of;
  int count = 0;
  /// Share of training interactions per group (q). Sums to 1.
  std::vector<double> historical_share;

  /// Group index of an item; throws ValidationError for unknown items.
  int group(const ItemId& id) const;
  /// Item ids per group, each sorted by id.
  std::vector<std::vector<ItemId>> members() const;
};

double cosine_similarity(std::span<const double> a, std::span<const double> b);

inline double sigmoid(double x) {
  return 1.0 / (1.0 + std::exp(-x));
}

/// Sorts items by training interaction count (descending, ties by ascending
/// id) and cuts them into `group_count` contiguous groups whose sizes differ
/// by at most one; the first |catalog| mod G groups take the extra item.
PopularityGroups build_popularity_groups(std::span<const ItemRecord> items,
                                         std::span<const Interaction> interactions,
                                         int group_count = 8);

/// Interaction count per item id (each interaction counts once).
std::unordered_map<ItemId, std::int64_t> interaction_counts(
    std::span<const Interaction> interactions);

}  // namespace trirec
