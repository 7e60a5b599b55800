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

// Small builders shared by the unit tests.
#pragma once

#include <string>
#include <vector>

#include "trirec/core_model.hpp"
#include "trirec/rng.hpp"

namespace trirec::testing {

inline ItemRecord make_item(std::string id, Embedding e, std::string title = "Item",
                            std::string category = "misc", std::string description = "") {
  ItemRecord item;
  item.item_id = std::move(id);
  item.title = std::move(title);
  item.category = std::move(category);
  item.description = std::move(description);
  item.embedding = std::move(e);
  return item;
}

inline UserProfile make_user(std::string id, Embedding e, std::string profile = "") {
  UserProfile user;
  user.user_id = std::move(id);
  user.profile_text = std::move(profile);
  user.embedding = std::move(e);
  return user;
}

/// Unit vector with normally distributed direction.
inline Embedding random_unit(Rng& rng, std::size_t dim) {
  Embedding v(dim);
  double norm = 0.0;
  while (norm == 0.0) {
    norm = 0.0;
    for (auto& x : v) {
      x = rng.normal();
      norm += x * x;
    }
  }
  norm = std::sqrt(norm);
  for (auto& x : v) x /= norm;
  return v;
}

/// Random shares summing to one.
inline std::vector<double> random_simplex(Rng& rng, std::size_t n) {
  std::vector<double> v(n);
  double total = 0.0;
  for (auto& x : v) {
    x = -std::log(1.0 - rng.uniform());
    total += x;
  }
  for (auto& x : v) x /= total;
  return v;
}

inline std::string id_of(const char* prefix, int n) { return prefix + std::to_string(100 + n); }

}  // namespace trirec::testing
