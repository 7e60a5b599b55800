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

// Desk-scale synthetic benchmark. Items and users are written as short
// topical texts; embeddings are signed feature-hashed token bags of those
// texts, so cosine similarity reflects shared vocabulary. Item popularity
// follows a Zipf law with a configurable exponent, popular items lean
// towards a few mainstream topics, and users interact with items with
// probability proportional to popularity · exp(affinity · cosine), the
// taste factor divided by its mean over users so that only the skew shapes
// item popularity.
#pragma once

#include <cstdint>
#include <string_view>

#include "trirec/simulator.hpp"

namespace trirec {

struct SyntheticSpec {
  int n_users = 200;
  int n_items = 400;
  double skew = 1.2;
  std::uint64_t seed = 7;
  int dim = 64;
  int min_interactions = 6;
  int max_interactions = 14;
  int group_count = 8;
  double affinity = 14.0;

  void validate() const;
};

/// Unit-normalized signed feature hashing of the text's tokens.
Embedding hashed_embedding(std::string_view text, int dim);

Dataset generate_synthetic_dataset(const SyntheticSpec& spec);

}  // namespace trirec
