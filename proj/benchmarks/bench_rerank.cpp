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


#include <benchmark/benchmark.h>

#include "trirec/rerank.hpp"
#include "trirec/simulator.hpp"
#include "trirec/synthetic.hpp"

namespace {

using namespace trirec;

struct Fixture {
  Dataset data;
  PopularityGroups groups;
  ExposureState state;
  UserProfile user;
  Stage1Result stage1;

  explicit Fixture(int n) : data(generate_synthetic_dataset({})) {
    groups = build_popularity_groups(data.catalog.items(), data.interactions, 8);
    for (std::size_t i = 0; i < data.catalog.size(); i += 3) {
      state.set(data.catalog.items()[i].item_id, 0.1 * static_cast<double>(i % 17));
    }
    user = data.users.front();
    for (int i = 0; i < n; ++i) {
      stage1.scores[data.catalog.items()[static_cast<std::size_t>(i)].item_id] = 1.0 / (1.0 + i);
    }
    stage1.user_id = user.user_id;
    stage1.ranking = rank_by_scores(stage1.scores);
  }
};

void BM_GreedyRerank(benchmark::State& st) {
  const int n = static_cast<int>(st.range(0));
  Fixture f(n);
  RerankConfig cfg;
  cfg.K = n;
  for (auto _ : st) {
    auto r = greedy_rerank(f.user, f.stage1, f.data.catalog, f.state, f.groups, cfg);
    benchmark::DoNotOptimize(r);
  }
  st.SetComplexityN(n);
}
BENCHMARK(BM_GreedyRerank)->Arg(10)->Arg(20)->Arg(50)->Arg(100)->Complexity();

void BM_SimulationRounds(benchmark::State& st) {
  const auto data = generate_synthetic_dataset({});
  SimulationConfig cfg;
  cfg.rounds = static_cast<int>(st.range(0));
  for (auto _ : st) {
    auto log = run_simulation(data, cfg);
    benchmark::DoNotOptimize(log);
  }
  st.SetItemsProcessed(st.iterations() * st.range(0));
}
BENCHMARK(BM_SimulationRounds)->Arg(1)->Arg(50)->Arg(200)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
