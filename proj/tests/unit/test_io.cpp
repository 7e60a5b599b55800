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


#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>

#include "trirec/io.hpp"
#include "trirec/synthetic.hpp"

namespace trirec::io {
namespace {

class TempDir : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() /
           ("trirec_io_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }

  fs::path write(const std::string& name, const std::string& content) {
    const auto p = dir_ / name;
    std::ofstream(p) << content;
    return p;
  }

  static std::string message_of(const std::function<void()>& fn) {
    try {
      fn();
    } catch (const ValidationError& e) {
      return e.what();
    }
    return "<no error>";
  }

  fs::path dir_;
};

using Loaders = TempDir;

TEST_F(Loaders, TwoInteractions) {
  const auto p = write("i.jsonl",
                       "{\"user_id\":\"u1\",\"item_id\":\"a\",\"timestamp\":5}\n"
                       "\n"
                       "{\"user_id\":\"u1\",\"item_id\":\"b\",\"timestamp\":6,\"weight\":2.5}\n");
  const auto rows = load_interactions(p);
  ASSERT_EQ(rows.size(), 2u);
  EXPECT_EQ(rows[0].item_id, "a");
  EXPECT_EQ(rows[0].weight, 1.0);
  EXPECT_EQ(rows[1].timestamp, 6);
  EXPECT_EQ(rows[1].weight, 2.5);
}

TEST_F(Loaders, MissingFieldIsNamedWithLine) {
  const auto p = write("i.jsonl",
                       "{\"user_id\":\"u1\",\"item_id\":\"a\",\"timestamp\":5}\n"
                       "{\"user_id\":\"u1\",\"timestamp\":6}\n");
  const auto msg = message_of([&] { load_interactions(p); });
  EXPECT_NE(msg.find("item_id"), std::string::npos) << msg;
  EXPECT_NE(msg.find(":2"), std::string::npos) << msg;
}

TEST_F(Loaders, BadInteractionValues) {
  EXPECT_THROW(load_interactions(write("a", "{\"user_id\":\"u\",\"item_id\":\"a\",\"timestamp\":-1}\n")), ParseError);
  EXPECT_THROW(load_interactions(write("b", "{\"user_id\":\"u\",\"item_id\":\"a\",\"timestamp\":1.5}\n")), ParseError);
  EXPECT_THROW(load_interactions(write("c", "{\"user_id\":\"u\",\"item_id\":\"a\",\"timestamp\":1,\"weight\":0}\n")),
               ParseError);
  EXPECT_THROW(load_interactions(write("d", "[1,2]\n")), ParseError);
  EXPECT_THROW(load_interactions(write("e", "{not json\n")), ParseError);
  EXPECT_THROW(load_interactions(dir_ / "absent.jsonl"), ValidationError);
}

TEST_F(Loaders, DuplicateItemNamesBothLines) {
  const auto p = write("items.jsonl",
                       "{\"item_id\":\"a\",\"title\":\"A\",\"category\":\"c\",\"description\":\"\"}\n"
                       "{\"item_id\":\"b\",\"title\":\"B\",\"category\":\"c\",\"description\":\"\"}\n"
                       "{\"item_id\":\"a\",\"title\":\"A2\",\"category\":\"c\",\"description\":\"\"}\n");
  const auto msg = message_of([&] { load_items(p); });
  EXPECT_NE(msg.find("duplicate item_id a"), std::string::npos) << msg;
  EXPECT_NE(msg.find("lines 1 and 3"), std::string::npos) << msg;
}

TEST_F(Loaders, ItemsAndUsers) {
  const auto items = load_items(write(
      "items.jsonl", "{\"item_id\":\"a\",\"title\":\"A\",\"category\":\"rock\",\"description\":\"d\",\"training_pop\":4}\n"));
  ASSERT_EQ(items.size(), 1u);
  EXPECT_EQ(items[0].category, "rock");
  EXPECT_EQ(items[0].training_pop, 4);
  const auto users = load_users(write("users.jsonl", "{\"user_id\":\"u1\",\"profile_text\":\"Loves jazz\"}\n"));
  ASSERT_EQ(users.size(), 1u);
  EXPECT_EQ(users[0].profile_text, "Loves jazz");
  EXPECT_THROW(load_users(write("u2.jsonl", "{\"user_id\":\"u1\",\"profile_text\":\"x\"}\n"
                                            "{\"user_id\":\"u1\",\"profile_text\":\"y\"}\n")),
               ParseError);
}

TEST_F(Loaders, EmbeddingsDimFour) {
  const auto t = load_embeddings(write("e.jsonl",
                                       "{\"kind\":\"items\",\"dim\":4}\n"
                                       "{\"id\":\"a\",\"vector\":[1,0,0,0]}\n"
                                       "{\"id\":\"b\",\"vector\":[0,0.5,0.5,0]}\n"));
  EXPECT_EQ(t.kind, "items");
  EXPECT_EQ(t.dim, 4u);
  EXPECT_EQ(t.vectors.at("b"), (Embedding{0, 0.5, 0.5, 0}));
}

TEST_F(Loaders, EmbeddingLengthMismatch) {
  const auto p = write("e.jsonl",
                       "{\"kind\":\"items\",\"dim\":4}\n"
                       "{\"id\":\"a\",\"vector\":[1,0,0]}\n");
  const auto msg = message_of([&] { load_embeddings(p); });
  EXPECT_NE(msg.find("length 3"), std::string::npos) << msg;
  EXPECT_NE(msg.find(":2"), std::string::npos) << msg;
}

TEST_F(Loaders, EmbeddingHeaderAndDuplicates) {
  EXPECT_THROW(load_embeddings(write("a", "{\"id\":\"a\",\"vector\":[1]}\n")), ParseError);
  EXPECT_THROW(load_embeddings(write("b", "{\"kind\":\"other\",\"dim\":1}\n")), ParseError);
  EXPECT_THROW(load_embeddings(write("c", "{\"kind\":\"items\",\"dim\":0}\n")), ParseError);
  EXPECT_THROW(load_embeddings(write("d",
                                     "{\"kind\":\"items\",\"dim\":1}\n"
                                     "{\"id\":\"a\",\"vector\":[1]}\n{\"id\":\"a\",\"vector\":[2]}\n")),
               ParseError);
}

TEST(Attach, MissingIdsAreListed) {
  std::vector<ItemRecord> items(3);
  items[0].item_id = "a";
  items[1].item_id = "b";
  items[2].item_id = "c";
  EmbeddingTable t{"items", 2, {{"a", {1, 0}}}};
  try {
    attach_embeddings(items, t);
    FAIL();
  } catch (const ValidationError& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("b"), std::string::npos);
    EXPECT_NE(msg.find("c"), std::string::npos);
  }
}

TEST(Attach, WrongKindThrows) {
  std::vector<UserProfile> users(1);
  users[0].user_id = "u";
  EmbeddingTable t{"items", 1, {{"u", {1}}}};
  EXPECT_THROW(attach_embeddings(users, t), ValidationError);
  t.kind = "users";
  attach_embeddings(users, t);
  EXPECT_EQ(users[0].embedding, Embedding{1});
}

using DatasetFiles = TempDir;

TEST_F(DatasetFiles, RoundTrip) {
  SyntheticSpec spec;
  spec.n_users = 10;
  spec.n_items = 64;
  spec.min_interactions = 3;
  spec.max_interactions = 5;
  const auto data = generate_synthetic_dataset(spec);
  const auto files = write_dataset(data, dir_);
  EXPECT_EQ(files.size(), 5u);
  const auto back = load_dataset(DatasetPaths::in_directory(dir_));
  ASSERT_EQ(back.catalog.size(), data.catalog.size());
  for (std::size_t i = 0; i < data.catalog.size(); ++i) {
    const auto& a = data.catalog.items()[i];
    const auto& b = back.catalog.at(a.item_id);
    EXPECT_EQ(a.title, b.title);
    EXPECT_EQ(a.training_pop, b.training_pop);
    EXPECT_EQ(a.embedding, b.embedding);
  }
  ASSERT_EQ(back.users.size(), data.users.size());
  EXPECT_EQ(back.users[3].embedding, data.users[3].embedding);
  ASSERT_EQ(back.interactions.size(), data.interactions.size());
  EXPECT_EQ(back.interactions[7].timestamp, data.interactions[7].timestamp);

  const auto again = dir_ / "again";
  write_dataset(back, again);
  for (const auto& f : files) EXPECT_EQ(read_file(f), read_file(again / f.filename()));
}

TEST_F(DatasetFiles, DimMismatchThrows) {
  const auto paths = DatasetPaths::in_directory(dir_);
  write_items({}, paths.items);
  write_users({}, paths.users);
  write_interactions({}, paths.interactions);
  write_embeddings({"items", 4, {}}, paths.item_embeddings);
  write_embeddings({"users", 3, {}}, paths.user_embeddings);
  EXPECT_THROW(load_dataset(paths), ValidationError);
}

TEST(Numbers, TenSignificantDigits) {
  EXPECT_EQ(format10(0.1234567890123), "0.123456789");
  EXPECT_EQ(format10(1.0), "1");
  EXPECT_EQ(round10(2.0 / 3.0), 0.6666666667);
  EXPECT_EQ(round10(0.0), 0.0);
}

using Files = TempDir;

TEST_F(Files, AtomicWriteReplaces) {
  const auto p = dir_ / "out.txt";
  write_file_atomic(p, "first");
  write_file_atomic(p, "second");
  EXPECT_EQ(read_file(p), "second");
  EXPECT_FALSE(fs::exists(dir_ / "out.txt.tmp"));
}

TEST_F(Files, Sha256KnownDigests) {
  EXPECT_EQ(sha256_file(write("abc", "abc")),
            "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
  EXPECT_EQ(sha256_file(write("empty", "")),
            "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
}

TEST(Config, DefaultsRoundTrip) {
  RunConfig cfg;
  cfg.simulation.seed = 99;
  cfg.simulation.rounds = 12;
  cfg.simulation.user_order = UserOrder::shuffled;
  cfg.simulation.rerank.alpha_max = 0.85;
  cfg.simulation.rerank.ablation.static_alpha = 0.2;
  cfg.simulation.backend.mock_beta = 0.0;
  cfg.simulation.pipeline.bypass_stage2 = true;
  cfg.dataset = DatasetPaths::in_directory("/data/x");
  const auto doc = config_to_json(cfg);
  const auto back = config_from_json(doc);
  EXPECT_EQ(config_to_json(back), doc);
  EXPECT_EQ(back.simulation.rounds, 12);
  EXPECT_EQ(back.simulation.rerank.ablation.static_alpha, 0.2);
}

TEST(Config, EmptyDocumentKeepsDefaults) {
  const auto cfg = config_from_json(nlohmann::json::object());
  EXPECT_EQ(cfg.simulation.seed, SimulationConfig{}.seed);
  EXPECT_EQ(cfg.simulation.rerank.alpha_max, 0.7);
  EXPECT_FALSE(cfg.dataset.has_value());
}

TEST(Config, UnknownKeysRejected) {
  EXPECT_THROW(config_from_json(nlohmann::json{{"simulaton", nlohmann::json::object()}}), ValidationError);
  EXPECT_THROW(config_from_json(nlohmann::json{{"rerank", {{"alpha_maxx", 0.5}}}}), ValidationError);
  EXPECT_THROW(config_from_json(nlohmann::json{{"rerank", {{"ablation", {{"bogus", true}}}}}}), ValidationError);
}

TEST(Config, WrongTypesRejected) {
  EXPECT_THROW(config_from_json(nlohmann::json{{"rerank", {{"alpha_max", "high"}}}}), ValidationError);
  EXPECT_THROW(config_from_json(nlohmann::json{{"simulation", {{"user_order", "random"}}}}), ValidationError);
  EXPECT_THROW(config_from_json(nlohmann::json{{"backend", {{"backend", "gpt"}}}}), ValidationError);
}

TEST(Config, ApiKeyNeverFromFile) {
  EXPECT_THROW(config_from_json(nlohmann::json{{"backend", {{"llm_api_key", "sk-123"}}}}), ValidationError);
  EXPECT_FALSE(config_to_json(RunConfig{})["backend"].contains("llm_api_key"));
}

TEST(Config, DatasetNeedsAllPaths) {
  EXPECT_THROW(config_from_json(nlohmann::json{{"dataset", {{"items", "a.jsonl"}}}}), ValidationError);
  const auto cfg = config_from_json(nlohmann::json{{"dataset", {{"dir", "d"}, {"users", "other.jsonl"}}}});
  EXPECT_EQ(cfg.dataset->users, "other.jsonl");
  EXPECT_EQ(cfg.dataset->items, fs::path("d") / "items.jsonl");
}

using ConfigFiles = TempDir;

TEST_F(ConfigFiles, RelativeDatasetResolvesAgainstConfigDir) {
  const auto p = write("cfg.json", "{\"dataset\": {\"dir\": \"data\"}}");
  const auto cfg = load_config(p);
  EXPECT_EQ(cfg.dataset->items, dir_ / "data" / "items.jsonl");
  EXPECT_THROW(load_config(write("bad.json", "{")), ParseError);
}

SimulationConfig tiny_sim() {
  SimulationConfig cfg;
  cfg.rounds = 6;
  return cfg;
}

Dataset tiny_data() {
  SyntheticSpec spec;
  spec.n_users = 12;
  spec.n_items = 64;
  spec.min_interactions = 3;
  spec.max_interactions = 6;
  return generate_synthetic_dataset(spec);
}

TEST(Results, SerializeParseRoundTrip) {
  const auto log = run_simulation(tiny_data(), tiny_sim());
  const auto text = serialize_results(log);
  const auto rounds = parse_results(text);
  ASSERT_EQ(rounds.size(), log.rounds.size());
  for (std::size_t i = 0; i < rounds.size(); ++i) {
    const auto& a = log.rounds[i];
    const auto& b = rounds[i];
    EXPECT_EQ(a.user_id, b.user_id);
    EXPECT_EQ(a.candidates, b.candidates);
    EXPECT_EQ(a.stage1, b.stage1);
    EXPECT_EQ(a.stage2, b.stage2);
    EXPECT_EQ(a.served_group, b.served_group);
    ASSERT_EQ(a.breakdowns.size(), b.breakdowns.size());
    EXPECT_NEAR(a.breakdowns[2].u_joint, b.breakdowns[2].u_joint, 1e-9);
    EXPECT_NEAR(a.evaluation.eiu.cumulative, b.evaluation.eiu.cumulative, 1e-9);
  }
  std::string again;
  for (const auto& r : rounds) again += round_to_json(r).dump() + "\n";
  EXPECT_EQ(again, text);
}

TEST(Results, RecordHasDocumentedFields) {
  const auto log = run_simulation(tiny_data(), tiny_sim());
  const auto doc = round_to_json(log.rounds.at(0));
  for (const char* key : {"t", "user_id", "ground_truth", "candidates", "stage1", "stage1_scores",
                          "stage1_degraded", "stage2", "served", "breakdowns", "exposure_deltas", "metrics"}) {
    EXPECT_TRUE(doc.contains(key)) << key;
  }
  EXPECT_EQ(doc["served"][0]["position"], 1);
  EXPECT_TRUE(doc["metrics"]["ndcg"].contains("5"));
}

TEST(Results, MalformedLines) {
  EXPECT_THROW(parse_results("{\"t\":1}\n"), ParseError);
  EXPECT_THROW(parse_results("nope\n"), ParseError);
  EXPECT_TRUE(parse_results("\n\n").empty());
}

TEST(MetricsCsv, RoundTripWithinTolerance) {
  const auto log = run_simulation(tiny_data(), tiny_sim());
  const auto& r = *log.report;
  const auto back = metrics_from_csv(metrics_to_csv(r));
  for (const auto& [k, v] : r.ndcg_at) EXPECT_NEAR(back.ndcg_at.at(k), v, 1e-9);
  for (const auto& [k, v] : r.dgu_at) EXPECT_NEAR(back.dgu_at.at(k), v, 1e-9);
  for (const auto& [k, v] : r.mgu_at) EXPECT_NEAR(back.mgu_at.at(k), v, 1e-9);
  EXPECT_NEAR(back.mrr, r.mrr, 1e-9);
  EXPECT_NEAR(back.eiu_target_mean, r.eiu_target_mean, 1e-9);
  EXPECT_NEAR(back.eiu_cumulative, r.eiu_cumulative, 1e-9);
  EXPECT_NEAR(back.joint_utility_mean, r.joint_utility_mean, 1e-9);
  EXPECT_EQ(back.n_users, 6);
}

TEST(MetricsCsv, Errors) {
  EXPECT_THROW(metrics_from_csv("a,b,c\n"), ParseError);
  EXPECT_THROW(metrics_from_csv("metric,k,value\nndcg,,0.5\n"), ParseError);
  EXPECT_THROW(metrics_from_csv("metric,k,value\nweird,,0.5\n"), ParseError);
  EXPECT_THROW(metrics_from_csv("metric,k,value\nmrr,,x\n"), ParseError);
}

TEST(Groups, JsonRoundTrip) {
  const auto log = run_simulation(tiny_data(), tiny_sim());
  const auto back = groups_from_json(groups_to_json(log.groups));
  EXPECT_EQ(back.count, log.groups.count);
  EXPECT_EQ(back.historical_share, log.groups.historical_share);
  EXPECT_EQ(back.group_of, log.groups.group_of);
  EXPECT_THROW(groups_from_json(nlohmann::json{{"count", 2}, {"historical_share", {1.0}}, {"members", {{"a"}}}}),
               ParseError);
}

TEST(Manifest, ErrorIsNullOnSuccess) {
  RunManifest m;
  m.command = "run";
  EXPECT_TRUE(manifest_to_json(m)["error"].is_null());
  m.error = "boom";
  EXPECT_EQ(manifest_to_json(m)["error"], "boom");
}

TEST(Sweep, CsvPrefixesAlpha) {
  metrics::MetricReport r;
  r.ndcg_at[5] = 0.5;
  r.n_users = 3;
  const auto csv = sweep_to_csv({{0.25, r}});
  EXPECT_EQ(csv.rfind("alpha_max,metric,k,value\n", 0), 0u);
  EXPECT_NE(csv.find("0.25,ndcg,5,0.5\n"), std::string::npos);
  EXPECT_NE(csv.find("0.25,n_users,,3\n"), std::string::npos);
}

}  // namespace
}  // namespace trirec::io
