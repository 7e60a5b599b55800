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

// File formats. Datasets are JSON Lines:
//
//   interactions.jsonl      {"user_id", "item_id", "timestamp", "weight"?}
//   items.jsonl             {"item_id", "title", "category", "description", "training_pop"?}
//   users.jsonl             {"user_id", "profile_text"}
//   item_embeddings.jsonl   header {"kind": "items", "dim": D}, then {"id", "vector"}
//   user_embeddings.jsonl   header {"kind": "users", "dim": D}, then {"id", "vector"}
//
// Run outputs are results.jsonl (one record per round), metrics.csv
// (metric,k,value), groups.json, config.json and manifest.json. Reals are
// written with 10 significant digits.
#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "trirec/core_model.hpp"
#include "trirec/metrics.hpp"
#include "trirec/simulator.hpp"

namespace trirec::io {

namespace fs = std::filesystem;

/// Malformed file content; message carries path and line number.
class ParseError : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

std::vector<Interaction> load_interactions(const fs::path& path);
std::vector<ItemRecord> load_items(const fs::path& path);
std::vector<UserProfile> load_users(const fs::path& path);

struct EmbeddingTable {
  std::string kind;  // "items" or "users"
  std::size_t dim = 0;
  std::map<std::string, Embedding> vectors;
};

EmbeddingTable load_embeddings(const fs::path& path);

/// Copies vectors onto records; throws listing every id without a vector.
void attach_embeddings(std::vector<ItemRecord>& items, const EmbeddingTable& table);
void attach_embeddings(std::vector<UserProfile>& users, const EmbeddingTable& table);

struct DatasetPaths {
  fs::path items;
  fs::path users;
  fs::path interactions;
  fs::path item_embeddings;
  fs::path user_embeddings;

  /// Standard file names inside one directory.
  static DatasetPaths in_directory(const fs::path& dir);
  std::vector<fs::path> all() const;
};

Dataset load_dataset(const DatasetPaths& paths);

/// Writes the five dataset files; returns their paths.
std::vector<fs::path> write_dataset(const Dataset& data, const fs::path& dir);

void write_interactions(const std::vector<Interaction>& rows, const fs::path& path);
void write_items(const std::vector<ItemRecord>& items, const fs::path& path);
void write_users(const std::vector<UserProfile>& users, const fs::path& path);
void write_embeddings(const EmbeddingTable& table, const fs::path& path);

/// Rounds to 10 significant digits, the precision of every output file.
double round10(double x);
std::string format10(double x);

/// Writes to a sibling temp file and renames over the target.
void write_file_atomic(const fs::path& path, const std::string& content);
std::string read_file(const fs::path& path);

/// Hex SHA-256 of a file's bytes.
std::string sha256_file(const fs::path& path);

// --- configuration -------------------------------------------------------

struct RunConfig {
  SimulationConfig simulation;
  std::optional<DatasetPaths> dataset;
};

nlohmann::json config_to_json(const RunConfig& cfg);
/// Missing fields keep their defaults; unknown keys are rejected.
RunConfig config_from_json(const nlohmann::json& doc);
RunConfig load_config(const fs::path& path);

// --- results ------------------------------------------------------------

nlohmann::json round_to_json(const RoundRecord& rec);
RoundRecord round_from_json(const nlohmann::json& doc);

std::string serialize_results(const EpisodeLog& log);
std::vector<RoundRecord> parse_results(const std::string& jsonl);

std::string metrics_to_csv(const metrics::MetricReport& report);
metrics::MetricReport metrics_from_csv(const std::string& csv);

nlohmann::json groups_to_json(const PopularityGroups& groups);
PopularityGroups groups_from_json(const nlohmann::json& doc);

struct RunManifest {
  nlohmann::json config;
  std::map<std::string, std::string> dataset_digests;  // path -> sha256
  std::string artifact_version;
  std::string command;
  double duration_seconds = 0.0;
  std::vector<std::string> outputs;
  std::optional<std::string> error;
};

nlohmann::json manifest_to_json(const RunManifest& m);

/// Writes results.jsonl, metrics.csv and groups.json; returns their paths.
std::vector<fs::path> write_run_outputs(const EpisodeLog& log, const fs::path& dir);

std::string sweep_to_csv(const std::vector<SweepPoint>& points);

}  // namespace trirec::io
