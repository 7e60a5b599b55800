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

#include "trirec/io.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>
#include <tuple>

#include <openssl/evp.h>
#include <spdlog/spdlog.h>

namespace trirec::io {

using json = nlohmann::json;

// --- small helpers ---------------------------------------------------------

double round10(double x) {
  if (!std::isfinite(x)) return x;
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.10g", x);
  return std::strtod(buf, nullptr);
}

std::string format10(double x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.10g", x);
  return buf;
}

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file_atomic(const fs::path& path, const std::string& content) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  fs::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + tmp.string());
    out << content;
    out.flush();
    if (!out) throw std::runtime_error("write failed for " + tmp.string());
  }
  fs::rename(tmp, path);
}

std::string sha256_file(const fs::path& path) {
  const std::string data = read_file(path);
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(data.data(), data.size(), digest, &len, EVP_sha256(), nullptr) != 1) {
    throw std::runtime_error("sha256 failed for " + path.string());
  }
  static constexpr char kHex[] = "0123456789abcdef";
  std::string hex;
  for (unsigned int i = 0; i < len; ++i) {
    hex.push_back(kHex[digest[i] >> 4]);
    hex.push_back(kHex[digest[i] & 0xF]);
  }
  return hex;
}

namespace {

// Iterates the non-blank lines of a JSON Lines file.
template <typename Fn>
void for_each_record(const fs::path& path, Fn&& fn) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open " + path.string());
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    json doc = json::parse(line, nullptr, false);
    if (doc.is_discarded() || !doc.is_object()) {
      throw ParseError(path.string() + ":" + std::to_string(line_no) + ": not a JSON object");
    }
    fn(doc, line_no);
  }
}

std::string where(const fs::path& path, std::size_t line) {
  return path.string() + ":" + std::to_string(line);
}

std::string required_string(const json& doc, const char* field, const fs::path& path, std::size_t line,
                            bool allow_empty = false) {
  if (!doc.contains(field)) throw ParseError(where(path, line) + ": missing field '" + field + "'");
  if (!doc[field].is_string()) throw ParseError(where(path, line) + ": field '" + field + "' must be a string");
  auto s = doc[field].get<std::string>();
  if (s.empty() && !allow_empty) throw ParseError(where(path, line) + ": field '" + field + "' is empty");
  return s;
}

std::string optional_string(const json& doc, const char* field, const fs::path& path, std::size_t line) {
  if (!doc.contains(field)) return "";
  if (!doc[field].is_string()) throw ParseError(where(path, line) + ": field '" + field + "' must be a string");
  return doc[field].get<std::string>();
}

std::string jsonl(const std::vector<json>& records) {
  std::string out;
  for (const auto& r : records) {
    out += r.dump();
    out += '\n';
  }
  return out;
}

std::string list_ids(const std::vector<std::string>& ids) {
  std::string out;
  for (std::size_t i = 0; i < ids.size() && i < 20; ++i) out += (i ? ", " : "") + ids[i];
  if (ids.size() > 20) out += ", ... (" + std::to_string(ids.size()) + " total)";
  return out;
}

}  // namespace

// --- datasets ------------------------------------------------------------

std::vector<Interaction> load_interactions(const fs::path& path) {
  std::vector<Interaction> rows;
  std::map<std::tuple<std::string, std::string, std::int64_t>, std::size_t> seen;
  for_each_record(path, [&](const json& doc, std::size_t line) {
    Interaction it;
    it.user_id = required_string(doc, "user_id", path, line);
    it.item_id = required_string(doc, "item_id", path, line);
    if (!doc.contains("timestamp")) throw ParseError(where(path, line) + ": missing field 'timestamp'");
    const auto& ts = doc["timestamp"];
    if (!ts.is_number_integer()) throw ParseError(where(path, line) + ": field 'timestamp' must be an integer");
    it.timestamp = ts.get<std::int64_t>();
    if (it.timestamp < 0) throw ParseError(where(path, line) + ": field 'timestamp' must be >= 0");
    if (doc.contains("weight")) {
      if (!doc["weight"].is_number()) throw ParseError(where(path, line) + ": field 'weight' must be a number");
      it.weight = doc["weight"].get<double>();
      if (!(it.weight > 0.0) || !std::isfinite(it.weight)) {
        throw ParseError(where(path, line) + ": field 'weight' must be positive");
      }
    }
    auto [pos, inserted] = seen.emplace(std::make_tuple(it.user_id, it.item_id, it.timestamp), line);
    if (!inserted) {
      throw ParseError(path.string() + ": duplicate interaction (" + it.user_id + ", " + it.item_id + ", " +
                       std::to_string(it.timestamp) + ") on lines " + std::to_string(pos->second) +
                       " and " + std::to_string(line));
    }
    rows.push_back(std::move(it));
  });
  return rows;
}

std::vector<ItemRecord> load_items(const fs::path& path) {
  std::vector<ItemRecord> items;
  std::map<std::string, std::size_t> seen;
  for_each_record(path, [&](const json& doc, std::size_t line) {
    ItemRecord item;
    item.item_id = required_string(doc, "item_id", path, line);
    item.title = required_string(doc, "title", path, line);
    item.category = optional_string(doc, "category", path, line);
    item.description = optional_string(doc, "description", path, line);
    if (doc.contains("training_pop")) {
      if (!doc["training_pop"].is_number_integer() || doc["training_pop"].get<std::int64_t>() < 0) {
        throw ParseError(where(path, line) + ": field 'training_pop' must be a non-negative integer");
      }
      item.training_pop = doc["training_pop"].get<std::int64_t>();
    }
    auto [pos, inserted] = seen.emplace(item.item_id, line);
    if (!inserted) {
      throw ParseError(path.string() + ": duplicate item_id " + item.item_id + " on lines " +
                       std::to_string(pos->second) + " and " + std::to_string(line));
    }
    items.push_back(std::move(item));
  });
  return items;
}

std::vector<UserProfile> load_users(const fs::path& path) {
  std::vector<UserProfile> users;
  std::map<std::string, std::size_t> seen;
  for_each_record(path, [&](const json& doc, std::size_t line) {
    UserProfile user;
    user.user_id = required_string(doc, "user_id", path, line);
    user.profile_text = required_string(doc, "profile_text", path, line, /*allow_empty=*/true);
    auto [pos, inserted] = seen.emplace(user.user_id, line);
    if (!inserted) {
      throw ParseError(path.string() + ": duplicate user_id " + user.user_id + " on lines " +
                       std::to_string(pos->second) + " and " + std::to_string(line));
    }
    users.push_back(std::move(user));
  });
  return users;
}

EmbeddingTable load_embeddings(const fs::path& path) {
  EmbeddingTable table;
  bool have_header = false;
  for_each_record(path, [&](const json& doc, std::size_t line) {
    if (!have_header) {
      table.kind = required_string(doc, "kind", path, line);
      if (table.kind != "items" && table.kind != "users") {
        throw ParseError(where(path, line) + ": header kind must be \"items\" or \"users\"");
      }
      if (!doc.contains("dim") || !doc["dim"].is_number_integer() || doc["dim"].get<std::int64_t>() <= 0) {
        throw ParseError(where(path, line) + ": header needs a positive integer 'dim'");
      }
      table.dim = doc["dim"].get<std::size_t>();
      have_header = true;
      return;
    }
    const auto id = required_string(doc, "id", path, line);
    if (!doc.contains("vector") || !doc["vector"].is_array()) {
      throw ParseError(where(path, line) + ": field 'vector' must be an array");
    }
    const auto& arr = doc["vector"];
    if (arr.size() != table.dim) {
      throw ParseError(where(path, line) + ": vector for " + id + " has length " + std::to_string(arr.size()) +
                       ", header declares dim=" + std::to_string(table.dim));
    }
    Embedding v;
    v.reserve(arr.size());
    for (const auto& x : arr) {
      if (!x.is_number() || !std::isfinite(x.get<double>())) {
        throw ParseError(where(path, line) + ": vector for " + id + " has a non-finite value");
      }
      v.push_back(x.get<double>());
    }
    if (!table.vectors.emplace(id, std::move(v)).second) {
      throw ParseError(where(path, line) + ": duplicate embedding id " + id);
    }
  });
  if (!have_header) throw ParseError(path.string() + ": missing header record");
  return table;
}

namespace {
template <typename Record, typename IdFn>
void attach(std::vector<Record>& records, const EmbeddingTable& table, const char* expected_kind, IdFn id_of) {
  if (table.kind != expected_kind) {
    throw ValidationError(std::string("embedding table kind is '") + table.kind + "', expected '" +
                          expected_kind + "'");
  }
  std::vector<std::string> missing;
  std::set<std::string> used;
  for (auto& r : records) {
    auto it = table.vectors.find(id_of(r));
    if (it == table.vectors.end()) {
      missing.push_back(id_of(r));
      continue;
    }
    r.embedding = it->second;
    used.insert(it->first);
  }
  if (!missing.empty()) {
    throw ValidationError(std::string("missing ") + expected_kind + " embeddings for: " + list_ids(missing));
  }
  if (used.size() != table.vectors.size()) {
    spdlog::warn("{} embedding(s) of kind {} have no matching record", table.vectors.size() - used.size(),
                 expected_kind);
  }
}
}  // namespace

void attach_embeddings(std::vector<ItemRecord>& items, const EmbeddingTable& table) {
  attach(items, table, "items", [](const ItemRecord& r) { return r.item_id; });
}

void attach_embeddings(std::vector<UserProfile>& users, const EmbeddingTable& table) {
  attach(users, table, "users", [](const UserProfile& r) { return r.user_id; });
}

DatasetPaths DatasetPaths::in_directory(const fs::path& dir) {
  return DatasetPaths{dir / "items.jsonl", dir / "users.jsonl", dir / "interactions.jsonl",
                      dir / "item_embeddings.jsonl", dir / "user_embeddings.jsonl"};
}

std::vector<fs::path> DatasetPaths::all() const {
  return {items, users, interactions, item_embeddings, user_embeddings};
}

Dataset load_dataset(const DatasetPaths& paths) {
  auto items = load_items(paths.items);
  auto users = load_users(paths.users);
  auto interactions = load_interactions(paths.interactions);
  const auto item_vectors = load_embeddings(paths.item_embeddings);
  const auto user_vectors = load_embeddings(paths.user_embeddings);
  if (item_vectors.dim != user_vectors.dim) {
    throw ValidationError("item embeddings have dim " + std::to_string(item_vectors.dim) +
                          " but user embeddings have dim " + std::to_string(user_vectors.dim));
  }
  attach_embeddings(items, item_vectors);
  attach_embeddings(users, user_vectors);
  return Dataset{Catalog(std::move(items)), std::move(users), std::move(interactions)};
}

void write_interactions(const std::vector<Interaction>& rows, const fs::path& path) {
  std::vector<json> out;
  for (const auto& r : rows) {
    out.push_back({{"user_id", r.user_id}, {"item_id", r.item_id}, {"timestamp", r.timestamp}, {"weight", r.weight}});
  }
  write_file_atomic(path, jsonl(out));
}

void write_items(const std::vector<ItemRecord>& items, const fs::path& path) {
  std::vector<json> out;
  for (const auto& i : items) {
    out.push_back({{"item_id", i.item_id},
                   {"title", i.title},
                   {"category", i.category},
                   {"description", i.description},
                   {"training_pop", i.training_pop}});
  }
  write_file_atomic(path, jsonl(out));
}

void write_users(const std::vector<UserProfile>& users, const fs::path& path) {
  std::vector<json> out;
  for (const auto& u : users) out.push_back({{"user_id", u.user_id}, {"profile_text", u.profile_text}});
  write_file_atomic(path, jsonl(out));
}

void write_embeddings(const EmbeddingTable& table, const fs::path& path) {
  std::vector<json> out;
  out.push_back({{"kind", table.kind}, {"dim", table.dim}});
  for (const auto& [id, v] : table.vectors) out.push_back({{"id", id}, {"vector", v}});
  write_file_atomic(path, jsonl(out));
}

std::vector<fs::path> write_dataset(const Dataset& data, const fs::path& dir) {
  const auto paths = DatasetPaths::in_directory(dir);
  write_items(data.catalog.items(), paths.items);
  write_users(data.users, paths.users);
  write_interactions(data.interactions, paths.interactions);

  EmbeddingTable items{"items", data.catalog.dim(), {}};
  for (const auto& i : data.catalog.items()) items.vectors.emplace(i.item_id, i.embedding);
  write_embeddings(items, paths.item_embeddings);

  EmbeddingTable users{"users", data.catalog.dim(), {}};
  for (const auto& u : data.users) users.vectors.emplace(u.user_id, u.embedding);
  write_embeddings(users, paths.user_embeddings);
  return paths.all();
}

// --- configuration ---------------------------------------------------------

namespace {

// Reads fields out of one config section, rejecting keys it never consumed.
class Section {
 public:
  Section(const json& doc, std::string name) : doc_(doc), name_(std::move(name)) {
    if (!doc_.is_object()) throw ValidationError("config section '" + name_ + "' must be an object");
  }
  ~Section() noexcept(false) {
    if (std::uncaught_exceptions() == 0) {
      for (const auto& [key, _] : doc_.items()) {
        if (!used_.count(key)) throw ValidationError("config: unknown key '" + name_ + "." + key + "'");
      }
    }
  }

  template <typename T>
  void read(const char* key, T& out) {
    used_.insert(key);
    if (!doc_.contains(key)) return;
    try {
      out = doc_.at(key).get<T>();
    } catch (const json::exception&) {
      throw ValidationError("config: '" + name_ + "." + key + "' has the wrong type");
    }
  }

  template <typename T>
  void read_optional(const char* key, std::optional<T>& out) {
    used_.insert(key);
    if (!doc_.contains(key)) return;
    if (doc_.at(key).is_null()) {
      out.reset();
      return;
    }
    T value{};
    read(key, value);
    out = value;
  }

  bool has(const char* key) const { return doc_.contains(key); }
  const json& child(const char* key) {
    used_.insert(key);
    return doc_.at(key);
  }

 private:
  const json& doc_;
  std::string name_;
  std::set<std::string> used_;
};

json optional_json(const auto& opt) { return opt ? json(*opt) : json(nullptr); }

}  // namespace

json config_to_json(const RunConfig& cfg) {
  const auto& s = cfg.simulation;
  const auto& r = s.rerank;
  const auto& b = s.backend;
  json doc;
  doc["simulation"] = {
      {"seed", s.seed},
      {"n_candidates", s.n_candidates},
      {"user_order", s.user_order == UserOrder::dataset ? "dataset" : "shuffled"},
      {"rounds", optional_json(s.rounds)},
      {"group_count", s.group_count},
      {"metric_ks", s.metric_ks},
      {"exposure_weighting", s.exposure_weighting == metrics::ExposureWeighting::position ? "position" : "uniform"},
  };
  doc["rerank"] = {
      {"alpha_min", r.alpha_min},
      {"alpha_max", r.alpha_max},
      {"p", r.p},
      {"lambda1", r.lambda1},
      {"lambda2", r.lambda2},
      {"lambda_item", r.lambda_item},
      {"K", r.K},
      {"intra_list_state_propagation", r.intra_list_state_propagation},
      {"warm_start_exposure", r.warm_start_exposure},
      {"ablation",
       {{"disable_platform_utility", r.ablation.disable_platform_utility},
        {"static_alpha", optional_json(r.ablation.static_alpha)},
        {"disable_user_utility", r.ablation.disable_user_utility},
        {"disable_item_utility", r.ablation.disable_item_utility},
        {"disable_embedding_sim", r.ablation.disable_embedding_sim},
        {"randomize_embedding_sim", optional_json(r.ablation.randomize_embedding_sim)}}},
  };
  doc["backend"] = {
      {"backend", to_string(b.backend)},
      {"mock_beta", b.mock_beta},
      {"llm_endpoint", b.llm_endpoint},
      {"llm_model", b.llm_model},
      {"llm_temperature", b.llm_temperature},
      {"llm_max_retries", b.llm_max_retries},
      {"llm_timeout_ms", b.llm_timeout_ms},
      {"llm_backoff_base_ms", b.llm_backoff_base_ms},
      {"llm_max_in_flight", b.llm_max_in_flight},
  };
  doc["pipeline"] = {
      {"random_stage1", s.pipeline.random_stage1},
      {"disable_promotions", s.pipeline.disable_promotions},
      {"bypass_stage2", s.pipeline.bypass_stage2},
  };
  if (cfg.dataset) {
    doc["dataset"] = {
        {"items", cfg.dataset->items.string()},
        {"users", cfg.dataset->users.string()},
        {"interactions", cfg.dataset->interactions.string()},
        {"item_embeddings", cfg.dataset->item_embeddings.string()},
        {"user_embeddings", cfg.dataset->user_embeddings.string()},
    };
  }
  return doc;
}

RunConfig config_from_json(const json& doc) {
  RunConfig cfg;
  Section root(doc, "<root>");
  auto& s = cfg.simulation;

  if (root.has("simulation")) {
    Section sec(root.child("simulation"), "simulation");
    sec.read("seed", s.seed);
    sec.read("n_candidates", s.n_candidates);
    std::string order = "dataset";
    sec.read("user_order", order);
    if (order == "dataset") {
      s.user_order = UserOrder::dataset;
    } else if (order == "shuffled") {
      s.user_order = UserOrder::shuffled;
    } else {
      throw ValidationError("config: simulation.user_order must be 'dataset' or 'shuffled'");
    }
    sec.read_optional("rounds", s.rounds);
    sec.read("group_count", s.group_count);
    sec.read("metric_ks", s.metric_ks);
    std::string weighting = "position";
    sec.read("exposure_weighting", weighting);
    if (weighting == "position") {
      s.exposure_weighting = metrics::ExposureWeighting::position;
    } else if (weighting == "uniform") {
      s.exposure_weighting = metrics::ExposureWeighting::uniform;
    } else {
      throw ValidationError("config: simulation.exposure_weighting must be 'position' or 'uniform'");
    }
  }

  if (root.has("rerank")) {
    auto& r = s.rerank;
    Section sec(root.child("rerank"), "rerank");
    sec.read("alpha_min", r.alpha_min);
    sec.read("alpha_max", r.alpha_max);
    sec.read("p", r.p);
    sec.read("lambda1", r.lambda1);
    sec.read("lambda2", r.lambda2);
    sec.read("lambda_item", r.lambda_item);
    sec.read("K", r.K);
    sec.read("intra_list_state_propagation", r.intra_list_state_propagation);
    sec.read("warm_start_exposure", r.warm_start_exposure);
    if (sec.has("ablation")) {
      Section ab(sec.child("ablation"), "rerank.ablation");
      ab.read("disable_platform_utility", r.ablation.disable_platform_utility);
      ab.read_optional("static_alpha", r.ablation.static_alpha);
      ab.read("disable_user_utility", r.ablation.disable_user_utility);
      ab.read("disable_item_utility", r.ablation.disable_item_utility);
      ab.read("disable_embedding_sim", r.ablation.disable_embedding_sim);
      ab.read_optional("randomize_embedding_sim", r.ablation.randomize_embedding_sim);
    }
  }

  if (root.has("backend")) {
    auto& b = s.backend;
    Section sec(root.child("backend"), "backend");
    if (sec.has("llm_api_key")) {
      throw ValidationError("config: API keys are read from TRIREC_LLM_API_KEY only, never from config files");
    }
    std::string kind = "mock";
    sec.read("backend", kind);
    b.backend = parse_backend_kind(kind);
    sec.read("mock_beta", b.mock_beta);
    sec.read("llm_endpoint", b.llm_endpoint);
    sec.read("llm_model", b.llm_model);
    sec.read("llm_temperature", b.llm_temperature);
    sec.read("llm_max_retries", b.llm_max_retries);
    sec.read("llm_timeout_ms", b.llm_timeout_ms);
    sec.read("llm_backoff_base_ms", b.llm_backoff_base_ms);
    sec.read("llm_max_in_flight", b.llm_max_in_flight);
  }

  if (root.has("pipeline")) {
    Section sec(root.child("pipeline"), "pipeline");
    sec.read("random_stage1", s.pipeline.random_stage1);
    sec.read("disable_promotions", s.pipeline.disable_promotions);
    sec.read("bypass_stage2", s.pipeline.bypass_stage2);
  }

  if (root.has("dataset")) {
    Section sec(root.child("dataset"), "dataset");
    std::string dir;
    sec.read("dir", dir);
    DatasetPaths paths = dir.empty() ? DatasetPaths{} : DatasetPaths::in_directory(dir);
    std::string value;
    auto override_path = [&](const char* key, fs::path& target) {
      value.clear();
      sec.read(key, value);
      if (!value.empty()) target = value;
    };
    override_path("items", paths.items);
    override_path("users", paths.users);
    override_path("interactions", paths.interactions);
    override_path("item_embeddings", paths.item_embeddings);
    override_path("user_embeddings", paths.user_embeddings);
    for (const auto& p : paths.all()) {
      if (p.empty()) throw ValidationError("config: dataset section needs 'dir' or all five file paths");
    }
    cfg.dataset = paths;
  }
  return cfg;
}

RunConfig load_config(const fs::path& path) {
  json doc = json::parse(read_file(path), nullptr, false);
  if (doc.is_discarded()) throw ParseError(path.string() + ": not valid JSON");
  auto cfg = config_from_json(doc);
  if (cfg.dataset) {
    // Relative dataset paths resolve against the config file's directory.
    const auto base = path.parent_path();
    auto resolve = [&](fs::path& p) {
      if (p.is_relative()) p = base / p;
    };
    resolve(cfg.dataset->items);
    resolve(cfg.dataset->users);
    resolve(cfg.dataset->interactions);
    resolve(cfg.dataset->item_embeddings);
    resolve(cfg.dataset->user_embeddings);
  }
  return cfg;
}

// --- results ---------------------------------------------------------------

json round_to_json(const RoundRecord& rec) {
  json scores = json::object();
  for (const auto& [id, s] : rec.stage1_scores) scores[id] = round10(s);

  json served = json::array();
  for (std::size_t k = 1; k <= rec.stage2.size(); ++k) {
    served.push_back({{"item_id", rec.stage2.at_position(k)},
                      {"position", k},
                      {"group", rec.served_group.at(k - 1)},
                      {"ctr", round10(rec.served_ctr.at(k - 1))}});
  }

  json breakdowns = json::array();
  for (const auto& b : rec.breakdowns) {
    breakdowns.push_back({{"item_id", b.item_id},
                          {"k", b.k},
                          {"u_user_raw", round10(b.u_user_raw)},
                          {"u_user_norm", round10(b.u_user_norm)},
                          {"u_platform_norm", round10(b.u_platform_norm)},
                          {"u_dgu_gain", round10(b.u_dgu_gain)},
                          {"u_mgu_gain", round10(b.u_mgu_gain)},
                          {"u_item_raw", round10(b.u_item_raw)},
                          {"u_item_norm", round10(b.u_item_norm)},
                          {"alpha_k", round10(b.alpha_k)},
                          {"g", round10(b.g)},
                          {"u_expo_item", round10(b.u_expo_item)},
                          {"u_joint", round10(b.u_joint)}});
  }

  json deltas = json::array();
  for (const auto& [id, d] : rec.exposure_deltas) deltas.push_back({id, round10(d)});

  json ndcg = json::object();
  for (const auto& [k, v] : rec.evaluation.ndcg_at) ndcg[std::to_string(k)] = round10(v);

  return json{{"t", rec.t},
              {"user_id", rec.user_id},
              {"ground_truth", rec.ground_truth},
              {"candidates", rec.candidates},
              {"stage1", rec.stage1.entries()},
              {"stage1_scores", scores},
              {"stage1_degraded", rec.stage1_degraded},
              {"stage2", rec.stage2.entries()},
              {"served", served},
              {"breakdowns", breakdowns},
              {"exposure_deltas", deltas},
              {"metrics",
               {{"ndcg", ndcg},
                {"mrr", round10(rec.evaluation.mrr)},
                {"eiu_target", round10(rec.evaluation.eiu.target)},
                {"eiu_cumulative", round10(rec.evaluation.eiu.cumulative)},
                {"joint_utility", round10(rec.evaluation.joint_utility)}}}};
}

RoundRecord round_from_json(const json& doc) {
  try {
    RoundRecord rec;
    rec.t = doc.at("t").get<std::int64_t>();
    rec.user_id = doc.at("user_id").get<std::string>();
    rec.ground_truth = doc.at("ground_truth").get<std::string>();
    rec.candidates = doc.at("candidates").get<std::vector<std::string>>();
    rec.stage1 = RankedList(doc.at("stage1").get<std::vector<std::string>>());
    rec.stage1_scores = doc.at("stage1_scores").get<std::map<std::string, double>>();
    rec.stage1_degraded = doc.at("stage1_degraded").get<bool>();
    rec.stage2 = RankedList(doc.at("stage2").get<std::vector<std::string>>());
    for (const auto& s : doc.at("served")) {
      rec.served_group.push_back(s.at("group").get<int>());
      rec.served_ctr.push_back(s.at("ctr").get<double>());
    }
    for (const auto& b : doc.at("breakdowns")) {
      JointUtilityBreakdown jb;
      jb.item_id = b.at("item_id").get<std::string>();
      jb.k = b.at("k").get<int>();
      jb.u_user_raw = b.at("u_user_raw").get<double>();
      jb.u_user_norm = b.at("u_user_norm").get<double>();
      jb.u_platform_norm = b.at("u_platform_norm").get<double>();
      jb.u_dgu_gain = b.at("u_dgu_gain").get<double>();
      jb.u_mgu_gain = b.at("u_mgu_gain").get<double>();
      jb.u_item_raw = b.at("u_item_raw").get<double>();
      jb.u_item_norm = b.at("u_item_norm").get<double>();
      jb.alpha_k = b.at("alpha_k").get<double>();
      jb.g = b.at("g").get<double>();
      jb.u_expo_item = b.at("u_expo_item").get<double>();
      jb.u_joint = b.at("u_joint").get<double>();
      rec.breakdowns.push_back(std::move(jb));
    }
    for (const auto& d : doc.at("exposure_deltas")) {
      rec.exposure_deltas.emplace_back(d.at(0).get<std::string>(), d.at(1).get<double>());
    }
    const auto& m = doc.at("metrics");
    auto& ev = rec.evaluation;
    ev.user_id = rec.user_id;
    ev.ground_truth = rec.ground_truth;
    ev.served = rec.stage2;
    for (const auto& [k, v] : m.at("ndcg").items()) ev.ndcg_at[std::stoi(k)] = v.get<double>();
    ev.mrr = m.at("mrr").get<double>();
    ev.eiu.target = m.at("eiu_target").get<double>();
    ev.eiu.cumulative = m.at("eiu_cumulative").get<double>();
    ev.joint_utility = m.at("joint_utility").get<double>();
    return rec;
  } catch (const json::exception& e) {
    throw ParseError(std::string("malformed round record: ") + e.what());
  }
}

std::string serialize_results(const EpisodeLog& log) {
  std::string out;
  for (const auto& rec : log.rounds) {
    out += round_to_json(rec).dump();
    out += '\n';
  }
  return out;
}

std::vector<RoundRecord> parse_results(const std::string& content) {
  std::vector<RoundRecord> rounds;
  std::istringstream in(content);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    json doc = json::parse(line, nullptr, false);
    if (doc.is_discarded()) throw ParseError("results line " + std::to_string(line_no) + ": not JSON");
    rounds.push_back(round_from_json(doc));
  }
  return rounds;
}

std::string metrics_to_csv(const metrics::MetricReport& r) {
  std::string out = "metric,k,value\n";
  auto row = [&](const std::string& name, const std::string& k, double v) {
    out += name + "," + k + "," + format10(v) + "\n";
  };
  for (const auto& [k, v] : r.ndcg_at) row("ndcg", std::to_string(k), v);
  row("mrr", "", r.mrr);
  for (const auto& [k, v] : r.dgu_at) row("dgu", std::to_string(k), v);
  for (const auto& [k, v] : r.mgu_at) row("mgu", std::to_string(k), v);
  row("eiu_target", "", r.eiu_target_mean);
  row("eiu_cumulative", "", r.eiu_cumulative);
  row("joint_utility_mean", "", r.joint_utility_mean);
  out += "n_users,," + std::to_string(r.n_users) + "\n";
  return out;
}

metrics::MetricReport metrics_from_csv(const std::string& csv) {
  metrics::MetricReport r;
  std::istringstream in(csv);
  std::string line;
  std::getline(in, line);
  if (line != "metric,k,value") throw ParseError("metrics.csv: unexpected header '" + line + "'");
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const auto c1 = line.find(',');
    const auto c2 = line.find(',', c1 == std::string::npos ? c1 : c1 + 1);
    if (c1 == std::string::npos || c2 == std::string::npos) {
      throw ParseError("metrics.csv:" + std::to_string(line_no) + ": expected 3 columns");
    }
    const std::string name = line.substr(0, c1);
    const std::string k = line.substr(c1 + 1, c2 - c1 - 1);
    double value = 0.0;
    try {
      value = std::stod(line.substr(c2 + 1));
    } catch (const std::exception&) {
      throw ParseError("metrics.csv:" + std::to_string(line_no) + ": bad value");
    }
    auto key = [&] {
      try {
        return std::stoi(k);
      } catch (const std::exception&) {
        throw ParseError("metrics.csv:" + std::to_string(line_no) + ": metric " + name + " needs k");
      }
    };
    if (name == "ndcg") r.ndcg_at[key()] = value;
    else if (name == "dgu") r.dgu_at[key()] = value;
    else if (name == "mgu") r.mgu_at[key()] = value;
    else if (name == "mrr") r.mrr = value;
    else if (name == "eiu_target") r.eiu_target_mean = value;
    else if (name == "eiu_cumulative") r.eiu_cumulative = value;
    else if (name == "joint_utility_mean") r.joint_utility_mean = value;
    else if (name == "n_users") r.n_users = static_cast<int>(value);
    else throw ParseError("metrics.csv:" + std::to_string(line_no) + ": unknown metric " + name);
  }
  return r;
}

json groups_to_json(const PopularityGroups& groups) {
  json members = json::array();
  for (const auto& ids : groups.members()) members.push_back(ids);
  return json{{"count", groups.count}, {"historical_share", groups.historical_share}, {"members", members}};
}

PopularityGroups groups_from_json(const json& doc) {
  try {
    PopularityGroups g;
    g.count = doc.at("count").get<int>();
    g.historical_share = doc.at("historical_share").get<std::vector<double>>();
    const auto& members = doc.at("members");
    for (std::size_t i = 0; i < members.size(); ++i) {
      for (const auto& id : members[i]) g.group_of[id.get<std::string>()] = static_cast<int>(i);
    }
    if (static_cast<int>(g.historical_share.size()) != g.count || static_cast<int>(members.size()) != g.count) {
      throw ParseError("groups.json: inconsistent group count");
    }
    return g;
  } catch (const json::exception& e) {
    throw ParseError(std::string("groups.json: ") + e.what());
  }
}

json manifest_to_json(const RunManifest& m) {
  json doc{{"artifact_version", m.artifact_version},
           {"command", m.command},
           {"config", m.config},
           {"dataset_digests", m.dataset_digests},
           {"duration_seconds", round10(m.duration_seconds)},
           {"outputs", m.outputs}};
  doc["error"] = m.error ? json(*m.error) : json(nullptr);
  return doc;
}

std::vector<fs::path> write_run_outputs(const EpisodeLog& log, const fs::path& dir) {
  const auto results = dir / "results.jsonl";
  const auto metrics_csv = dir / "metrics.csv";
  const auto groups = dir / "groups.json";
  write_file_atomic(results, serialize_results(log));
  if (log.report) write_file_atomic(metrics_csv, metrics_to_csv(*log.report));
  write_file_atomic(groups, groups_to_json(log.groups).dump(2) + "\n");
  std::vector<fs::path> out{results, groups};
  if (log.report) out.insert(out.begin() + 1, metrics_csv);
  return out;
}

std::string sweep_to_csv(const std::vector<SweepPoint>& points) {
  std::string out = "alpha_max,metric,k,value\n";
  for (const auto& p : points) {
    const std::string a = format10(p.alpha_max);
    std::istringstream rows(metrics_to_csv(p.report));
    std::string line;
    std::getline(rows, line);  // header
    while (std::getline(rows, line)) out += a + "," + line + "\n";
  }
  return out;
}

}  // namespace trirec::io
