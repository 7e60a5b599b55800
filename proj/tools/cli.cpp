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

#include "cli.hpp"

#include <chrono>
#include <iostream>
#include <optional>
#include <sstream>

#include <CLI11.hpp>
#include <spdlog/spdlog.h>

#include "trirec/io.hpp"
#include "trirec/llm_client.hpp"
#include "trirec/synthetic.hpp"

#ifndef TRIREC_VERSION
#define TRIREC_VERSION "0.0.0"
#endif

namespace trirec::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

// Flags shared by run, ablate and sweep; each overrides the config file.
struct CommonOptions {
  std::string config;
  std::string data;
  std::string out;
  std::optional<std::uint64_t> seed;
  std::optional<int> n_candidates;
  std::optional<int> rounds;
  std::optional<double> alpha_min;
  std::optional<double> alpha_max;
  std::optional<double> p;
  std::optional<double> lambda1;
  std::optional<double> lambda2;
  std::optional<double> lambda_item;
  std::optional<int> top_k;
  std::optional<std::string> backend;
  std::optional<double> mock_beta;
  std::optional<std::string> user_order;
};

void add_common(CLI::App& cmd, CommonOptions& o) {
  cmd.add_option("--config", o.config, "JSON configuration file")->check(CLI::ExistingFile);
  cmd.add_option("--data", o.data, "dataset directory (overrides the config's dataset section)");
  cmd.add_option("--out", o.out, "output directory")->required();
  cmd.add_option("--seed", o.seed, "run seed");
  cmd.add_option("--n-candidates", o.n_candidates, "candidates per round");
  cmd.add_option("--rounds", o.rounds, "stop after this many rounds");
  cmd.add_option("--alpha-min", o.alpha_min);
  cmd.add_option("--alpha-max", o.alpha_max);
  cmd.add_option("--p", o.p, "participation exponent");
  cmd.add_option("--lambda1", o.lambda1, "DGU weight");
  cmd.add_option("--lambda2", o.lambda2, "MGU weight");
  cmd.add_option("--lambda-item", o.lambda_item, "item-utility exponent");
  cmd.add_option("-K,--top-k", o.top_k, "served list length");
  cmd.add_option("--backend", o.backend, "mock or llm")->check(CLI::IsMember({"mock", "llm"}));
  cmd.add_option("--mock-beta", o.mock_beta);
  cmd.add_option("--user-order", o.user_order)->check(CLI::IsMember({"dataset", "shuffled"}));
}

io::RunConfig resolve_config(const CommonOptions& o) {
  io::RunConfig cfg = o.config.empty() ? io::RunConfig{} : io::load_config(o.config);
  auto& s = cfg.simulation;
  if (!o.data.empty()) cfg.dataset = io::DatasetPaths::in_directory(o.data);
  if (o.seed) s.seed = *o.seed;
  if (o.n_candidates) s.n_candidates = *o.n_candidates;
  if (o.rounds) s.rounds = *o.rounds;
  if (o.alpha_min) s.rerank.alpha_min = *o.alpha_min;
  if (o.alpha_max) s.rerank.alpha_max = *o.alpha_max;
  if (o.p) s.rerank.p = *o.p;
  if (o.lambda1) s.rerank.lambda1 = *o.lambda1;
  if (o.lambda2) s.rerank.lambda2 = *o.lambda2;
  if (o.lambda_item) s.rerank.lambda_item = *o.lambda_item;
  if (o.top_k) s.rerank.K = *o.top_k;
  if (o.backend) s.backend.backend = parse_backend_kind(*o.backend);
  if (o.mock_beta) s.backend.mock_beta = *o.mock_beta;
  if (o.user_order) s.user_order = *o.user_order == "shuffled" ? UserOrder::shuffled : UserOrder::dataset;
  apply_llm_environment(s.backend);
  if (!cfg.dataset) throw ValidationError("no dataset: pass --data DIR or set a dataset section in the config");
  s.validate();
  return cfg;
}

std::string artifact_version() { return std::string("trirec ") + TRIREC_VERSION + " (prompts " + prompts::version() + ")"; }

std::string joined(const std::vector<std::string>& args) {
  std::string s = "trirec";
  for (const auto& a : args) s += " " + a;
  return s;
}

// Tracks one command's manifest; written on success and on failure alike.
class ManifestScope {
 public:
  ManifestScope(fs::path dir, std::string command)
      : dir_(std::move(dir)), start_(std::chrono::steady_clock::now()) {
    manifest_.command = std::move(command);
    manifest_.artifact_version = artifact_version();
  }

  void set_config(const io::RunConfig& cfg) { manifest_.config = io::config_to_json(cfg); }

  void digest_dataset(const io::DatasetPaths& paths) {
    for (const auto& p : paths.all()) {
      if (fs::exists(p)) manifest_.dataset_digests[p.string()] = io::sha256_file(p);
    }
  }

  void add_output(const fs::path& p) { manifest_.outputs.push_back(p.string()); }
  void add_outputs(const std::vector<fs::path>& ps) {
    for (const auto& p : ps) add_output(p);
  }

  void write(std::optional<std::string> error) {
    if (dir_.empty()) return;
    manifest_.error = std::move(error);
    manifest_.duration_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
    try {
      io::write_file_atomic(dir_ / "manifest.json", io::manifest_to_json(manifest_).dump(2) + "\n");
    } catch (const std::exception& e) {
      spdlog::error("could not write manifest: {}", e.what());
    }
  }

 private:
  fs::path dir_;
  io::RunManifest manifest_;
  std::chrono::steady_clock::time_point start_;
};

void write_config(const io::RunConfig& cfg, const fs::path& dir, ManifestScope& manifest) {
  const auto path = dir / "config.json";
  io::write_file_atomic(path, io::config_to_json(cfg).dump(2) + "\n");
  manifest.add_output(path);
}

void write_episode(const EpisodeLog& log, const io::RunConfig& cfg, const fs::path& dir, ManifestScope& manifest) {
  write_config(cfg, dir, manifest);
  manifest.add_outputs(io::write_run_outputs(log, dir));
}

Dataset load_checked(const io::RunConfig& cfg, ManifestScope& manifest) {
  manifest.set_config(cfg);
  manifest.digest_dataset(*cfg.dataset);
  return io::load_dataset(*cfg.dataset);
}

void print_report(std::ostream& out, const std::optional<metrics::MetricReport>& report) {
  if (report) {
    out << io::metrics_to_csv(*report);
  } else {
    out << "no rounds were run\n";
  }
}

int cmd_run(const CommonOptions& o, ManifestScope& manifest, std::ostream& out) {
  const auto cfg = resolve_config(o);
  const auto data = load_checked(cfg, manifest);
  const auto log = run_simulation(data, cfg.simulation);
  write_episode(log, cfg, o.out, manifest);
  print_report(out, log.report);
  return kOk;
}

std::string compare_csv(const metrics::MetricReport& a, const metrics::MetricReport& b) {
  // Row-aligned merge of two metric CSVs.
  std::istringstream ra(io::metrics_to_csv(a)), rb(io::metrics_to_csv(b));
  std::string la, lb, out = "metric,k,full,ablated\n";
  std::getline(ra, la);
  std::getline(rb, lb);
  while (std::getline(ra, la) && std::getline(rb, lb)) out += la + "," + lb.substr(lb.rfind(',') + 1) + "\n";
  return out;
}

int cmd_ablate(const CommonOptions& o, const std::string& variant_name, double static_alpha,
               ManifestScope& manifest, std::ostream& out) {
  const auto variant = parse_ablation_variant(variant_name);
  const auto cfg = resolve_config(o);
  const auto data = load_checked(cfg, manifest);
  const auto run = run_ablation(data, cfg.simulation, variant, static_alpha);

  const fs::path dir(o.out);
  io::RunConfig ablated_cfg = cfg;
  ablated_cfg.simulation = apply_ablation(cfg.simulation, variant, static_alpha);
  write_episode(run.full, cfg, dir / "full", manifest);
  write_episode(run.ablated, ablated_cfg, dir / "ablated", manifest);
  if (run.full.report && run.ablated.report) {
    const auto table = compare_csv(*run.full.report, *run.ablated.report);
    io::write_file_atomic(dir / "ablation.csv", table);
    manifest.add_output(dir / "ablation.csv");
    out << "variant " << ablation_letter(variant) << " (" << to_string(variant) << ")\n" << table;
  } else {
    out << "no rounds were run\n";
  }
  return kOk;
}

int cmd_sweep(const CommonOptions& o, const std::string& param, const std::string& grid_spec,
              ManifestScope& manifest, std::ostream& out) {
  if (param != "alpha_max") throw ValidationError("sweep: only --param alpha_max is supported");
  const auto grid = parse_grid(grid_spec);
  const auto cfg = resolve_config(o);
  const auto data = load_checked(cfg, manifest);
  const auto points = sweep_alpha_max(data, cfg.simulation, grid);
  write_config(cfg, o.out, manifest);
  const auto table = io::sweep_to_csv(points);
  const fs::path path = fs::path(o.out) / "sweep.csv";
  io::write_file_atomic(path, table);
  manifest.add_output(path);
  out << table;
  return kOk;
}

int cmd_metrics(const std::string& in_dir, bool check, std::ostream& out, std::ostream& err) {
  const fs::path dir(in_dir);
  const auto cfg = io::load_config(dir / "config.json");
  const auto rounds = io::parse_results(io::read_file(dir / "results.jsonl"));
  if (rounds.empty()) throw ValidationError("metrics: results.jsonl has no rounds");
  const auto groups = io::groups_from_json(json::parse(io::read_file(dir / "groups.json")));
  const auto report = report_from_rounds(rounds, groups, cfg.simulation);
  out << io::metrics_to_csv(report);
  if (!check) return kOk;

  const auto stored = io::metrics_from_csv(io::read_file(dir / "metrics.csv"));
  const auto recomputed = io::metrics_from_csv(io::metrics_to_csv(report));
  auto close = [](double a, double b) { return std::abs(a - b) <= 1e-9; };
  bool ok = stored.n_users == recomputed.n_users && close(stored.mrr, recomputed.mrr) &&
            close(stored.eiu_target_mean, recomputed.eiu_target_mean) &&
            close(stored.eiu_cumulative, recomputed.eiu_cumulative) &&
            close(stored.joint_utility_mean, recomputed.joint_utility_mean);
  auto same_map = [&](const std::map<int, double>& a, const std::map<int, double>& b) {
    if (a.size() != b.size()) return false;
    for (const auto& [k, v] : a) {
      auto it = b.find(k);
      if (it == b.end() || !close(v, it->second)) return false;
    }
    return true;
  };
  ok = ok && same_map(stored.ndcg_at, recomputed.ndcg_at) && same_map(stored.dgu_at, recomputed.dgu_at) &&
       same_map(stored.mgu_at, recomputed.mgu_at);
  if (!ok) {
    err << "metrics: recomputed values differ from " << (dir / "metrics.csv").string() << "\n";
    return kRuntime;
  }
  return kOk;
}

int cmd_gen_synthetic(const SyntheticSpec& spec, const std::string& out_dir, ManifestScope& manifest,
                      std::ostream& out) {
  const auto data = generate_synthetic_dataset(spec);
  const auto paths = io::write_dataset(data, out_dir);
  manifest.add_outputs(paths);
  manifest.digest_dataset(io::DatasetPaths::in_directory(out_dir));
  out << "wrote " << data.catalog.size() << " items, " << data.users.size() << " users, "
      << data.interactions.size() << " interactions to " << out_dir << "\n";
  return kOk;
}

}  // namespace

int cli_dispatch(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Tri-party LLM-agent recommendation simulator", "trirec"};
  app.require_subcommand(1);
  app.set_version_flag("--version", artifact_version());

  CommonOptions run_opts, ablate_opts, sweep_opts;
  auto* run = app.add_subcommand("run", "run one closed-loop simulation");
  add_common(*run, run_opts);

  auto* ablate = app.add_subcommand("ablate", "run the full model and one ablation variant on paired seeds");
  add_common(*ablate, ablate_opts);
  std::string variant;
  double static_alpha = 0.1;
  ablate->add_option("--variant", variant, "a..i or the variant name")->required();
  ablate->add_option("--static-alpha", static_alpha, "alpha used by variant e");

  auto* sweep = app.add_subcommand("sweep", "sweep one parameter over a grid");
  add_common(*sweep, sweep_opts);
  std::string param = "alpha_max";
  std::string grid = "0.1:1.0:0.05";
  sweep->add_option("--param", param)->check(CLI::IsMember({"alpha_max"}));
  sweep->add_option("--grid", grid, "lo:hi:step, inclusive");

  auto* metrics_cmd = app.add_subcommand("metrics", "recompute metrics from a run directory");
  std::string in_dir;
  bool check = false;
  metrics_cmd->add_option("--in", in_dir, "run directory")->required()->check(CLI::ExistingDirectory);
  metrics_cmd->add_flag("--check", check, "fail if metrics.csv disagrees with the recomputation");

  auto* gen = app.add_subcommand("gen-synthetic", "write a synthetic skewed-popularity dataset");
  SyntheticSpec spec;
  std::string gen_out;
  gen->add_option("--users", spec.n_users);
  gen->add_option("--items", spec.n_items);
  gen->add_option("--skew", spec.skew);
  gen->add_option("--seed", spec.seed);
  gen->add_option("--dim", spec.dim, "embedding dimension");
  gen->add_option("--min-interactions", spec.min_interactions);
  gen->add_option("--max-interactions", spec.max_interactions);
  gen->add_option("--affinity", spec.affinity);
  gen->add_option("--out", gen_out, "output directory")->required();

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kOk;
  } catch (const CLI::CallForVersion&) {
    out << artifact_version() << "\n";
    return kOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n\n" << app.help();
    return kValidation;
  }

  std::string out_dir;
  if (run->parsed()) out_dir = run_opts.out;
  if (ablate->parsed()) out_dir = ablate_opts.out;
  if (sweep->parsed()) out_dir = sweep_opts.out;
  if (gen->parsed()) out_dir = gen_out;
  ManifestScope manifest(out_dir, joined(args));

  int code = kOk;
  std::optional<std::string> error;
  try {
    if (!out_dir.empty()) fs::create_directories(out_dir);
    if (run->parsed()) code = cmd_run(run_opts, manifest, out);
    if (ablate->parsed()) code = cmd_ablate(ablate_opts, variant, static_alpha, manifest, out);
    if (sweep->parsed()) code = cmd_sweep(sweep_opts, param, grid, manifest, out);
    if (metrics_cmd->parsed()) code = cmd_metrics(in_dir, check, out, err);
    if (gen->parsed()) code = cmd_gen_synthetic(spec, gen_out, manifest, out);
  } catch (const ValidationError& e) {
    err << "error: " << e.what() << "\n";
    error = e.what();
    code = kValidation;
  } catch (const std::exception& e) {
    err << "runtime error: " << e.what() << "\n";
    error = e.what();
    code = kRuntime;
  }
  manifest.write(error);
  return code;
}

int cli_dispatch(int argc, const char* const* argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return cli_dispatch(args, std::cout, std::cerr);
}

}  // namespace trirec::cli
