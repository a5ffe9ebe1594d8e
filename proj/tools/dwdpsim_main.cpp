// SPDX-License-Identifier: Apache-2.0
//
// Command-line front end: analytic roofline sweeps, event simulations,
// contention tables, and placement / copy-plan dumps.

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

#include "dwdpsim/config.hpp"
#include "dwdpsim/contention.hpp"
#include "dwdpsim/copyplan.hpp"
#include "dwdpsim/placement.hpp"
#include "dwdpsim/simcore.hpp"

namespace fs = std::filesystem;
using namespace dwdpsim;

namespace {

struct CommonArgs {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out_dir;
  std::string format = "csv,json";
};

ExperimentConfig load_config(const CommonArgs& args) {
  ExperimentConfig cfg = default_config();
  if (!args.config_path.empty()) {
    std::ifstream in(args.config_path);
    require(in.good(), "cannot open config file: " + args.config_path);
    std::stringstream ss;
    ss << in.rdbuf();
    cfg = config_from_json(ss.str());
  }
  if (args.seed) cfg.workload.seed = *args.seed;
  if (args.out_dir) cfg.output_dir = *args.out_dir;
  cfg.validate();
  return cfg;
}

// Every run writes into a fresh hash-stamped directory; outputs are
// write-once.
fs::path make_run_dir(const ExperimentConfig& cfg) {
  const fs::path dir = fs::path(cfg.output_dir) / config_hash(cfg);
  require(!fs::exists(dir), "run directory already exists: " + dir.string());
  fs::create_directories(dir);
  return dir;
}

void write_file(const fs::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  require(out.good(), "cannot write " + path.string());
  out << content;
}

bool has_format(const CommonArgs& args, const std::string& fmt) {
  return args.format.find(fmt) != std::string::npos;
}

PlacementPlan placement_for(const ExperimentConfig& cfg) {
  return build_placement(cfg.model.num_experts, cfg.strategy.group_size,
                         cfg.strategy.extra_redundancy);
}

std::vector<RankBatch> workload_batches(const ExperimentConfig& cfg,
                                        const std::string& replay_path) {
  if (!replay_path.empty()) {
    std::ifstream in(replay_path);
    require(in.good(), "cannot open batches file: " + replay_path);
    std::stringstream ss;
    ss << in.rdbuf();
    return batches_from_csv(ss.str());
  }
  return sample_batches(cfg.workload, cfg.model, cfg.strategy.group_size,
                        cfg.iterations);
}

RunReport run_strategy(const ExperimentConfig& cfg, StrategySpec::Kind kind,
                       const std::vector<RankBatch>& batches) {
  if (kind == StrategySpec::Kind::Dep) {
    return simulate_dep(cfg.model, cfg.gpu, cfg.interference, batches,
                        cfg.strategy.group_size, cfg.warmup_iterations);
  }
  return simulate_dwdp(cfg.model, cfg.gpu, cfg.interference, batches,
                       placement_for(cfg), cfg.strategy.dwdp,
                       cfg.warmup_iterations);
}

int cmd_analytic(const CommonArgs& args) {
  ExperimentConfig cfg = load_config(args);
  require(cfg.sweep.has_value(), "analytic requires a sweep section");
  const fs::path dir = make_run_dir(cfg);
  std::ostringstream csv;
  csv << "axis,value,t_compute_us,t_prefetch_us,t_all2all_us,"
         "compute_prefetch_ratio,dep_dwdp_speedup,prefetch_saturated\n";
  std::printf("%-12s %-10s %22s %16s\n", "axis", "value",
              "T_compute/T_prefetch", "T_DEP/T_DWDP");
  for (double value : cfg.sweep->values) {
    const ExperimentConfig point = cfg.with_axis_value(cfg.sweep->axis, value);
    const auto tokens =
        static_cast<std::int64_t>(point.workload.isl_dist.length);
    const AnalyticResult res =
        analytic_compare(point.model, point.gpu, placement_for(point), tokens,
                         tokens);
    char line[256];
    std::snprintf(line, sizeof(line), "%s,%g,%.4f,%.4f,%.4f,%.6f,%.6f,%d\n",
                  axis_name(cfg.sweep->axis), value, res.t_compute_s * 1e6,
                  res.t_prefetch_s * 1e6, res.t_all2all_s * 1e6,
                  res.compute_prefetch_ratio, res.dep_dwdp_speedup,
                  res.prefetch_saturated ? 1 : 0);
    csv << line;
    std::printf("%-12s %-10g %22.4f %16.4f\n", axis_name(cfg.sweep->axis),
                value, res.compute_prefetch_ratio, res.dep_dwdp_speedup);
  }
  write_file(dir / "analytic.csv", csv.str());
  write_file(dir / "config.json", config_to_json(cfg));
  std::printf("wrote %s\n", (dir / "analytic.csv").c_str());
  return 0;
}

// Summary line of one simulated point, for sweep tables.
struct PointSummary {
  double latency_us;
  double throughput;
  double sync_share;
};

PointSummary summarize(const RunReport& rep) {
  const BreakdownTable table = breakdown(rep);
  double sync = 0;
  const auto it = table.compute_us.find(Category::SyncWait);
  if (it != table.compute_us.end()) sync = it->second;
  return {table.iteration_latency_us, rep.throughput_tokens_per_s(),
          sync / table.iteration_latency_us};
}

int cmd_simulate(const CommonArgs& args, const std::string& replay_path,
                 bool paired) {
  ExperimentConfig cfg = load_config(args);
  const fs::path dir = make_run_dir(cfg);
  write_file(dir / "config.json", config_to_json(cfg));

  if (cfg.sweep) {
    std::ostringstream csv;
    csv << "axis,value,strategy,iteration_latency_us,throughput_tps,"
           "sync_share\n";
    for (double value : cfg.sweep->values) {
      const ExperimentConfig point = cfg.with_axis_value(cfg.sweep->axis, value);
      const auto batches = workload_batches(point, replay_path);
      const RunReport rep = run_strategy(point, point.strategy.kind, batches);
      const PointSummary s = summarize(rep);
      char line[256];
      std::snprintf(line, sizeof(line), "%s,%g,%s,%.4f,%.2f,%.6f\n",
                    axis_name(cfg.sweep->axis), value, rep.strategy.c_str(),
                    s.latency_us, s.throughput, s.sync_share);
      csv << line;
      std::printf("%s=%g: latency %.2f us, throughput %.0f tok/s, sync %.2f%%\n",
                  axis_name(cfg.sweep->axis), value, s.latency_us, s.throughput,
                  s.sync_share * 100.0);
    }
    write_file(dir / "sweep_summary.csv", csv.str());
    std::printf("wrote %s\n", (dir / "sweep_summary.csv").c_str());
    return 0;
  }

  const auto batches = workload_batches(cfg, replay_path);
  write_file(dir / "batches.csv", batches_to_csv(batches));
  const std::string hash = config_hash(cfg);

  if (paired) {
    const RunReport dep = run_strategy(cfg, StrategySpec::Kind::Dep, batches);
    const RunReport dwdp = run_strategy(cfg, StrategySpec::Kind::Dwdp, batches);
    const ComparisonTable cmp = compare_reports(dep, dwdp);
    write_file(dir / "compare.csv", cmp.to_csv());
    write_file(dir / "breakdown_dep.csv", breakdown(dep).to_csv());
    write_file(dir / "breakdown_dwdp.csv", breakdown(dwdp).to_csv());
    if (has_format(args, "json")) {
      write_file(dir / "report_dep.json", report_to_json(dep, hash));
      write_file(dir / "report_dwdp.json", report_to_json(dwdp, hash));
      write_file(dir / "trace_dep.json", report_to_chrome_trace(dep));
      write_file(dir / "trace_dwdp.json", report_to_chrome_trace(dwdp));
    }
    std::printf("%s", cmp.to_csv().c_str());
    std::printf("wrote %s\n", (dir / "compare.csv").c_str());
    return 0;
  }

  const RunReport rep = run_strategy(cfg, cfg.strategy.kind, batches);
  const BreakdownTable table = breakdown(rep);
  if (has_format(args, "csv")) write_file(dir / "breakdown.csv", table.to_csv());
  if (has_format(args, "json")) {
    write_file(dir / "report.json", report_to_json(rep, hash));
    write_file(dir / "trace.json", report_to_chrome_trace(rep));
  }
  std::printf("%s", table.to_csv().c_str());
  std::printf("wrote outputs to %s\n", dir.c_str());
  return 0;
}

int cmd_contention(const CommonArgs& args, const std::vector<int>& sizes,
                   std::int64_t rounds) {
  ExperimentConfig cfg = load_config(args);
  const std::uint64_t seed = args.seed.value_or(cfg.workload.seed);
  std::ostringstream csv;
  csv << "group_size,c,closed_form_pct,monte_carlo_pct,abs_err_pct\n";
  for (int n : sizes) {
    require(n >= 3, "contention: group sizes must be >= 3");
    const ContentionPmf closed = contention_pmf(n);
    const ContentionPmf mc = contention_mc(n, rounds, Rng::mix(seed, n));
    std::printf("DWDP%-3d", n);
    for (const auto& [c, p] : closed.probs) {
      const double mc_p = mc.probs.count(c) ? mc.probs.at(c) : 0.0;
      char line[160];
      std::snprintf(line, sizeof(line), "%d,%d,%.6g,%.6g,%.3g\n", n, c,
                    p * 100.0, mc_p * 100.0, std::fabs(p - mc_p) * 100.0);
      csv << line;
      if (c <= 6) std::printf(" %8.4f", p * 100.0);
    }
    std::printf("\n");
  }
  const fs::path dir = make_run_dir(cfg);
  write_file(dir / "contention.csv", csv.str());
  std::printf("wrote %s\n", (dir / "contention.csv").c_str());
  return 0;
}

int cmd_placement(const CommonArgs& args, int experts, int group, int extra) {
  ExperimentConfig cfg = load_config(args);
  if (experts <= 0) experts = cfg.model.num_experts;
  if (group <= 0) group = cfg.strategy.group_size;
  if (extra < 0) extra = cfg.strategy.extra_redundancy;
  const PlacementPlan plan = build_placement(experts, group, extra);
  std::printf("%s", describe_placement(plan).c_str());
  return 0;
}

int cmd_plan(const CommonArgs& args, int rank, std::uint64_t slice) {
  ExperimentConfig cfg = load_config(args);
  const PlacementPlan plan = placement_for(cfg);
  require(rank >= 0 && rank < plan.group_size, "plan: rank out of range");
  if (slice == 0) slice = cfg.strategy.dwdp.slice_size;
  // Per-layer prefetch shard list of this rank: one segment per
  // (peer, projection tensor).
  std::map<int, int> per_peer;
  for (const auto& [e, src] : plan.fetch_lists[rank]) per_peer[src]++;
  const double per_tensor = static_cast<double>(cfg.model.hidden_dim) *
                            static_cast<double>(cfg.model.expert_ffn_dim) *
                            cfg.model.weight_bytes_per_param;
  std::vector<ShardRef> shards;
  for (int tensor = 0; tensor < 3; ++tensor) {
    for (const auto& [peer, count] : per_peer) {
      shards.push_back({peer, static_cast<std::uint64_t>(tensor),
                        static_cast<std::uint64_t>(per_tensor * count), 0});
    }
  }
  const CopyPlan copy_plan = build_copy_plan(shards, slice, rank);
  std::printf("%s", copy_plan.to_csv().c_str());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{
      "dwdpsim: analytic and event-level performance models of synchronized "
      "(DEP) vs asynchronous distributed-weight (DWDP) MoE inference"};
  app.require_subcommand(1);

  CommonArgs common;
  app.add_option("--config", common.config_path, "experiment config (JSON)");
  std::uint64_t seed_value = 0;
  auto* seed_opt =
      app.add_option("--seed", seed_value, "override the workload seed");
  std::string out_value;
  auto* out_opt = app.add_option("--out", out_value, "output directory");
  app.add_option("--format", common.format, "output formats: csv,json");

  auto* analytic = app.add_subcommand("analytic", "closed-form roofline sweep");
  auto* simulate = app.add_subcommand("simulate", "event-level simulation");
  std::string replay_path;
  simulate->add_option("--replay", replay_path,
                       "replay a batches.csv workload instead of sampling");
  bool paired = false;
  simulate->add_flag("--paired", paired,
                     "run DEP and DWDP on the same batches and compare");
  auto* contention =
      app.add_subcommand("contention", "contention probability tables");
  std::vector<int> sizes{3, 4, 6, 8, 12, 16};
  contention->add_option("--sizes", sizes, "group sizes");
  std::int64_t rounds = 1000000;
  contention->add_option("--rounds", rounds, "Monte Carlo rounds");
  auto* placement = app.add_subcommand("placement", "dump an expert placement");
  int experts = 0, group = 0, extra = -1;
  placement->add_option("--experts", experts, "number of experts");
  placement->add_option("--group", group, "group size");
  placement->add_option("--extra", extra, "extra redundancy");
  auto* plan = app.add_subcommand("plan", "dump a prefetch copy plan");
  int plan_rank = 0;
  std::uint64_t plan_slice = 0;
  plan->add_option("--rank", plan_rank, "destination rank");
  plan->add_option("--slice", plan_slice, "slice size in bytes");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (*seed_opt) common.seed = seed_value;
    if (*out_opt) common.out_dir = out_value;
    if (app.got_subcommand(analytic)) return cmd_analytic(common);
    if (app.got_subcommand(simulate))
      return cmd_simulate(common, replay_path, paired);
    if (app.got_subcommand(contention))
      return cmd_contention(common, sizes, rounds);
    if (app.got_subcommand(placement))
      return cmd_placement(common, experts, group, extra);
    if (app.got_subcommand(plan)) return cmd_plan(common, plan_rank, plan_slice);
  } catch (const ConfigError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return 2;
  } catch (const InvariantViolation& e) {
    std::fprintf(stderr, "internal invariant violation: %s\n", e.what());
    return 3;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 3;
  }
  return 0;
}
