// SPDX-License-Identifier: Apache-2.0
#include "dwdpsim/config.hpp"

#include <json.hpp>

#include <cstdio>
#include <set>

namespace dwdpsim {

using nlohmann::json;

GpuSpec gb200_gpu_profile() {
  GpuSpec gpu;
  gpu.peak_flops = 5e15;  // effective 4-bit GEMM rate, calibrated
  gpu.mem_bw = 8e12;
  gpu.link_bw = 1.8e12;
  gpu.ce_inflight = 2;
  gpu.tdp = 1.0;
  gpu.idle_power_frac = 0.129;
  return gpu;
}

MoeModelSpec r1_like_model_profile() {
  MoeModelSpec m;
  m.num_layers = 58;  // MoE layers
  m.hidden_dim = 7168;
  m.num_experts = 256;
  m.top_k = 8;
  m.expert_ffn_dim = 2048;
  m.shared_ffn_dim = 2048;
  m.attn_proj_params = 187e6;
  m.weight_bytes_per_param = 0.5;  // 4-bit expert weights
  m.kv_bytes_per_token_per_layer = 576;
  m.act_bytes_per_element = 1.0;
  // Calibration, fitted once against the reference context-phase curve.
  m.others_bytes_factor = 40.0;
  m.calib.attention = 0.8;
  m.calib.grouped_gemm = 0.55;
  m.calib.dense_gemm = 1.0;
  return m;
}

ExperimentConfig default_config() {
  ExperimentConfig cfg;
  cfg.gpu = gb200_gpu_profile();
  cfg.model = r1_like_model_profile();
  cfg.workload.isl_dist = IslDist::fixed(8192);
  cfg.workload.max_num_tokens = 32768;
  cfg.workload.batch_per_rank = 4;
  cfg.workload.routing_skew = 0.0;
  cfg.workload.seed = 1;
  cfg.strategy.kind = StrategySpec::Kind::Dwdp;
  cfg.strategy.group_size = 4;
  return cfg;
}

void ExperimentConfig::validate() const {
  gpu.validate();
  interference.validate();
  model.validate();
  workload.validate();
  require(strategy.group_size >= 2, "strategy.group_size must be >= 2");
  if (strategy.kind == StrategySpec::Kind::Dwdp) {
    strategy.dwdp.validate();
    require(strategy.extra_redundancy >= 0,
            "strategy.extra_redundancy must be >= 0");
  }
  require(iterations >= 1, "iterations must be >= 1");
  require(warmup_iterations >= 0 && warmup_iterations < iterations,
          "warmup_iterations must leave at least one steady iteration");
  if (sweep) {
    require(!sweep->values.empty(), "sweep.values must not be empty");
    for (double v : sweep->values) {
      if (sweep->axis == SweepSpec::Axis::Cv)
        require(v >= 0, "sweep cv values must be >= 0");
      else
        require(v > 0, "sweep values must be > 0");
    }
  }
}

ExperimentConfig ExperimentConfig::with_axis_value(SweepSpec::Axis axis,
                                                   double value) const {
  ExperimentConfig out = *this;
  out.sweep.reset();
  switch (axis) {
    case SweepSpec::Axis::Isl: {
      const double cv = out.workload.isl_dist.cv();
      out.workload.isl_dist = IslDist::from_cv(value, cv);
      if (out.workload.max_num_tokens < static_cast<std::int64_t>(value))
        out.workload.max_num_tokens = static_cast<std::int64_t>(value);
      break;
    }
    case SweepSpec::Axis::Mnt:
      out.workload.max_num_tokens = static_cast<std::int64_t>(value);
      break;
    case SweepSpec::Axis::Cv:
      out.workload.isl_dist =
          IslDist::from_cv(out.workload.isl_dist.length, value);
      break;
    case SweepSpec::Axis::GroupSize:
      out.strategy.group_size = static_cast<int>(value);
      break;
    case SweepSpec::Axis::SliceSize:
      out.strategy.dwdp.slice_size = static_cast<std::uint64_t>(value);
      break;
  }
  return out;
}

const char* axis_name(SweepSpec::Axis axis) {
  switch (axis) {
    case SweepSpec::Axis::Isl:
      return "isl";
    case SweepSpec::Axis::Mnt:
      return "mnt";
    case SweepSpec::Axis::Cv:
      return "cv";
    case SweepSpec::Axis::GroupSize:
      return "group_size";
    case SweepSpec::Axis::SliceSize:
      return "slice_size";
  }
  return "?";
}

SweepSpec::Axis axis_from_name(const std::string& name) {
  for (auto a : {SweepSpec::Axis::Isl, SweepSpec::Axis::Mnt, SweepSpec::Axis::Cv,
                 SweepSpec::Axis::GroupSize, SweepSpec::Axis::SliceSize}) {
    if (name == axis_name(a)) return a;
  }
  throw ConfigError("unknown sweep axis '" + name +
                    "' (valid: isl, mnt, cv, group_size, slice_size)");
}

namespace {

// Rejects keys the schema does not know, so typos fail loudly.
void check_keys(const json& j, const std::string& section,
                const std::set<std::string>& allowed) {
  for (const auto& [key, value] : j.items()) {
    require(allowed.count(key) > 0,
            "config: unknown key '" + key + "' in section '" + section + "'");
  }
}

template <typename T>
void get_if(const json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

json dist_to_json(const IslDist& d) {
  switch (d.kind) {
    case IslDist::Kind::Fixed:
      return {{"kind", "fixed"}, {"length", d.length}};
    case IslDist::Kind::UniformRatio:
      return {{"kind", "uniform_ratio"}, {"max_length", d.length},
              {"ratio", d.ratio}};
    case IslDist::Kind::Normal:
      return {{"kind", "normal"}, {"mean", d.length}, {"stddev", d.stddev}};
  }
  return {};
}

IslDist dist_from_json(const json& j) {
  const std::string kind = j.at("kind").get<std::string>();
  if (kind == "fixed") {
    check_keys(j, "workload.isl_dist", {"kind", "length"});
    return IslDist::fixed(j.at("length").get<double>());
  }
  if (kind == "uniform_ratio") {
    check_keys(j, "workload.isl_dist", {"kind", "max_length", "ratio"});
    return IslDist::uniform_ratio(j.at("max_length").get<double>(),
                                  j.at("ratio").get<double>());
  }
  if (kind == "normal") {
    check_keys(j, "workload.isl_dist", {"kind", "mean", "stddev"});
    return IslDist::normal(j.at("mean").get<double>(),
                           j.at("stddev").get<double>());
  }
  throw ConfigError("config: unknown isl_dist kind '" + kind + "'");
}

}  // namespace

std::string config_to_json(const ExperimentConfig& cfg) {
  json j;
  j["gpu"] = {
      {"peak_flops", cfg.gpu.peak_flops},
      {"mem_bw", cfg.gpu.mem_bw},
      {"link_bw", cfg.gpu.link_bw},
      {"ce_inflight", cfg.gpu.ce_inflight},
      {"tdp", cfg.gpu.tdp},
      {"idle_power_frac", cfg.gpu.idle_power_frac},
  };
  json power;
  for (const auto& [cat, frac] : cfg.interference.compute_power_frac)
    power[category_name(cat)] = frac;
  j["interference"] = {
      {"mem_interference_on", cfg.interference.mem_interference_on},
      {"power_interference_on", cfg.interference.power_interference_on},
      {"compute_power_frac", power},
      {"comm_power_frac", cfg.interference.comm_power_frac},
      {"throttle_exponent", cfg.interference.throttle_exponent},
  };
  j["model"] = {
      {"num_layers", cfg.model.num_layers},
      {"hidden_dim", cfg.model.hidden_dim},
      {"num_experts", cfg.model.num_experts},
      {"top_k", cfg.model.top_k},
      {"expert_ffn_dim", cfg.model.expert_ffn_dim},
      {"shared_ffn_dim", cfg.model.shared_ffn_dim},
      {"attn_proj_params", cfg.model.attn_proj_params},
      {"weight_bytes_per_param", cfg.model.weight_bytes_per_param},
      {"kv_bytes_per_token_per_layer", cfg.model.kv_bytes_per_token_per_layer},
      {"act_bytes_per_element", cfg.model.act_bytes_per_element},
      {"others_bytes_factor", cfg.model.others_bytes_factor},
      {"calib",
       {{"attention", cfg.model.calib.attention},
        {"grouped_gemm", cfg.model.calib.grouped_gemm},
        {"dense_gemm", cfg.model.calib.dense_gemm}}},
  };
  j["workload"] = {
      {"isl_dist", dist_to_json(cfg.workload.isl_dist)},
      {"max_num_tokens", cfg.workload.max_num_tokens},
      {"batch_per_rank", cfg.workload.batch_per_rank},
      {"routing_skew", cfg.workload.routing_skew},
      {"seed", cfg.workload.seed},
  };
  j["strategy"] = {
      {"kind", cfg.strategy.kind == StrategySpec::Kind::Dep ? "dep" : "dwdp"},
      {"group_size", cfg.strategy.group_size},
      {"extra_redundancy", cfg.strategy.extra_redundancy},
      {"merge_elim", cfg.strategy.dwdp.merge_elim},
      {"tdm", cfg.strategy.dwdp.tdm},
      {"slice_size", cfg.strategy.dwdp.slice_size},
      {"model_contention", cfg.strategy.dwdp.model_contention},
  };
  if (cfg.sweep) {
    j["sweep"] = {{"axis", axis_name(cfg.sweep->axis)},
                  {"values", cfg.sweep->values}};
  }
  j["sim"] = {{"iterations", cfg.iterations},
              {"warmup_iterations", cfg.warmup_iterations}};
  j["output"] = {{"dir", cfg.output_dir}};
  return j.dump(2) + "\n";
}

ExperimentConfig config_from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& err) {
    throw ConfigError(std::string("config: invalid JSON: ") + err.what());
  }
  ExperimentConfig cfg = default_config();
  try {
    check_keys(j, "<top>", {"gpu", "interference", "model", "workload",
                            "strategy", "sweep", "sim", "output"});
    if (j.contains("gpu")) {
      const auto& g = j["gpu"];
      check_keys(g, "gpu", {"peak_flops", "mem_bw", "link_bw", "ce_inflight",
                            "tdp", "idle_power_frac"});
      get_if(g, "peak_flops", cfg.gpu.peak_flops);
      get_if(g, "mem_bw", cfg.gpu.mem_bw);
      get_if(g, "link_bw", cfg.gpu.link_bw);
      get_if(g, "ce_inflight", cfg.gpu.ce_inflight);
      get_if(g, "tdp", cfg.gpu.tdp);
      get_if(g, "idle_power_frac", cfg.gpu.idle_power_frac);
    }
    if (j.contains("interference")) {
      const auto& f = j["interference"];
      check_keys(f, "interference",
                 {"mem_interference_on", "power_interference_on",
                  "compute_power_frac", "comm_power_frac", "throttle_exponent"});
      get_if(f, "mem_interference_on", cfg.interference.mem_interference_on);
      get_if(f, "power_interference_on", cfg.interference.power_interference_on);
      get_if(f, "comm_power_frac", cfg.interference.comm_power_frac);
      get_if(f, "throttle_exponent", cfg.interference.throttle_exponent);
      if (f.contains("compute_power_frac")) {
        for (const auto& [name, frac] : f["compute_power_frac"].items()) {
          cfg.interference.compute_power_frac[category_from_name(name)] =
              frac.get<double>();
        }
      }
    }
    if (j.contains("model")) {
      const auto& m = j["model"];
      check_keys(m, "model",
                 {"num_layers", "hidden_dim", "num_experts", "top_k",
                  "expert_ffn_dim", "shared_ffn_dim", "attn_proj_params",
                  "weight_bytes_per_param", "kv_bytes_per_token_per_layer",
                  "act_bytes_per_element", "others_bytes_factor", "calib"});
      get_if(m, "num_layers", cfg.model.num_layers);
      get_if(m, "hidden_dim", cfg.model.hidden_dim);
      get_if(m, "num_experts", cfg.model.num_experts);
      get_if(m, "top_k", cfg.model.top_k);
      get_if(m, "expert_ffn_dim", cfg.model.expert_ffn_dim);
      get_if(m, "shared_ffn_dim", cfg.model.shared_ffn_dim);
      get_if(m, "attn_proj_params", cfg.model.attn_proj_params);
      get_if(m, "weight_bytes_per_param", cfg.model.weight_bytes_per_param);
      get_if(m, "kv_bytes_per_token_per_layer",
             cfg.model.kv_bytes_per_token_per_layer);
      get_if(m, "act_bytes_per_element", cfg.model.act_bytes_per_element);
      get_if(m, "others_bytes_factor", cfg.model.others_bytes_factor);
      if (m.contains("calib")) {
        const auto& c = m["calib"];
        check_keys(c, "model.calib", {"attention", "grouped_gemm", "dense_gemm"});
        get_if(c, "attention", cfg.model.calib.attention);
        get_if(c, "grouped_gemm", cfg.model.calib.grouped_gemm);
        get_if(c, "dense_gemm", cfg.model.calib.dense_gemm);
      }
    }
    if (j.contains("workload")) {
      const auto& w = j["workload"];
      check_keys(w, "workload", {"isl_dist", "max_num_tokens", "batch_per_rank",
                                 "routing_skew", "seed"});
      if (w.contains("isl_dist"))
        cfg.workload.isl_dist = dist_from_json(w["isl_dist"]);
      get_if(w, "max_num_tokens", cfg.workload.max_num_tokens);
      get_if(w, "batch_per_rank", cfg.workload.batch_per_rank);
      get_if(w, "routing_skew", cfg.workload.routing_skew);
      get_if(w, "seed", cfg.workload.seed);
    }
    if (j.contains("strategy")) {
      const auto& s = j["strategy"];
      check_keys(s, "strategy",
                 {"kind", "group_size", "extra_redundancy", "merge_elim", "tdm",
                  "slice_size", "model_contention"});
      if (s.contains("kind")) {
        const std::string kind = s["kind"].get<std::string>();
        if (kind == "dep")
          cfg.strategy.kind = StrategySpec::Kind::Dep;
        else if (kind == "dwdp")
          cfg.strategy.kind = StrategySpec::Kind::Dwdp;
        else
          throw ConfigError("config: strategy.kind must be 'dep' or 'dwdp'");
      }
      get_if(s, "group_size", cfg.strategy.group_size);
      get_if(s, "extra_redundancy", cfg.strategy.extra_redundancy);
      get_if(s, "merge_elim", cfg.strategy.dwdp.merge_elim);
      get_if(s, "tdm", cfg.strategy.dwdp.tdm);
      get_if(s, "slice_size", cfg.strategy.dwdp.slice_size);
      get_if(s, "model_contention", cfg.strategy.dwdp.model_contention);
    }
    if (j.contains("sweep")) {
      const auto& s = j["sweep"];
      check_keys(s, "sweep", {"axis", "values"});
      SweepSpec sweep;
      sweep.axis = axis_from_name(s.at("axis").get<std::string>());
      sweep.values = s.at("values").get<std::vector<double>>();
      cfg.sweep = sweep;
    }
    if (j.contains("sim")) {
      const auto& s = j["sim"];
      check_keys(s, "sim", {"iterations", "warmup_iterations"});
      get_if(s, "iterations", cfg.iterations);
      get_if(s, "warmup_iterations", cfg.warmup_iterations);
    }
    if (j.contains("output")) {
      const auto& o = j["output"];
      check_keys(o, "output", {"dir"});
      get_if(o, "dir", cfg.output_dir);
    }
  } catch (const json::exception& err) {
    throw ConfigError(std::string("config: ") + err.what());
  }
  cfg.validate();
  return cfg;
}

std::string config_hash(const ExperimentConfig& config) {
  const std::string text = config_to_json(config);
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx",
                static_cast<unsigned long long>(h));
  return buf;
}

}  // namespace dwdpsim
