// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include "dwdpsim/config.hpp"

using namespace dwdpsim;

TEST_SUITE_BEGIN("config");

TEST_CASE("default config validates and round-trips") {
  const ExperimentConfig cfg = default_config();
  cfg.validate();
  const std::string text = config_to_json(cfg);
  const ExperimentConfig parsed = config_from_json(text);
  CHECK(config_to_json(parsed) == text);
  CHECK(config_hash(parsed) == config_hash(cfg));
}

TEST_CASE("hash is sensitive to any field change") {
  ExperimentConfig a = default_config();
  ExperimentConfig b = a;
  b.workload.seed = 2;
  CHECK(config_hash(a) != config_hash(b));
  b = a;
  b.strategy.dwdp.slice_size = 1 << 19;
  CHECK(config_hash(a) != config_hash(b));
}

TEST_CASE("unknown keys are rejected with the section path") {
  CHECK_THROWS_WITH_AS(config_from_json(R"({"gpu": {"peak_flop": 1}})"),
                       doctest::Contains("gpu"), ConfigError);
  CHECK_THROWS_AS(config_from_json(R"({"bogus_section": {}})"), ConfigError);
  CHECK_THROWS_AS(config_from_json("{nonsense"), ConfigError);
}

TEST_CASE("partial configs keep profile defaults") {
  const ExperimentConfig cfg =
      config_from_json(R"({"strategy": {"kind": "dep", "group_size": 3}})");
  CHECK(cfg.strategy.kind == StrategySpec::Kind::Dep);
  CHECK(cfg.strategy.group_size == 3);
  CHECK(cfg.model.num_experts == 256);  // bundled profile untouched
  CHECK(cfg.gpu.mem_bw == doctest::Approx(8e12));
}

TEST_CASE("sweep axis application") {
  ExperimentConfig cfg = default_config();
  ExperimentConfig p = cfg.with_axis_value(SweepSpec::Axis::Isl, 16384);
  CHECK(p.workload.isl_dist.length == doctest::Approx(16384));
  p = cfg.with_axis_value(SweepSpec::Axis::Mnt, 65536);
  CHECK(p.workload.max_num_tokens == 65536);
  p = cfg.with_axis_value(SweepSpec::Axis::Cv, 0.2);
  CHECK(p.workload.isl_dist.cv() == doctest::Approx(0.2));
  p = cfg.with_axis_value(SweepSpec::Axis::GroupSize, 3);
  CHECK(p.strategy.group_size == 3);
  p = cfg.with_axis_value(SweepSpec::Axis::SliceSize, 2048);
  CHECK(p.strategy.dwdp.slice_size == 2048);
  CHECK_THROWS_AS(axis_from_name("bogus"), ConfigError);
  CHECK(axis_from_name("cv") == SweepSpec::Axis::Cv);
}

TEST_CASE("invalid sweep values") {
  ExperimentConfig cfg = default_config();
  SweepSpec sweep;
  sweep.axis = SweepSpec::Axis::Isl;
  sweep.values = {};
  cfg.sweep = sweep;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  sweep.values = {-1};
  cfg.sweep = sweep;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
}

TEST_CASE("bundled profiles satisfy their invariants") {
  const GpuSpec gpu = gb200_gpu_profile();
  gpu.validate();
  CHECK(gpu.mem_bw == doctest::Approx(8e12));
  CHECK(gpu.link_bw == doctest::Approx(1.8e12));
  CHECK(gpu.ce_inflight == 2);
  const MoeModelSpec model = r1_like_model_profile();
  model.validate();
  CHECK(model.num_experts == 256);
  CHECK(model.top_k == 8);
  CHECK(expert_shard_bytes(model) == doctest::Approx(22020096.0));
}

TEST_SUITE_END();
