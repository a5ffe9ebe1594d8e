// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include "dwdpsim/modelspec.hpp"

using namespace dwdpsim;

TEST_SUITE_BEGIN("modelspec");

namespace {

MoeModelSpec toy_model() {
  MoeModelSpec m;
  m.num_layers = 1;
  m.hidden_dim = 8;
  m.num_experts = 1;
  m.top_k = 1;
  m.expert_ffn_dim = 4;
  m.shared_ffn_dim = 0;
  m.attn_proj_params = 256;
  m.weight_bytes_per_param = 1.0;
  m.act_bytes_per_element = 1.0;
  return m;
}

double grouped_flops(const LayerWork& work) {
  for (const auto& op : work.moe) {
    if (op.category == Category::GroupedGemm) return op.flops;
  }
  return 0;
}

}  // namespace

TEST_CASE("expert_shard_bytes") {
  MoeModelSpec m = toy_model();
  CHECK(expert_shard_bytes(m) == doctest::Approx(96));  // 3*8*4
  m.weight_bytes_per_param = 0.5;
  CHECK(expert_shard_bytes(m) == doctest::Approx(48));
  m.hidden_dim = 7168;
  m.expert_ffn_dim = 2048;
  CHECK(expert_shard_bytes(m) == doctest::Approx(22020096.0));
}

TEST_CASE("grouped gemm flop counting") {
  const MoeModelSpec m = toy_model();
  // 2 * tokens * top_k * 3 * hidden * ffn = 2*1*1*3*8*4.
  CHECK(grouped_flops(layer_costs(m, 1, 1)) == doctest::Approx(192));
  CHECK(grouped_flops(layer_costs(m, 10, 1)) == doctest::Approx(1920));
}

TEST_CASE("costs scale linearly in tokens, score term in tokens*msl") {
  MoeModelSpec m = toy_model();
  m.others_bytes_factor = 2.0;
  auto total_flops = [](const LayerWork& w) {
    double f = 0;
    for (const auto& op : w.attn) f += op.flops;
    for (const auto& op : w.moe) f += op.flops;
    return f;
  };
  auto total_bytes = [](const LayerWork& w) {
    double b = 0;
    for (const auto& op : w.attn) b += op.bytes;
    for (const auto& op : w.moe) b += op.bytes;
    return b;
  };
  const LayerWork base = layer_costs(m, 100, 50);
  const LayerWork twice = layer_costs(m, 200, 50);
  // Weight-read bytes are constant; everything else doubles.
  const double weight_bytes =
      m.attn_proj_params * m.weight_bytes_per_param +
      expert_shard_bytes(m) * m.num_experts;
  CHECK(total_bytes(twice) - total_bytes(base) ==
        doctest::Approx(total_bytes(base) - weight_bytes));
  // Attention score term: 2 * tokens * msl * hidden.
  const LayerWork longer = layer_costs(m, 100, 100);
  CHECK(total_flops(longer) - total_flops(base) ==
        doctest::Approx(2.0 * 100 * 50 * 8));
  CHECK(total_flops(twice) == doctest::Approx(2.0 * total_flops(base)));
}

TEST_CASE("total MoE weight bytes are conserved across placements") {
  MoeModelSpec m = toy_model();
  m.num_experts = 12;
  const double total = m.num_experts * expert_shard_bytes(m);
  // Any split into local + fetched shards covers the same bytes.
  for (int local = 1; local <= m.num_experts; ++local) {
    const double fetched = (m.num_experts - local) * expert_shard_bytes(m);
    const double held = local * expert_shard_bytes(m);
    CHECK(fetched + held == doctest::Approx(total));
  }
}

TEST_CASE("category universe and entry shapes") {
  MoeModelSpec m = toy_model();
  m.shared_ffn_dim = 4;
  m.others_bytes_factor = 1.0;
  const LayerWork w = layer_costs(m, 16, 16);
  REQUIRE(w.attn.size() == 2);
  CHECK(w.attn[0].category == Category::Attention);
  CHECK(w.attn[1].category == Category::Others);
  REQUIRE(w.moe.size() == 3);
  CHECK(w.moe[0].category == Category::GroupedGemm);
  CHECK(w.moe[1].category == Category::DenseGemm);
  CHECK(w.moe[2].category == Category::Others);
  for (const auto& op : w.attn) {
    CHECK(op.flops >= 0);
    CHECK(op.bytes >= 0);
  }
  // The two Others halves sum to the configured activation multiple.
  CHECK(w.attn[1].bytes + w.moe[2].bytes ==
        doctest::Approx(m.others_bytes_factor * 16 * 8 * 1.0));
}

TEST_CASE("calibration scalars scale a category's roofline time uniformly") {
  GpuSpec gpu;
  MoeModelSpec m = toy_model();
  const LayerWork base = layer_costs(m, 64, 64);
  m.calib.grouped_gemm = 0.5;
  const LayerWork scaled = layer_costs(m, 64, 64);
  CHECK(roofline_time(scaled.moe[0].flops, scaled.moe[0].bytes, gpu) ==
        doctest::Approx(
            0.5 * roofline_time(base.moe[0].flops, base.moe[0].bytes, gpu)));
}

TEST_CASE("configuration errors") {
  MoeModelSpec m = toy_model();
  m.hidden_dim = 0;
  CHECK_THROWS_AS(layer_costs(m, 1, 1), ConfigError);
  m = toy_model();
  m.top_k = 2;  // exceeds num_experts == 1
  CHECK_THROWS_AS(layer_costs(m, 1, 1), ConfigError);
  m = toy_model();
  CHECK_THROWS_AS(layer_costs(m, 0, 1), ConfigError);
  CHECK_THROWS_AS(layer_costs(m, 1, 0), ConfigError);
}

TEST_SUITE_END();
