// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <vector>

#include "dwdpsim/hwmodel.hpp"

namespace dwdpsim {

// Per-category calibration multipliers. Each category gets exactly one
// scalar, applied uniformly to that category's flops and bytes (so its
// roofline time scales by the same factor). Defaults are neutral; the
// bundled GB200/R1-like profile sets fitted values.
struct CostCalibration {
  double attention = 1.0;
  double grouped_gemm = 1.0;
  double dense_gemm = 1.0;
};

// MoE transformer architecture, reduced to what the cost model needs.
struct MoeModelSpec {
  int num_layers = 1;
  std::int64_t hidden_dim = 0;
  int num_experts = 1;           // routed experts per MoE layer (E)
  int top_k = 1;                 // active experts per token
  std::int64_t expert_ffn_dim = 0;
  std::int64_t shared_ffn_dim = 0;  // 0 if no shared expert
  double attn_proj_params = 0;   // aggregate attention projection params/layer
  double weight_bytes_per_param = 2.0;  // e.g. 0.5 for 4-bit formats
  double kv_bytes_per_token_per_layer = 0.0;
  double act_bytes_per_element = 2.0;
  // Memory-bound elementwise work (norms, quant, routing, permutes) as a
  // multiple of one activation pass (tokens * hidden * act bytes), split
  // evenly between the attention and MoE blocks.
  double others_bytes_factor = 0.0;
  CostCalibration calib;

  void validate() const;
};

struct OpCost {
  Category category;
  double flops = 0;
  double bytes = 0;
};

// Operator cost entries for one layer: attention block and MoE block.
struct LayerWork {
  std::vector<OpCost> attn;
  std::vector<OpCost> moe;

  double total_time(const GpuSpec& gpu) const;
};

// Weight bytes of one expert in one layer: 3 projection matrices.
double expert_shard_bytes(const MoeModelSpec& model);

// Attention-block entries for `tokens` with mean sequence length
// `mean_seq_len`: projection GEMMs (2*T*P flops) plus the score term
// (2*T*msl*hidden), weight/activation/KV traffic, and the attention half
// of the elementwise Others traffic.
std::vector<OpCost> attention_entries(const MoeModelSpec& model, double tokens,
                                      double mean_seq_len);

// MoE-block entries. `routed_pairs` is the number of (token, expert)
// assignments the rank computes (tokens*top_k in the data-parallel view),
// `experts_touched` how many expert weight shards it streams from memory.
std::vector<OpCost> moe_entries(const MoeModelSpec& model, double tokens,
                                double routed_pairs, int experts_touched);

// Full per-layer costs in the data-parallel view: the rank runs every
// expert for its own tokens.
LayerWork layer_costs(const MoeModelSpec& model, std::int64_t tokens,
                      std::int64_t mean_seq_len);

}  // namespace dwdpsim
