// SPDX-License-Identifier: Apache-2.0
#include "dwdpsim/modelspec.hpp"

namespace dwdpsim {

void MoeModelSpec::validate() const {
  require(num_layers >= 1, "model.num_layers must be >= 1");
  require(hidden_dim > 0, "model.hidden_dim must be > 0");
  require(num_experts >= 1, "model.num_experts must be >= 1");
  require(top_k >= 1 && top_k <= num_experts,
          "model.top_k must be in [1, num_experts]");
  require(expert_ffn_dim > 0, "model.expert_ffn_dim must be > 0");
  require(shared_ffn_dim >= 0, "model.shared_ffn_dim must be >= 0");
  require(attn_proj_params > 0, "model.attn_proj_params must be > 0");
  require(weight_bytes_per_param > 0,
          "model.weight_bytes_per_param must be > 0");
  require(kv_bytes_per_token_per_layer >= 0,
          "model.kv_bytes_per_token_per_layer must be >= 0");
  require(act_bytes_per_element > 0, "model.act_bytes_per_element must be > 0");
  require(others_bytes_factor >= 0, "model.others_bytes_factor must be >= 0");
  require(calib.attention > 0 && calib.grouped_gemm > 0 && calib.dense_gemm > 0,
          "model.calib scalars must be > 0");
}

double LayerWork::total_time(const GpuSpec& gpu) const {
  double t = 0;
  for (const auto& op : attn) t += roofline_time(op.flops, op.bytes, gpu);
  for (const auto& op : moe) t += roofline_time(op.flops, op.bytes, gpu);
  return t;
}

double expert_shard_bytes(const MoeModelSpec& model) {
  return 3.0 * static_cast<double>(model.hidden_dim) *
         static_cast<double>(model.expert_ffn_dim) *
         model.weight_bytes_per_param;
}

std::vector<OpCost> attention_entries(const MoeModelSpec& model, double tokens,
                                      double mean_seq_len) {
  const double h = static_cast<double>(model.hidden_dim);
  const double s = model.calib.attention;
  const double flops =
      s * (2.0 * tokens * model.attn_proj_params + 2.0 * tokens * mean_seq_len * h);
  const double act_traffic = tokens * h * model.act_bytes_per_element;
  const double bytes =
      s * (model.attn_proj_params * model.weight_bytes_per_param + act_traffic +
           tokens * model.kv_bytes_per_token_per_layer);
  std::vector<OpCost> out;
  out.push_back({Category::Attention, flops, bytes});
  if (model.others_bytes_factor > 0) {
    out.push_back({Category::Others, 0.0,
                   0.5 * model.others_bytes_factor * act_traffic});
  }
  return out;
}

std::vector<OpCost> moe_entries(const MoeModelSpec& model, double tokens,
                                double routed_pairs, int experts_touched) {
  const double h = static_cast<double>(model.hidden_dim);
  const double f = static_cast<double>(model.expert_ffn_dim);
  const double act_traffic = tokens * h * model.act_bytes_per_element;
  std::vector<OpCost> out;

  const double sg = model.calib.grouped_gemm;
  const double gg_flops = sg * 2.0 * routed_pairs * 3.0 * h * f;
  // One weight pass over the touched shards plus token in/out traffic.
  const double gg_bytes =
      sg * (static_cast<double>(experts_touched) * expert_shard_bytes(model) +
            2.0 * routed_pairs * h * model.act_bytes_per_element);
  out.push_back({Category::GroupedGemm, gg_flops, gg_bytes});

  if (model.shared_ffn_dim > 0) {
    const double fs = static_cast<double>(model.shared_ffn_dim);
    const double sd = model.calib.dense_gemm;
    const double dg_flops = sd * 2.0 * tokens * 3.0 * h * fs;
    const double dg_bytes =
        sd * (3.0 * h * fs * model.weight_bytes_per_param +
              tokens * h * model.act_bytes_per_element);
    out.push_back({Category::DenseGemm, dg_flops, dg_bytes});
  }
  if (model.others_bytes_factor > 0) {
    out.push_back({Category::Others, 0.0,
                   0.5 * model.others_bytes_factor * act_traffic});
  }
  return out;
}

LayerWork layer_costs(const MoeModelSpec& model, std::int64_t tokens,
                      std::int64_t mean_seq_len) {
  model.validate();
  require(tokens >= 1, "layer_costs: tokens must be >= 1");
  require(mean_seq_len >= 1, "layer_costs: mean_seq_len must be >= 1");
  const double t = static_cast<double>(tokens);
  LayerWork work;
  work.attn = attention_entries(model, t, static_cast<double>(mean_seq_len));
  work.moe =
      moe_entries(model, t, t * static_cast<double>(model.top_k), model.num_experts);
  return work;
}

}  // namespace dwdpsim
