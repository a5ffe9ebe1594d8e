// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <string>
#include <vector>

#include "dwdpsim/modelspec.hpp"

namespace dwdpsim {

// Expert-to-rank placement for one DWDP group. Layer-uniform: the same
// map applies to every MoE layer.
struct PlacementPlan {
  int group_size = 0;   // N
  int num_experts = 0;  // E
  int local_count = 0;  // experts stored per rank (c)
  int redundancy = 0;   // surplus replicas, N*c - E
  // local_sets[r] = sorted expert indices stored on rank r.
  std::vector<std::vector<int>> local_sets;
  // fetch_lists[r] = (expert, source rank) for every non-local expert.
  std::vector<std::vector<std::pair<int, int>>> fetch_lists;

  bool holds(int rank, int expert) const;
  void validate() const;
};

// Contiguous-block placement with wraparound: rank r stores
// local_count experts starting at r*floor(E/N) (mod E), where
// local_count = ceil(E/N) + extra_redundancy, capped at E.
PlacementPlan build_placement(int num_experts, int group_size,
                              int extra_redundancy = 0);

// For each rank, pick a holder for every non-local expert. Greedy
// per-destination: minimize the current max per-source expert count,
// ties to the lowest rank index. Deterministic.
std::vector<std::vector<std::pair<int, int>>> assign_fetch_sources(
    int num_experts, const std::vector<std::vector<int>>& local_sets);

// Bytes one rank pulls per layer: (E - c) * expert_shard_bytes.
double prefetch_bytes(const PlacementPlan& plan, const MoeModelSpec& model);

// Human-readable rank -> expert-range listing for reports.
std::string describe_placement(const PlacementPlan& plan);

}  // namespace dwdpsim
