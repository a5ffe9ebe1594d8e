// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "dwdpsim/errors.hpp"

namespace dwdpsim {

// One remote weight segment to fetch: `size` bytes of parameter
// `param_id` living on `peer` at `src_offset`.
struct ShardRef {
  int peer = 0;
  std::uint64_t param_id = 0;
  std::uint64_t size = 0;
  std::uint64_t src_offset = 0;
};

struct Slice {
  std::uint64_t param_id = 0;
  int src_rank = 0;
  std::uint64_t src_offset = 0;
  std::uint64_t dst_offset = 0;
  std::uint64_t length = 0;
};

// Ordered DMA schedule for one destination rank's prefetch.
struct CopyPlan {
  int dst_rank = 0;
  std::uint64_t slice_size = 0;
  std::vector<Slice> slices;

  std::uint64_t total_bytes() const;
  std::string to_csv() const;
};

// Fixed-size slicing with round-robin peer interleave: parameters in
// input order (outer), slice offsets ascending (middle), peers rotated
// by dst_rank modulo peer count (inner). A slice_size no smaller than
// every shard degenerates to one monolithic slice per shard.
CopyPlan build_copy_plan(const std::vector<ShardRef>& shards,
                         std::uint64_t slice_size, int dst_rank = 0);

// Source-side view: the given source's pending slices grouped per
// destination, preserving each plan's order. The simulator's round-robin
// service consumes these queues one slice per destination per round.
std::map<int, std::vector<Slice>> source_queues(
    const std::vector<CopyPlan>& plans, int source);

}  // namespace dwdpsim
