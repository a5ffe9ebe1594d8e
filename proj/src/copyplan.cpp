// SPDX-License-Identifier: Apache-2.0
#include "dwdpsim/copyplan.hpp"

#include <algorithm>
#include <sstream>

namespace dwdpsim {

std::uint64_t CopyPlan::total_bytes() const {
  std::uint64_t n = 0;
  for (const auto& s : slices) n += s.length;
  return n;
}

std::string CopyPlan::to_csv() const {
  std::ostringstream os;
  os << "param_id,src_rank,src_offset,dst_offset,length\n";
  for (const auto& s : slices) {
    os << s.param_id << "," << s.src_rank << "," << s.src_offset << ","
       << s.dst_offset << "," << s.length << "\n";
  }
  return os.str();
}

CopyPlan build_copy_plan(const std::vector<ShardRef>& shards,
                         std::uint64_t slice_size, int dst_rank) {
  require(slice_size > 0, "copy plan: slice_size must be > 0");
  for (std::size_t i = 0; i < shards.size(); ++i) {
    require(shards[i].size > 0, "copy plan: shard size must be > 0");
    require(shards[i].peer != dst_rank, "copy plan: shard hosted on destination");
    for (std::size_t j = 0; j < i; ++j) {
      require(shards[j].peer != shards[i].peer ||
                  shards[j].param_id != shards[i].param_id,
              "copy plan: duplicate (peer, param) shard");
    }
  }

  CopyPlan plan;
  plan.dst_rank = dst_rank;
  plan.slice_size = slice_size;

  // Parameters keep their first-appearance order.
  std::vector<std::uint64_t> params;
  for (const auto& sh : shards) {
    if (std::find(params.begin(), params.end(), sh.param_id) == params.end())
      params.push_back(sh.param_id);
  }
  std::vector<int> peers;
  for (const auto& sh : shards) {
    if (std::find(peers.begin(), peers.end(), sh.peer) == peers.end())
      peers.push_back(sh.peer);
  }
  std::sort(peers.begin(), peers.end());
  if (peers.empty()) return plan;
  // Stagger the rotation start per destination so concurrent destinations
  // begin their rounds at different peers.
  const std::size_t phase =
      static_cast<std::size_t>(dst_rank) % peers.size();
  std::rotate(peers.begin(), peers.begin() + phase, peers.end());

  for (std::uint64_t p : params) {
    // Per-peer segment of this parameter, if any.
    std::uint64_t max_m = 0;
    for (const auto& sh : shards) {
      if (sh.param_id == p) max_m = std::max(max_m, sh.size);
    }
    for (std::uint64_t offset = 0; offset < max_m; offset += slice_size) {
      for (int peer : peers) {
        for (const auto& sh : shards) {
          if (sh.param_id != p || sh.peer != peer) continue;
          if (offset >= sh.size) continue;
          const std::uint64_t chunk = std::min(slice_size, sh.size - offset);
          plan.slices.push_back(
              {p, peer, sh.src_offset + offset, offset, chunk});
        }
      }
    }
  }
  return plan;
}

std::map<int, std::vector<Slice>> source_queues(
    const std::vector<CopyPlan>& plans, int source) {
  std::map<int, std::vector<Slice>> queues;
  for (const auto& plan : plans) {
    auto& q = queues[plan.dst_rank];  // present even if empty
    for (const auto& s : plan.slices) {
      if (s.src_rank == source) q.push_back(s);
    }
  }
  return queues;
}

}  // namespace dwdpsim
