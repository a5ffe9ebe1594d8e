// SPDX-License-Identifier: Apache-2.0
#include "dwdpsim/placement.hpp"

#include <algorithm>
#include <set>
#include <sstream>

namespace dwdpsim {

bool PlacementPlan::holds(int rank, int expert) const {
  const auto& s = local_sets[rank];
  return std::binary_search(s.begin(), s.end(), expert);
}

void PlacementPlan::validate() const {
  check_invariant(static_cast<int>(local_sets.size()) == group_size,
                  "placement: local_sets size mismatch");
  check_invariant(static_cast<int>(fetch_lists.size()) == group_size,
                  "placement: fetch_lists size mismatch");
  std::vector<int> replicas(num_experts, 0);
  for (int r = 0; r < group_size; ++r) {
    check_invariant(static_cast<int>(local_sets[r].size()) == local_count,
                    "placement: unequal local counts");
    for (int e : local_sets[r]) {
      check_invariant(e >= 0 && e < num_experts, "placement: expert out of range");
      replicas[e]++;
    }
    // Local set and fetch list must partition the expert universe.
    std::set<int> seen(local_sets[r].begin(), local_sets[r].end());
    for (const auto& [e, src] : fetch_lists[r]) {
      check_invariant(!seen.count(e), "placement: fetched expert is local");
      seen.insert(e);
      check_invariant(src != r, "placement: self-fetch");
      check_invariant(holds(src, e), "placement: source does not hold expert");
    }
    check_invariant(static_cast<int>(seen.size()) == num_experts,
                    "placement: rank does not cover all experts");
  }
  int surplus = 0;
  for (int e = 0; e < num_experts; ++e) {
    check_invariant(replicas[e] >= 1, "placement: expert not stored anywhere");
    surplus += replicas[e] - 1;
  }
  check_invariant(surplus == redundancy, "placement: redundancy miscount");
}

std::vector<std::vector<std::pair<int, int>>> assign_fetch_sources(
    int num_experts, const std::vector<std::vector<int>>& local_sets) {
  const int n = static_cast<int>(local_sets.size());
  std::vector<std::vector<int>> holders(num_experts);
  for (int r = 0; r < n; ++r) {
    for (int e : local_sets[r]) holders[e].push_back(r);
  }
  std::vector<std::vector<std::pair<int, int>>> fetch_lists(n);
  for (int r = 0; r < n; ++r) {
    std::vector<int> load(n, 0);  // experts pulled from each source, this rank
    std::vector<bool> local(num_experts, false);
    for (int e : local_sets[r]) local[e] = true;
    for (int e = 0; e < num_experts; ++e) {
      if (local[e]) continue;
      check_invariant(!holders[e].empty(), "assign_fetch_sources: uncovered expert");
      int best = -1;
      for (int h : holders[e]) {
        if (h == r) continue;
        if (best < 0 || load[h] < load[best]) best = h;
      }
      check_invariant(best >= 0, "assign_fetch_sources: no usable holder");
      load[best]++;
      fetch_lists[r].push_back({e, best});
    }
  }
  return fetch_lists;
}

PlacementPlan build_placement(int num_experts, int group_size,
                              int extra_redundancy) {
  require(group_size >= 2, "placement: group_size must be >= 2");
  require(num_experts >= group_size,
          "placement: num_experts must be >= group_size");
  require(extra_redundancy >= 0, "placement: extra_redundancy must be >= 0");

  PlacementPlan plan;
  plan.group_size = group_size;
  plan.num_experts = num_experts;
  const int base = (num_experts + group_size - 1) / group_size;
  plan.local_count = std::min(base + extra_redundancy, num_experts);
  plan.redundancy = group_size * plan.local_count - num_experts;

  // Contiguous blocks with wraparound. The floor stride overlaps blocks to
  // spread redundancy, but leaves a tail gap when (N-1)*floor + c < E; fall
  // back to striding by the block size, which always covers.
  int stride = num_experts / group_size;
  if ((group_size - 1) * stride + plan.local_count < num_experts)
    stride = plan.local_count;
  plan.local_sets.resize(group_size);
  for (int r = 0; r < group_size; ++r) {
    const int start = (r * stride) % num_experts;
    auto& s = plan.local_sets[r];
    s.reserve(plan.local_count);
    if (plan.local_count == num_experts) {
      for (int e = 0; e < num_experts; ++e) s.push_back(e);
    } else {
      for (int i = 0; i < plan.local_count; ++i)
        s.push_back((start + i) % num_experts);
      std::sort(s.begin(), s.end());
    }
  }
  plan.fetch_lists = assign_fetch_sources(num_experts, plan.local_sets);
  plan.validate();
  return plan;
}

double prefetch_bytes(const PlacementPlan& plan, const MoeModelSpec& model) {
  return static_cast<double>(plan.num_experts - plan.local_count) *
         expert_shard_bytes(model);
}

std::string describe_placement(const PlacementPlan& plan) {
  std::ostringstream os;
  os << "placement: " << plan.num_experts << " experts over "
     << plan.group_size << " ranks, " << plan.local_count
     << " local each, redundancy " << plan.redundancy << "\n";
  for (int r = 0; r < plan.group_size; ++r) {
    os << "  rank " << r << ": experts ";
    // Collapse the sorted set into ranges.
    const auto& s = plan.local_sets[r];
    for (std::size_t i = 0; i < s.size();) {
      std::size_t j = i;
      while (j + 1 < s.size() && s[j + 1] == s[j] + 1) ++j;
      if (i > 0) os << ",";
      if (j > i)
        os << s[i] << "-" << s[j];
      else
        os << s[i];
      i = j + 1;
    }
    std::vector<int> pulls(plan.group_size, 0);
    for (const auto& [e, src] : plan.fetch_lists[r]) pulls[src]++;
    os << "; fetches";
    bool any = false;
    for (int src = 0; src < plan.group_size; ++src) {
      if (pulls[src] == 0) continue;
      os << (any ? ", " : " ") << pulls[src] << " from rank " << src;
      any = true;
    }
    if (!any) os << " nothing";
    os << "\n";
  }
  return os.str();
}

}  // namespace dwdpsim
