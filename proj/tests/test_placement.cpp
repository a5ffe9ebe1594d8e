// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <map>
#include <set>

#include "dwdpsim/placement.hpp"
#include "dwdpsim/rng.hpp"

using namespace dwdpsim;

TEST_SUITE_BEGIN("placement");

TEST_CASE("exact division: disjoint partition") {
  const PlacementPlan plan = build_placement(256, 4, 0);
  CHECK(plan.local_count == 64);
  CHECK(plan.redundancy == 0);
  std::set<int> all;
  for (const auto& s : plan.local_sets) all.insert(s.begin(), s.end());
  CHECK(all.size() == 256);
  // Unique holders: each rank fetches exactly 64 experts from each peer.
  for (int r = 0; r < 4; ++r) {
    std::map<int, int> per_src;
    for (const auto& [e, src] : plan.fetch_lists[r]) per_src[src]++;
    CHECK(per_src.size() == 3);
    for (const auto& [src, n] : per_src) CHECK(n == 64);
  }
}

TEST_CASE("non-divisible group: E=256, N=3") {
  const PlacementPlan plan = build_placement(256, 3, 0);
  CHECK(plan.local_count == 86);  // ceil(256/3)
  CHECK(plan.redundancy == 2);    // 3*86 - 256
  // Brute-force coverage.
  std::vector<int> replicas(256, 0);
  for (const auto& s : plan.local_sets)
    for (int e : s) replicas[e]++;
  for (int e = 0; e < 256; ++e) CHECK(replicas[e] >= 1);
}

TEST_CASE("redundancy: E=4, N=2, extra=1") {
  const PlacementPlan plan = build_placement(4, 2, 1);
  CHECK(plan.local_count == 3);
  CHECK(plan.redundancy == 2);
  for (int r = 0; r < 2; ++r) {
    CHECK(plan.fetch_lists[r].size() == 1);  // each rank missing exactly 1
    CHECK(plan.fetch_lists[r][0].second == 1 - r);  // the only peer
  }
}

TEST_CASE("greedy fetch sources balance per-source loads: E=6, N=3, extra=1") {
  const PlacementPlan plan = build_placement(6, 3, 1);
  CHECK(plan.local_count == 3);
  for (int r = 0; r < 3; ++r) {
    std::map<int, int> per_src;
    for (const auto& [e, src] : plan.fetch_lists[r]) per_src[src]++;
    int lo = 1 << 30, hi = 0;
    for (const auto& [src, n] : per_src) {
      lo = std::min(lo, n);
      hi = std::max(hi, n);
    }
    CHECK(hi - lo <= 1);
  }
}

TEST_CASE("assign_fetch_sources is deterministic") {
  const PlacementPlan a = build_placement(97, 5, 2);
  const PlacementPlan b = build_placement(97, 5, 2);
  CHECK(a.fetch_lists == b.fetch_lists);
}

TEST_CASE("prefetch_bytes") {
  MoeModelSpec m;
  m.hidden_dim = 8;
  m.expert_ffn_dim = 2;
  m.attn_proj_params = 1;
  m.weight_bytes_per_param = 1.0;
  m.num_experts = 256;
  m.top_k = 1;
  const double shard = expert_shard_bytes(m);  // 48
  CHECK(shard == doctest::Approx(48));
  PlacementPlan plan = build_placement(256, 4, 0);
  CHECK(prefetch_bytes(plan, m) == doctest::Approx(192 * 48));
  // Full replication degenerates to pure data parallelism.
  plan = build_placement(256, 4, 256);
  CHECK(plan.local_count == 256);
  CHECK(prefetch_bytes(plan, m) == doctest::Approx(0));
  for (const auto& fl : plan.fetch_lists) CHECK(fl.empty());
  // N=3 redundancy case: 170 missing shards.
  plan = build_placement(256, 3, 0);
  CHECK(prefetch_bytes(plan, m) == doctest::Approx(170 * 48));
}

TEST_CASE("property: invariants hold over randomized parameters") {
  Rng rng(20240811);
  for (int trial = 0; trial < 300; ++trial) {
    const int n = 2 + static_cast<int>(rng.uniform_below(14));
    const int e = n + static_cast<int>(rng.uniform_below(500));
    const int extra = static_cast<int>(rng.uniform_below(8));
    const PlacementPlan plan = build_placement(e, n, extra);
    plan.validate();  // throws on any violated invariant
    CHECK(plan.local_count >= (e + n - 1) / n);
  }
}

TEST_CASE("property: extra redundancy never increases prefetch bytes") {
  MoeModelSpec m;
  m.hidden_dim = 64;
  m.expert_ffn_dim = 16;
  m.attn_proj_params = 1;
  m.weight_bytes_per_param = 0.5;
  m.num_experts = 61;
  m.top_k = 1;
  double prev = 1e300;
  for (int extra = 0; extra < 70; extra += 7) {
    const PlacementPlan plan = build_placement(61, 4, extra);
    const double bytes = prefetch_bytes(plan, m);
    CHECK(bytes <= prev);
    prev = bytes;
  }
}

TEST_CASE("invalid arguments") {
  CHECK_THROWS_AS(build_placement(8, 1, 0), ConfigError);
  CHECK_THROWS_AS(build_placement(3, 4, 0), ConfigError);
  CHECK_THROWS_AS(build_placement(8, 2, -1), ConfigError);
}

TEST_CASE("describe_placement mentions every rank") {
  const PlacementPlan plan = build_placement(16, 4, 1);
  const std::string text = describe_placement(plan);
  for (int r = 0; r < 4; ++r) {
    CHECK(text.find("rank " + std::to_string(r)) != std::string::npos);
  }
}

TEST_SUITE_END();
