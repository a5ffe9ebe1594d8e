// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <vector>

#include "dwdpsim/simcore.hpp"

using namespace dwdpsim;

TEST_SUITE_BEGIN("cesim");

namespace {

// link_bw of 1e9 B/s = 1 byte per ns keeps every completion on an exact
// integer tick.
constexpr double kLink = 1e9;

void drain(CopyEngineSim& engine) {
  while (const auto t = engine.next_event_time()) {
    engine.advance_to(*t);
  }
}

std::vector<CeTransfer> alternating(int src_a, int src_b, int slices,
                                    double bytes) {
  std::vector<CeTransfer> out;
  for (int i = 0; i < slices; ++i)
    out.push_back({i % 2 == 0 ? src_a : src_b, bytes});
  return out;
}

}  // namespace

TEST_CASE("single transfer runs at full link rate") {
  CopyEngineSim engine(kLink, 2, true);
  const int plan = engine.issue_plan(0, {{1, 1000}}, 0);
  drain(engine);
  CHECK(engine.plan_done(plan));
  CHECK(engine.plan_complete_time(plan) == 1000);
}

TEST_CASE("two in flight share the destination port and finish together") {
  CopyEngineSim engine(kLink, 2, true);
  const int plan = engine.issue_plan(0, {{1, 1000}, {2, 1000}}, 0);
  drain(engine);
  // 2000 bytes through a 1 B/ns destination port.
  CHECK(engine.plan_complete_time(plan) == 2000);
}

TEST_CASE("pipeline depth 1 exposes a contended slice; depth 2 hides it") {
  // A long third-party pull keeps the shared source at contention degree 2.
  for (int inflight : {1, 2}) {
    CopyEngineSim engine(kLink, inflight, true);
    engine.issue_plan(9, {{1, 100000}}, 0);  // background flow on src 1
    const int plan = engine.issue_plan(0, {{1, 1000}, {2, 1000}}, 0);
    drain(engine);
    if (inflight == 1) {
      // Serial: 1000 B at 1/2 rate, then 1000 B at full rate.
      CHECK(engine.plan_complete_time(plan) == 3000);
    } else {
      // The uncontended slice soaks up the destination headroom.
      CHECK(engine.plan_complete_time(plan) == 2000);
    }
  }
}

TEST_CASE("contention degree 2 on every in-flight slice costs nothing") {
  // Two destinations pull interleaved slices from two sources in opposite
  // phase: every slice sees degree 2, and both finish at bytes/link.
  CopyEngineSim engine(kLink, 2, true);
  const int a = engine.issue_plan(0, alternating(1, 2, 8, 1000), 0);
  const int b = engine.issue_plan(3, alternating(2, 1, 8, 1000), 0);
  drain(engine);
  CHECK(engine.plan_complete_time(a) == 8000);
  CHECK(engine.plan_complete_time(b) == 8000);
}

TEST_CASE("degree-3 collisions on both slices strictly slow the pull") {
  CopyEngineSim engine(kLink, 2, true);
  const int a = engine.issue_plan(0, alternating(1, 2, 8, 1000), 0);
  const int b = engine.issue_plan(3, alternating(2, 1, 8, 1000), 0);
  // A third destination pins long transfers on both sources.
  engine.issue_plan(4, {{1, 100000}, {2, 100000}}, 0);
  drain(engine);
  CHECK(engine.plan_complete_time(a) > 8000);
  CHECK(engine.plan_complete_time(b) > 8000);
}

TEST_CASE("monolithic many-to-one pulls serialize at the source") {
  CopyEngineSim engine(kLink, 2, true);
  std::vector<int> plans;
  for (int dst = 1; dst <= 3; ++dst)
    plans.push_back(engine.issue_plan(dst, {{0, 9000}}, 0));
  drain(engine);
  // Three equal flows share the source port: everyone takes 3x.
  for (int plan : plans) CHECK(engine.plan_complete_time(plan) == 27000);
}

TEST_CASE("contention off removes source-port sharing") {
  CopyEngineSim engine(kLink, 2, false);
  std::vector<int> plans;
  for (int dst = 1; dst <= 3; ++dst)
    plans.push_back(engine.issue_plan(dst, {{0, 9000}}, 0));
  drain(engine);
  for (int plan : plans) CHECK(engine.plan_complete_time(plan) == 9000);
}

TEST_CASE("plans on one destination run in FIFO order") {
  CopyEngineSim engine(kLink, 1, true);
  const int first = engine.issue_plan(0, {{1, 4000}}, 0);
  const int second = engine.issue_plan(0, {{2, 4000}}, 0);
  drain(engine);
  CHECK(engine.plan_complete_time(first) == 4000);
  CHECK(engine.plan_start_time(second) == 4000);
  CHECK(engine.plan_complete_time(second) == 8000);

  // With depth 2 the second plan's transfer is admitted immediately and
  // the two share the destination port.
  CopyEngineSim deep(kLink, 2, true);
  const int a = deep.issue_plan(0, {{1, 4000}}, 0);
  const int b = deep.issue_plan(0, {{2, 4000}}, 0);
  drain(deep);
  CHECK(deep.plan_complete_time(a) == 8000);
  CHECK(deep.plan_complete_time(b) == 8000);
  CHECK(deep.plan_start_time(b) == 0);
}

TEST_CASE("staggered issue times integrate correctly") {
  CopyEngineSim engine(kLink, 2, true);
  const int early = engine.issue_plan(0, {{1, 6000}}, 0);
  // Joins after 2000 ns; both flows then share source 1.
  while (engine.next_event_time() && *engine.next_event_time() < 2000) {
    engine.advance_to(*engine.next_event_time());
  }
  const int late = engine.issue_plan(2, {{1, 6000}}, 2000);
  drain(engine);
  // early: 2000 B at full rate, then 4000 B at 1/2 -> ends 10000.
  CHECK(engine.plan_complete_time(early) == 10000);
  // late: 4000 B at 1/2 while sharing, then 2000 B at full -> ends 12000.
  CHECK(engine.plan_complete_time(late) == 12000);
}

TEST_CASE("comm_rate_at reports both directions") {
  CopyEngineSim engine(kLink, 2, true);
  engine.issue_plan(0, {{1, 5000}}, 0);
  CHECK(engine.comm_rate_at(0) == doctest::Approx(kLink));  // inbound
  CHECK(engine.comm_rate_at(1) == doctest::Approx(kLink));  // outbound
  CHECK(engine.comm_rate_at(2) == doctest::Approx(0));
  drain(engine);
  CHECK(engine.comm_rate_at(0) == doctest::Approx(0));
}

TEST_CASE("determinism: identical schedules, identical timings") {
  auto run = [] {
    CopyEngineSim engine(kLink, 2, true);
    const int a = engine.issue_plan(0, alternating(1, 2, 16, 777), 0);
    const int b = engine.issue_plan(2, alternating(1, 3, 12, 1234), 0);
    const int c = engine.issue_plan(3, {{1, 50000}}, 0);
    drain(engine);
    return std::vector<TimeNs>{engine.plan_complete_time(a),
                               engine.plan_complete_time(b),
                               engine.plan_complete_time(c)};
  };
  CHECK(run() == run());
}

TEST_SUITE_END();
