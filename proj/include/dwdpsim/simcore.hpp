// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "dwdpsim/hwmodel.hpp"
#include "dwdpsim/modelspec.hpp"
#include "dwdpsim/placement.hpp"
#include "dwdpsim/workload.hpp"

namespace dwdpsim {

// Simulation time in integer nanoseconds: event ordering is exact and
// runs are bit-reproducible.
using TimeNs = std::int64_t;

inline TimeNs to_ns(double seconds) {
  return static_cast<TimeNs>(std::llround(seconds * 1e9));
}

enum class Stream { Compute, CopyEngine };

struct SimEvent {
  int rank = 0;
  Stream stream = Stream::Compute;
  Category category = Category::Others;
  TimeNs start = 0;
  TimeNs end = 0;
  int layer = 0;
  int iteration = 0;
  double bytes = 0;     // bytes moved, for copy events
  std::string detail;   // e.g. "dispatch", "combine", "weight_wait"
};

struct RunReport {
  std::string strategy;
  int num_ranks = 0;
  int num_layers = 0;
  int iterations = 0;
  int warmup_iterations = 0;
  std::vector<SimEvent> events;
  // [rank][iteration]
  std::vector<std::vector<TimeNs>> iter_start;
  std::vector<std::vector<TimeNs>> iter_end;
  std::vector<std::vector<std::int64_t>> iter_tokens;

  int steady_iterations() const { return iterations - warmup_iterations; }
  // Mean steady-state iteration latency of one rank / averaged over ranks.
  double mean_latency_us(int rank) const;
  double mean_latency_us() const;
  // Steady-state context tokens per second, summed over ranks.
  double throughput_tokens_per_s() const;
  // Asserts that events on one (rank, stream) never overlap.
  void validate_streams() const;
};

// DWDP execution options.
struct DwdpOptions {
  bool merge_elim = true;        // skip the pre-launch D2D merge copy
  bool tdm = true;               // sliced round-robin copy plan vs monolithic
  std::uint64_t slice_size = 1 << 20;
  bool model_contention = true;  // share source ports between destinations

  void validate() const;
};

// ---------------------------------------------------------------------------
// Copy-engine fluid model, also used standalone in tests: each destination
// executes an ordered transfer list with up to ce_inflight transfers in
// flight; rates are max-min fair under per-source-outbound and
// per-destination-inbound capacities of link_bw (source sharing only when
// contention is modeled).

struct CeTransfer {
  int src = 0;
  double bytes = 0;
};

using CeTransferList = std::shared_ptr<const std::vector<CeTransfer>>;

class CopyEngineSim {
 public:
  CopyEngineSim(double link_bw, int ce_inflight, bool contention_on);

  // Queue a transfer list on `dst`'s engine; returns a plan handle. The
  // shared form avoids copying when many plans reuse one list.
  int issue_plan(int dst, const std::vector<CeTransfer>& transfers, TimeNs now);
  int issue_plan(int dst, CeTransferList transfers, TimeNs now);

  // Earliest pending transfer completion, or nullopt when idle.
  std::optional<TimeNs> next_event_time() const;
  // Process completions at exactly next_event_time(); returns completed plans.
  std::vector<int> advance_to(TimeNs t);

  bool plan_done(int plan) const;
  TimeNs plan_complete_time(int plan) const;   // -1 if pending
  TimeNs plan_start_time(int plan) const;      // first byte in service
  double plan_bytes(int plan) const;
  // P2P bytes/s currently crossing `rank`'s memory (inbound + outbound).
  double comm_rate_at(int rank) const;
  std::uint64_t epoch() const { return epoch_; }

 private:
  struct Plan {
    int dst = 0;
    CeTransferList transfers;
    std::size_t next = 0;
    std::size_t live = 0;  // admitted but not finished
    double bytes = 0;
    TimeNs start = -1;
    TimeNs complete = -1;
  };
  struct Flow {
    int plan = 0;
    int dst = 0;
    int src = 0;
    double remaining = 0;
    double rate = 0;  // bytes/ns
  };
  struct DstState {
    std::vector<int> queue;  // plan ids, FIFO
    std::size_t head = 0;
    int inflight = 0;
  };

  void integrate_to(TimeNs t);
  void ensure_rank(int rank);
  void admit(int dst, TimeNs now);
  void recompute_rates();

  double link_bw_ns_;  // bytes per ns
  int ce_inflight_;
  bool contention_on_;
  TimeNs now_ = 0;
  std::uint64_t epoch_ = 0;
  std::vector<Plan> plans_;
  std::vector<Flow> flows_;
  std::vector<DstState> dsts_;
  // Scratch for the rate solver, sized to the ranks seen so far.
  std::vector<double> in_used_, out_used_;
  std::vector<int> in_cnt_, out_cnt_;
  std::vector<char> frozen_;
  std::vector<std::uint32_t> newly_frozen_;
  std::vector<int> freed_dsts_;
};

// ---------------------------------------------------------------------------
// Simulators.

// Synchronized DEP: per layer, attention -> barrier + dispatch all-to-all ->
// expert-parallel MoE -> barrier + combine all-to-all. Barrier waits are
// recorded as SyncWait; iteration latency is identical across ranks.
RunReport simulate_dep(const MoeModelSpec& model, const GpuSpec& gpu,
                       const InterferenceParams& interference,
                       const std::vector<RankBatch>& batches, int group_size,
                       int warmup_iterations = 2);

// Asynchronous DWDP: per-rank independent progress with layer l+1 prefetch
// issued at the start of the MoE block of layer l, double buffering, and
// copy-engine contention + interference applied per event.
RunReport simulate_dwdp(const MoeModelSpec& model, const GpuSpec& gpu,
                        const InterferenceParams& interference,
                        const std::vector<RankBatch>& batches,
                        const PlacementPlan& placement,
                        const DwdpOptions& options,
                        int warmup_iterations = 2);

// ---------------------------------------------------------------------------
// Accounting.

struct BreakdownTable {
  // Mean microseconds per steady iteration, averaged over ranks; compute
  // stream and copy-engine stream reported separately.
  std::map<Category, double> compute_us;
  std::map<Category, double> copy_us;
  double iteration_latency_us = 0;
  bool p2p_fully_overlapped = false;

  double category_us(Category c) const;
  std::string to_csv() const;
};

BreakdownTable breakdown(const RunReport& report);

struct ComparisonRow {
  Category category = Category::Others;
  double a_us = 0;
  double b_us = 0;
  // (a - b) / a_latency; absent for off-critical-path categories (P2PCopy).
  std::optional<double> delta_frac;
};

struct ComparisonTable {
  std::vector<ComparisonRow> rows;
  double a_latency_us = 0;
  double b_latency_us = 0;
  double overall_frac = 0;  // (a_latency - b_latency) / a_latency
  // Sum of the two-decimal-rounded Communication and SyncWait delta
  // percentages, matching how the headline "gross" figure is quoted.
  double gross_sync_comm_pct = 0;

  std::string to_csv() const;
};

ComparisonTable compare_reports(const BreakdownTable& a,
                                const BreakdownTable& b);
ComparisonTable compare_reports(const RunReport& a, const RunReport& b);

// ---------------------------------------------------------------------------
// Closed-form roofline comparison (no event simulation).

struct AnalyticResult {
  double t_compute_s = 0;   // per layer
  double t_prefetch_s = 0;  // per layer
  double t_all2all_s = 0;   // per layer, dispatch + combine
  double compute_prefetch_ratio = 0;  // inf -> prefetch_saturated
  double dep_dwdp_speedup = 0;
  bool prefetch_saturated = false;
};

AnalyticResult analytic_compare(const MoeModelSpec& model, const GpuSpec& gpu,
                                const PlacementPlan& placement,
                                std::int64_t tokens, std::int64_t mean_seq_len);

// ---------------------------------------------------------------------------
// Serialization (report_io.cpp).

std::string report_to_json(const RunReport& report,
                           const std::string& config_hash);
std::string report_to_chrome_trace(const RunReport& report);

}  // namespace dwdpsim
