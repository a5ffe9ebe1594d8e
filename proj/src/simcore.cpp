// SPDX-License-Identifier: Apache-2.0
#include "dwdpsim/simcore.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <queue>
#include <sstream>
#include <tuple>

#include "dwdpsim/copyplan.hpp"

namespace dwdpsim {

// ===========================================================================
// RunReport

double RunReport::mean_latency_us(int rank) const {
  double total = 0;
  int n = 0;
  for (int it = warmup_iterations; it < iterations; ++it) {
    total += static_cast<double>(iter_end[rank][it] - iter_start[rank][it]);
    ++n;
  }
  check_invariant(n > 0, "report: no steady iterations");
  return total / n / 1e3;
}

double RunReport::mean_latency_us() const {
  double total = 0;
  for (int r = 0; r < num_ranks; ++r) total += mean_latency_us(r);
  return total / num_ranks;
}

double RunReport::throughput_tokens_per_s() const {
  double tps = 0;
  for (int r = 0; r < num_ranks; ++r) {
    double tokens = 0;
    for (int it = warmup_iterations; it < iterations; ++it)
      tokens += static_cast<double>(iter_tokens[r][it]);
    const double span_ns = static_cast<double>(
        iter_end[r][iterations - 1] - iter_start[r][warmup_iterations]);
    check_invariant(span_ns > 0, "report: empty steady window");
    tps += tokens / (span_ns / 1e9);
  }
  return tps;
}

void RunReport::validate_streams() const {
  // Events on one (rank, stream) must never overlap.
  std::map<std::pair<int, int>, std::vector<std::pair<TimeNs, TimeNs>>> lanes;
  for (const auto& e : events) {
    check_invariant(e.end >= e.start, "event ends before it starts");
    lanes[{e.rank, static_cast<int>(e.stream)}].push_back({e.start, e.end});
  }
  for (auto& [key, spans] : lanes) {
    std::sort(spans.begin(), spans.end());
    for (std::size_t i = 1; i < spans.size(); ++i) {
      check_invariant(spans[i].first >= spans[i - 1].second,
                      "overlapping events on one (rank, stream)");
    }
  }
}

void DwdpOptions::validate() const {
  if (tdm) require(slice_size > 0, "dwdp.slice_size must be > 0 with tdm");
}

// ===========================================================================
// CopyEngineSim

CopyEngineSim::CopyEngineSim(double link_bw, int ce_inflight,
                             bool contention_on)
    : link_bw_ns_(link_bw / 1e9),
      ce_inflight_(ce_inflight),
      contention_on_(contention_on) {
  require(link_bw > 0, "copy engine: link_bw must be > 0");
  require(ce_inflight >= 1, "copy engine: ce_inflight must be >= 1");
}

void CopyEngineSim::ensure_rank(int rank) {
  check_invariant(rank >= 0, "copy engine: negative rank");
  if (static_cast<std::size_t>(rank) >= dsts_.size()) {
    dsts_.resize(rank + 1);
    in_used_.resize(rank + 1, 0);
    out_used_.resize(rank + 1, 0);
    in_cnt_.resize(rank + 1, 0);
    out_cnt_.resize(rank + 1, 0);
  }
}

int CopyEngineSim::issue_plan(int dst, const std::vector<CeTransfer>& transfers,
                              TimeNs now) {
  return issue_plan(dst, std::make_shared<std::vector<CeTransfer>>(transfers),
                    now);
}

int CopyEngineSim::issue_plan(int dst, CeTransferList transfers, TimeNs now) {
  integrate_to(now);
  ensure_rank(dst);
  const int id = static_cast<int>(plans_.size());
  Plan plan;
  plan.dst = dst;
  plan.transfers = std::move(transfers);
  for (const auto& t : *plan.transfers) {
    check_invariant(t.bytes > 0, "copy engine: empty transfer");
    check_invariant(t.src != dst, "copy engine: self transfer");
    ensure_rank(t.src);
    plan.bytes += t.bytes;
  }
  const bool empty = plan.transfers->empty();
  if (empty) {
    plan.start = now;
    plan.complete = now;
  }
  plans_.push_back(std::move(plan));
  if (!empty) {
    dsts_[dst].queue.push_back(id);
    admit(dst, now);
    recompute_rates();
  }
  return id;
}

void CopyEngineSim::integrate_to(TimeNs t) {
  check_invariant(t >= now_, "copy engine: time went backwards");
  const double dt = static_cast<double>(t - now_);
  if (dt > 0) {
    for (auto& f : flows_) f.remaining -= f.rate * dt;
  }
  now_ = t;
}

void CopyEngineSim::admit(int dst, TimeNs now) {
  DstState& state = dsts_[dst];
  while (state.inflight < ce_inflight_ && state.head < state.queue.size()) {
    const int pid = state.queue[state.head];
    Plan& plan = plans_[pid];
    const auto& list = *plan.transfers;
    if (plan.next >= list.size()) {
      ++state.head;
      continue;
    }
    const CeTransfer& t = list[plan.next];
    flows_.push_back({pid, dst, t.src, t.bytes, 0.0});
    if (plan.start < 0) plan.start = now;
    plan.next++;
    plan.live++;
    if (plan.next >= list.size()) {
      // All admitted; plan leaves the queue, completion tracked via live.
      ++state.head;
      if (state.head > 1024) {  // reclaim the consumed prefix
        state.queue.erase(state.queue.begin(),
                          state.queue.begin() +
                              static_cast<std::ptrdiff_t>(state.head));
        state.head = 0;
      }
    }
    ++state.inflight;
  }
}

void CopyEngineSim::recompute_rates() {
  ++epoch_;
  if (flows_.empty()) return;
  // Progressive filling (max-min fairness): raise every unfrozen flow in
  // lockstep and freeze the flows on each link as it saturates.
  // Destination inbound capacity always binds; source outbound only when
  // contention is modeled.
  const std::size_t n = flows_.size();
  frozen_.assign(n, 0);
  for (const auto& f : flows_) {
    in_used_[f.dst] = 0;
    out_used_[f.src] = 0;
  }
  std::size_t remaining = n;
  while (remaining > 0) {
    for (const auto& f : flows_) {
      in_cnt_[f.dst] = 0;
      out_cnt_[f.src] = 0;
    }
    for (std::size_t i = 0; i < n; ++i) {
      if (frozen_[i]) continue;
      in_cnt_[flows_[i].dst]++;
      out_cnt_[flows_[i].src]++;
    }
    // Fill level at which each flow's links saturate; the smallest wins.
    double next = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < n; ++i) {
      if (frozen_[i]) continue;
      const auto& f = flows_[i];
      double own = (link_bw_ns_ - in_used_[f.dst]) / in_cnt_[f.dst];
      if (contention_on_) {
        own = std::min(own,
                       (link_bw_ns_ - out_used_[f.src]) / out_cnt_[f.src]);
      }
      next = std::min(next, own);
    }
    check_invariant(std::isfinite(next) && next > 0,
                    "copy engine: degenerate fill level");
    newly_frozen_.clear();
    for (std::size_t i = 0; i < n; ++i) {
      if (frozen_[i]) continue;
      const auto& f = flows_[i];
      double own = (link_bw_ns_ - in_used_[f.dst]) / in_cnt_[f.dst];
      if (contention_on_) {
        own = std::min(own,
                       (link_bw_ns_ - out_used_[f.src]) / out_cnt_[f.src]);
      }
      if (own <= next * (1 + 1e-12))
        newly_frozen_.push_back(static_cast<std::uint32_t>(i));
    }
    check_invariant(!newly_frozen_.empty(),
                    "copy engine: fill did not progress");
    for (std::uint32_t i : newly_frozen_) {
      frozen_[i] = 1;
      flows_[i].rate = next;
      in_used_[flows_[i].dst] += next;
      out_used_[flows_[i].src] += next;
      --remaining;
    }
  }
}

std::optional<TimeNs> CopyEngineSim::next_event_time() const {
  std::optional<TimeNs> best;
  for (const auto& f : flows_) {
    check_invariant(f.rate > 0, "copy engine: stalled flow");
    const double dt = f.remaining / f.rate;
    const TimeNs t = now_ + std::max<TimeNs>(
                                0, static_cast<TimeNs>(std::ceil(dt - 1e-9)));
    if (!best || t < *best) best = t;
  }
  return best;
}

std::vector<int> CopyEngineSim::advance_to(TimeNs t) {
  integrate_to(t);
  std::vector<int> done_plans;
  freed_dsts_.clear();
  for (std::size_t i = 0; i < flows_.size();) {
    if (flows_[i].remaining <= 0.5) {  // byte remnants below rounding grain
      const int pid = flows_[i].plan;
      Plan& plan = plans_[pid];
      plan.live--;
      dsts_[flows_[i].dst].inflight--;
      freed_dsts_.push_back(flows_[i].dst);
      flows_.erase(flows_.begin() + static_cast<std::ptrdiff_t>(i));
      if (plan.live == 0 && plan.next >= plan.transfers->size() &&
          plan.complete < 0) {
        plan.complete = t;
        done_plans.push_back(pid);
      }
    } else {
      ++i;
    }
  }
  if (!freed_dsts_.empty()) {
    // Refill the freed pipeline slots.
    for (int dst : freed_dsts_) admit(dst, t);
    recompute_rates();
  }
  return done_plans;
}

bool CopyEngineSim::plan_done(int plan) const {
  return plans_[plan].complete >= 0;
}
TimeNs CopyEngineSim::plan_complete_time(int plan) const {
  return plans_[plan].complete;
}
TimeNs CopyEngineSim::plan_start_time(int plan) const {
  return plans_[plan].start;
}
double CopyEngineSim::plan_bytes(int plan) const { return plans_[plan].bytes; }

double CopyEngineSim::comm_rate_at(int rank) const {
  double rate_ns = 0;
  for (const auto& f : flows_) {
    if (f.dst == rank || f.src == rank) rate_ns += f.rate;
  }
  return rate_ns * 1e9;  // bytes/s
}

// ===========================================================================
// Shared helpers

namespace {

struct InterferenceCtx {
  const GpuSpec* gpu;
  const InterferenceParams* params;
};

// Event duration under the roofline with interference factors sampled at
// the event start: DRAM slowdown on the memory arm, frequency throttle on
// both arms.
TimeNs op_duration_ns(const OpCost& op, const InterferenceCtx& ctx,
                      double comm_rate) {
  double tf = op.flops / ctx.gpu->peak_flops;
  double tb = op.bytes / ctx.gpu->mem_bw;
  const bool comm_active = comm_rate > 0;
  if (ctx.params->mem_interference_on && comm_active) {
    tb *= mem_slowdown_factor(comm_rate, *ctx.gpu);
  }
  if (ctx.params->power_interference_on) {
    const auto it = ctx.params->compute_power_frac.find(op.category);
    const double base_power =
        it == ctx.params->compute_power_frac.end() ? 0.0 : it->second;
    const double power = comm_active
                             ? overlap_power(op.category, *ctx.params, *ctx.gpu)
                             : base_power;
    const double freq = power_throttle_factor(power, *ctx.params);
    tf /= freq;
    tb /= freq;
  }
  const double dur = std::max(tf, tb);
  return std::max<TimeNs>(1, to_ns(dur));
}

double all2all_oneway_bytes(const MoeModelSpec& model, std::int64_t tokens) {
  return static_cast<double>(tokens) * model.top_k *
         static_cast<double>(model.hidden_dim) * model.act_bytes_per_element;
}

void validate_batches(const std::vector<RankBatch>& batches, int num_ranks,
                      int num_experts) {
  require(!batches.empty(), "simulate: no batches");
  for (const auto& b : batches) {
    require(static_cast<int>(b.tokens.size()) == num_ranks,
            "simulate: batch does not cover all ranks");
    require(static_cast<int>(b.routed.size()) == num_ranks,
            "simulate: batch routing does not cover all ranks");
    for (const auto& row : b.routed) {
      require(static_cast<int>(row.size()) == num_experts,
              "simulate: routed counts do not cover all experts");
    }
  }
}

}  // namespace

// ===========================================================================
// DEP simulator

RunReport simulate_dep(const MoeModelSpec& model, const GpuSpec& gpu,
                       const InterferenceParams& interference,
                       const std::vector<RankBatch>& batches, int group_size,
                       int warmup_iterations) {
  model.validate();
  gpu.validate();
  interference.validate();
  require(group_size >= 2, "simulate_dep: group_size must be >= 2");
  validate_batches(batches, group_size, model.num_experts);
  const int iterations = static_cast<int>(batches.size());
  require(warmup_iterations >= 0 && warmup_iterations < iterations,
          "simulate_dep: warmup must leave at least one steady iteration");

  // Expert-parallel partition of the MoE weights: contiguous blocks, the
  // first (E mod N) ranks take one extra expert.
  const int e_total = model.num_experts;
  std::vector<std::pair<int, int>> expert_range(group_size);  // [lo, hi)
  {
    int lo = 0;
    for (int r = 0; r < group_size; ++r) {
      const int count = e_total / group_size + (r < e_total % group_size ? 1 : 0);
      expert_range[r] = {lo, lo + count};
      lo += count;
    }
  }

  // DEP runs no peer pulls: interference factors are inert.
  InterferenceCtx ctx{&gpu, &interference};

  RunReport rep;
  rep.strategy = "dep";
  rep.num_ranks = group_size;
  rep.num_layers = model.num_layers;
  rep.iterations = iterations;
  rep.warmup_iterations = warmup_iterations;
  rep.iter_start.assign(group_size, std::vector<TimeNs>(iterations, 0));
  rep.iter_end.assign(group_size, std::vector<TimeNs>(iterations, 0));
  rep.iter_tokens.assign(group_size, std::vector<std::int64_t>(iterations, 0));

  auto emit = [&](int r, Category cat, TimeNs start, TimeNs end, int layer,
                  int iter, double bytes = 0, const std::string& detail = "") {
    if (end > start)
      rep.events.push_back({r, Stream::Compute, cat, start, end, layer, iter,
                            bytes, detail});
  };

  std::vector<TimeNs> clock(group_size, 0);
  for (int it = 0; it < iterations; ++it) {
    const RankBatch& batch = batches[it];
    const TimeNs iter_begin = *std::max_element(clock.begin(), clock.end());
    for (int r = 0; r < group_size; ++r) {
      clock[r] = iter_begin;
      rep.iter_start[r][it] = iter_begin;
      rep.iter_tokens[r][it] = batch.tokens[r];
    }
    // Tokens routed to each rank's expert block, summed over source ranks.
    std::vector<double> routed_pairs(group_size, 0);
    for (int src = 0; src < group_size; ++src) {
      for (int r = 0; r < group_size; ++r) {
        for (int e = expert_range[r].first; e < expert_range[r].second; ++e)
          routed_pairs[r] += static_cast<double>(batch.routed[src][e]);
      }
    }

    for (int layer = 0; layer < model.num_layers; ++layer) {
      // Attention block on each rank's own tokens.
      for (int r = 0; r < group_size; ++r) {
        if (batch.tokens[r] == 0) continue;
        const auto entries = attention_entries(
            model, static_cast<double>(batch.tokens[r]),
            static_cast<double>(batch.mean_seq_len(r)));
        for (const auto& op : entries) {
          if (op.flops <= 0 && op.bytes <= 0) continue;
          const TimeNs dur = op_duration_ns(op, ctx, 0.0);
          emit(r, op.category, clock[r], clock[r] + dur, layer, it);
          clock[r] += dur;
        }
      }
      // Barrier + dispatch all-to-all.
      TimeNs bar = *std::max_element(clock.begin(), clock.end());
      for (int r = 0; r < group_size; ++r) {
        emit(r, Category::SyncWait, clock[r], bar, layer, it, 0, "barrier");
        clock[r] = bar;
        const double bytes = all2all_oneway_bytes(model, batch.tokens[r]);
        if (bytes > 0) {
          const TimeNs dur =
              std::max<TimeNs>(1, to_ns(bytes / gpu.link_bw));
          emit(r, Category::Communication, clock[r], clock[r] + dur, layer, it,
               bytes, "dispatch");
          clock[r] += dur;
        }
      }
      // Expert-parallel MoE block.
      for (int r = 0; r < group_size; ++r) {
        const int local =
            expert_range[r].second - expert_range[r].first;
        const auto entries =
            moe_entries(model, static_cast<double>(batch.tokens[r]),
                        routed_pairs[r], local);
        for (const auto& op : entries) {
          if (op.flops <= 0 && op.bytes <= 0) continue;
          const TimeNs dur = op_duration_ns(op, ctx, 0.0);
          emit(r, op.category, clock[r], clock[r] + dur, layer, it);
          clock[r] += dur;
        }
      }
      // Barrier + combine all-to-all.
      bar = *std::max_element(clock.begin(), clock.end());
      for (int r = 0; r < group_size; ++r) {
        emit(r, Category::SyncWait, clock[r], bar, layer, it, 0, "barrier");
        clock[r] = bar;
        const double bytes = all2all_oneway_bytes(model, batch.tokens[r]);
        if (bytes > 0) {
          const TimeNs dur =
              std::max<TimeNs>(1, to_ns(bytes / gpu.link_bw));
          emit(r, Category::Communication, clock[r], clock[r] + dur, layer, it,
               bytes, "combine");
          clock[r] += dur;
        }
      }
    }
    // Iteration boundary: the next batch forms once every rank is done.
    const TimeNs iter_close = *std::max_element(clock.begin(), clock.end());
    for (int r = 0; r < group_size; ++r) {
      emit(r, Category::SyncWait, clock[r], iter_close, model.num_layers - 1,
           it, 0, "barrier");
      clock[r] = iter_close;
      rep.iter_end[r][it] = iter_close;
    }
  }
  rep.validate_streams();
  return rep;
}

// ===========================================================================
// DWDP simulator

namespace {

// Per-rank prefetch transfer list for one layer, in copy-plan order.
std::vector<CeTransfer> prefetch_transfers(const MoeModelSpec& model,
                                           const PlacementPlan& placement,
                                           const DwdpOptions& options,
                                           int rank) {
  const auto& fetches = placement.fetch_lists[rank];
  if (fetches.empty()) return {};
  // Bytes pulled from each peer, split into the 3 projection tensors.
  std::map<int, int> experts_per_peer;
  for (const auto& [expert, src] : fetches) experts_per_peer[src]++;
  const double per_tensor =
      static_cast<double>(model.hidden_dim) *
      static_cast<double>(model.expert_ffn_dim) * model.weight_bytes_per_param;
  std::vector<ShardRef> shards;
  std::uint64_t max_size = 0;
  for (int tensor = 0; tensor < 3; ++tensor) {
    for (const auto& [peer, count] : experts_per_peer) {
      const auto size =
          static_cast<std::uint64_t>(std::llround(per_tensor * count));
      shards.push_back({peer, static_cast<std::uint64_t>(tensor), size, 0});
      max_size = std::max(max_size, size);
    }
  }
  const std::uint64_t slice = options.tdm ? options.slice_size : max_size;
  const CopyPlan plan = build_copy_plan(shards, slice, rank);
  std::vector<CeTransfer> transfers;
  transfers.reserve(plan.slices.size());
  for (const auto& s : plan.slices)
    transfers.push_back({s.src_rank, static_cast<double>(s.length)});
  return transfers;
}

}  // namespace

RunReport simulate_dwdp(const MoeModelSpec& model, const GpuSpec& gpu,
                        const InterferenceParams& interference,
                        const std::vector<RankBatch>& batches,
                        const PlacementPlan& placement,
                        const DwdpOptions& options, int warmup_iterations) {
  model.validate();
  gpu.validate();
  interference.validate();
  options.validate();
  placement.validate();
  require(placement.num_experts == model.num_experts,
          "simulate_dwdp: placement does not cover the model's experts");
  const int num_ranks = placement.group_size;
  validate_batches(batches, num_ranks, model.num_experts);
  const int iterations = static_cast<int>(batches.size());
  require(warmup_iterations >= 0 && warmup_iterations < iterations,
          "simulate_dwdp: warmup must leave at least one steady iteration");

  const int layers = model.num_layers;
  const int total_layers = iterations * layers;
  const double pf_bytes = prefetch_bytes(placement, model);
  InterferenceCtx ctx{&gpu, &interference};

  RunReport rep;
  rep.strategy = "dwdp";
  rep.num_ranks = num_ranks;
  rep.num_layers = layers;
  rep.iterations = iterations;
  rep.warmup_iterations = warmup_iterations;
  rep.iter_start.assign(num_ranks, std::vector<TimeNs>(iterations, 0));
  rep.iter_end.assign(num_ranks, std::vector<TimeNs>(iterations, 0));
  rep.iter_tokens.assign(num_ranks, std::vector<std::int64_t>(iterations, 0));
  for (int r = 0; r < num_ranks; ++r) {
    for (int it = 0; it < iterations; ++it)
      rep.iter_tokens[r][it] = batches[it].tokens[r];
  }

  CopyEngineSim engine(gpu.link_bw, gpu.ce_inflight, options.model_contention);

  // The per-layer transfer list is batch-independent; build once per rank
  // and share it across every plan issue.
  std::vector<CeTransferList> transfers(num_ranks);
  for (int r = 0; r < num_ranks; ++r) {
    transfers[r] = std::make_shared<const std::vector<CeTransfer>>(
        prefetch_transfers(model, placement, options, r));
  }

  enum class Phase { AttnOps, MoeGate, MoeOps, IterDone };
  struct RankState {
    Phase phase = Phase::AttnOps;
    int iter = 0;
    int layer = 0;
    std::size_t op_idx = 0;
    std::vector<OpCost> ops;  // current block's entries
    TimeNs clock = 0;
    bool parked = false;
    // plan handle per global layer; -2 = not issued, -1 = preloaded
    std::vector<int> plan_of_layer;
  };
  std::vector<RankState> ranks(num_ranks);
  for (auto& st : ranks) st.plan_of_layer.assign(total_layers + 1, -2);

  // Global event queue: (time, kind, rank, seq). Engine ticks run before
  // rank steps at the same instant.
  enum Kind { EngineTick = 0, RankStep = 1 };
  struct Item {
    TimeNs time;
    int kind;
    int rank;
    std::uint64_t seq;
    std::uint64_t epoch;  // engine tick validity
    bool operator>(const Item& o) const {
      return std::tie(time, kind, rank, seq) >
             std::tie(o.time, o.kind, o.rank, o.seq);
    }
  };
  std::priority_queue<Item, std::vector<Item>, std::greater<Item>> queue;
  std::uint64_t seq = 0;
  // Ranks parked on a plan completion: plan id -> rank, park time.
  std::map<int, std::pair<int, TimeNs>> waiters;

  auto attn_ops = [&](int r, int it) {
    const auto& b = batches[it];
    if (b.tokens[r] == 0) return std::vector<OpCost>{};
    return attention_entries(model, static_cast<double>(b.tokens[r]),
                             static_cast<double>(b.mean_seq_len(r)));
  };
  auto moe_ops = [&](int r, int it) {
    const auto& b = batches[it];
    if (b.tokens[r] == 0) return std::vector<OpCost>{};
    double own_pairs = 0;
    for (auto c : b.routed[r]) own_pairs += static_cast<double>(c);
    // Data-parallel MoE: the rank runs every expert for its own tokens.
    return moe_entries(model, static_cast<double>(b.tokens[r]), own_pairs,
                       model.num_experts);
  };

  auto schedule_engine = [&]() {
    if (const auto t = engine.next_event_time()) {
      queue.push({*t, EngineTick, 0, seq++, engine.epoch()});
    }
  };
  auto issue_plan = [&](int r, int g, TimeNs now) {
    if (g >= total_layers) return;
    auto& st = ranks[r];
    check_invariant(st.plan_of_layer[g] == -2, "dwdp: plan double issue");
    if (transfers[r].empty()) {
      st.plan_of_layer[g] = -1;  // full replication: nothing to fetch
      return;
    }
    st.plan_of_layer[g] = engine.issue_plan(r, transfers[r], now);
    schedule_engine();
  };

  auto emit = [&](int r, Stream stream, Category cat, TimeNs start, TimeNs end,
                  int g, double bytes = 0, const std::string& detail = "") {
    if (end > start)
      rep.events.push_back({r, stream, cat, start, end, g % layers, g / layers,
                            bytes, detail});
  };

  // Layer-0 weights are staged during a warmup epoch before t = 0.
  for (int r = 0; r < num_ranks; ++r) {
    ranks[r].plan_of_layer[0] = -1;
    ranks[r].ops = attn_ops(r, 0);
    queue.push({0, RankStep, r, seq++, 0});
  }

  // Runs one compute op: emits its event, advances the rank clock and
  // schedules the continuation. Returns false for no-op entries.
  auto run_op = [&](int r, const OpCost& op, int g) {
    auto& st = ranks[r];
    if (op.flops <= 0 && op.bytes <= 0) return false;
    const TimeNs dur = op_duration_ns(op, ctx, engine.comm_rate_at(r));
    emit(r, Stream::Compute, op.category, st.clock, st.clock + dur, g,
         op.category == Category::D2DCopy ? op.bytes : 0);
    st.clock += dur;
    queue.push({st.clock, RankStep, r, seq++, 0});
    return true;
  };

  auto step_rank = [&](int r, TimeNs now) {
    auto& st = ranks[r];
    check_invariant(now >= st.clock, "dwdp: rank time went backwards");
    while (true) {
      const int g = st.iter * layers + st.layer;
      switch (st.phase) {
        case Phase::AttnOps:
          if (st.layer == 0 && st.op_idx == 0)
            rep.iter_start[r][st.iter] = st.clock;
          if (st.op_idx < st.ops.size()) {
            if (run_op(r, st.ops[st.op_idx++], g)) return;
            continue;
          }
          st.phase = Phase::MoeGate;
          continue;
        case Phase::MoeGate: {
          const int plan = st.plan_of_layer[g];
          check_invariant(plan != -2, "dwdp: MoE reached with no prefetch issued");
          if (plan >= 0 && !engine.plan_done(plan)) {
            waiters[plan] = {r, st.clock};
            st.parked = true;
            return;
          }
          if (plan >= 0) {
            // Weight-wait: remote experts arrived after the rank was ready.
            const TimeNs done = engine.plan_complete_time(plan);
            if (done > st.clock) {
              emit(r, Stream::Compute, Category::SyncWait, st.clock, done, g, 0,
                   "weight_wait");
              st.clock = done;
            }
            emit(r, Stream::CopyEngine, Category::P2PCopy,
                 engine.plan_start_time(plan), done, g, engine.plan_bytes(plan));
          }
          // Double buffering: the next layer's buffer is free once this
          // layer's weights are in use.
          issue_plan(r, g + 1, st.clock);
          st.phase = Phase::MoeOps;
          st.op_idx = 0;
          st.ops = moe_ops(r, st.iter);
          if (!options.merge_elim && plan >= 0 && pf_bytes > 0) {
            const OpCost merge{Category::D2DCopy, 0, pf_bytes};
            if (run_op(r, merge, g)) return;
          }
          continue;
        }
        case Phase::MoeOps:
          if (st.op_idx < st.ops.size()) {
            if (run_op(r, st.ops[st.op_idx++], g)) return;
            continue;
          }
          if (st.layer + 1 < layers) {
            st.layer++;
            st.phase = Phase::AttnOps;
            st.op_idx = 0;
            st.ops = attn_ops(r, st.iter);
            continue;
          }
          rep.iter_end[r][st.iter] = st.clock;
          if (st.iter + 1 < iterations) {
            st.iter++;
            st.layer = 0;
            st.phase = Phase::AttnOps;
            st.op_idx = 0;
            st.ops = attn_ops(r, st.iter);
            continue;
          }
          st.phase = Phase::IterDone;
          return;
        case Phase::IterDone:
          return;
      }
    }
  };

  while (!queue.empty()) {
    const Item item = queue.top();
    queue.pop();
    if (item.kind == EngineTick) {
      if (item.epoch != engine.epoch()) continue;  // superseded tick
      for (int plan : engine.advance_to(item.time)) {
        const auto w = waiters.find(plan);
        if (w != waiters.end()) {
          const int rank = w->second.first;
          waiters.erase(w);
          ranks[rank].parked = false;
          queue.push({item.time, RankStep, rank, seq++, 0});
        }
      }
      schedule_engine();
    } else {
      if (ranks[item.rank].parked) continue;
      step_rank(item.rank, item.time);
    }
  }

  for (const auto& st : ranks) {
    check_invariant(st.phase == Phase::IterDone, "dwdp: rank did not finish");
  }
  rep.validate_streams();
  return rep;
}

// ===========================================================================
// Accounting

double BreakdownTable::category_us(Category c) const {
  const auto it = compute_us.find(c);
  if (it != compute_us.end()) return it->second;
  const auto it2 = copy_us.find(c);
  return it2 != copy_us.end() ? it2->second : 0.0;
}

std::string BreakdownTable::to_csv() const {
  std::ostringstream os;
  os << "category,stream,mean_us_per_iteration\n";
  char buf[64];
  auto row = [&](Category c, const char* stream, double us) {
    std::snprintf(buf, sizeof(buf), "%.4f", us);
    os << category_name(c) << "," << stream << "," << buf << "\n";
  };
  for (const auto& [c, us] : compute_us) row(c, "compute", us);
  for (const auto& [c, us] : copy_us) row(c, "copy_engine", us);
  std::snprintf(buf, sizeof(buf), "%.4f", iteration_latency_us);
  os << "IterationLatency,," << buf << "\n";
  return os.str();
}

BreakdownTable breakdown(const RunReport& report) {
  BreakdownTable table;
  const int steady = report.steady_iterations();
  check_invariant(steady > 0, "breakdown: no steady iterations");
  const double norm = static_cast<double>(report.num_ranks) * steady;
  bool weight_wait = false;
  for (const auto& e : report.events) {
    if (e.iteration < report.warmup_iterations) continue;
    const double us = static_cast<double>(e.end - e.start) / 1e3;
    if (e.stream == Stream::Compute) {
      table.compute_us[e.category] += us / norm;
      if (e.category == Category::SyncWait && e.detail == "weight_wait" &&
          e.end > e.start)
        weight_wait = true;
    } else {
      table.copy_us[e.category] += us / norm;
    }
  }
  table.iteration_latency_us = report.mean_latency_us();
  const bool has_p2p = table.copy_us.count(Category::P2PCopy) > 0;
  table.p2p_fully_overlapped = has_p2p && !weight_wait;
  return table;
}

namespace {

double round2(double pct) { return std::round(pct * 100.0) / 100.0; }

}  // namespace

ComparisonTable compare_reports(const BreakdownTable& a,
                                const BreakdownTable& b) {
  require(a.iteration_latency_us > 0,
          "compare_reports: zero baseline iteration latency");
  ComparisonTable out;
  out.a_latency_us = a.iteration_latency_us;
  out.b_latency_us = b.iteration_latency_us;
  out.overall_frac =
      (a.iteration_latency_us - b.iteration_latency_us) / a.iteration_latency_us;
  for (Category c :
       {Category::Attention, Category::GroupedGemm, Category::DenseGemm,
        Category::Others, Category::Communication, Category::D2DCopy,
        Category::P2PCopy, Category::SyncWait}) {
    ComparisonRow row;
    row.category = c;
    row.a_us = a.category_us(c);
    row.b_us = b.category_us(c);
    if (c != Category::P2PCopy) {
      row.delta_frac = (row.a_us - row.b_us) / a.iteration_latency_us;
    }
    out.rows.push_back(row);
  }
  double comm_pct = 0, sync_pct = 0;
  for (const auto& row : out.rows) {
    if (!row.delta_frac) continue;
    if (row.category == Category::Communication)
      comm_pct = round2(*row.delta_frac * 100.0);
    if (row.category == Category::SyncWait)
      sync_pct = round2(*row.delta_frac * 100.0);
  }
  out.gross_sync_comm_pct = comm_pct + sync_pct;
  return out;
}

ComparisonTable compare_reports(const RunReport& a, const RunReport& b) {
  return compare_reports(breakdown(a), breakdown(b));
}

std::string ComparisonTable::to_csv() const {
  std::ostringstream os;
  os << "category,a_us,b_us,delta_pct_of_a\n";
  char buf[96];
  for (const auto& row : rows) {
    if (row.delta_frac) {
      std::snprintf(buf, sizeof(buf), "%s,%.2f,%.2f,%.2f",
                    category_name(row.category), row.a_us, row.b_us,
                    *row.delta_frac * 100.0);
    } else {
      std::snprintf(buf, sizeof(buf), "%s,%.2f,%.2f,--",
                    category_name(row.category), row.a_us, row.b_us);
    }
    os << buf << "\n";
  }
  std::snprintf(buf, sizeof(buf), "IterationLatency,%.2f,%.2f,%.2f",
                a_latency_us, b_latency_us, overall_frac * 100.0);
  os << buf << "\n";
  std::snprintf(buf, sizeof(buf), "GrossSyncComm,,,%.2f", gross_sync_comm_pct);
  os << buf << "\n";
  return os.str();
}

// ===========================================================================
// Analytic comparison

AnalyticResult analytic_compare(const MoeModelSpec& model, const GpuSpec& gpu,
                                const PlacementPlan& placement,
                                std::int64_t tokens,
                                std::int64_t mean_seq_len) {
  model.validate();
  gpu.validate();
  require(placement.num_experts == model.num_experts,
          "analytic_compare: placement does not match the model");
  const LayerWork work = layer_costs(model, tokens, mean_seq_len);
  AnalyticResult res;
  res.t_compute_s = work.total_time(gpu);
  res.t_prefetch_s = prefetch_bytes(placement, model) / gpu.link_bw;
  res.t_all2all_s = 2.0 * all2all_oneway_bytes(model, tokens) / gpu.link_bw;
  const double t_dep = res.t_compute_s + res.t_all2all_s;
  if (res.t_prefetch_s <= 0) {
    res.prefetch_saturated = true;
    res.compute_prefetch_ratio = std::numeric_limits<double>::infinity();
    res.dep_dwdp_speedup = t_dep / res.t_compute_s;
  } else {
    res.compute_prefetch_ratio = res.t_compute_s / res.t_prefetch_s;
    res.dep_dwdp_speedup = t_dep / std::max(res.t_compute_s, res.t_prefetch_s);
  }
  return res;
}

}  // namespace dwdpsim
