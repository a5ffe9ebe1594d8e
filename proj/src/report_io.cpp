// SPDX-License-Identifier: Apache-2.0
#include <json.hpp>

#include "dwdpsim/simcore.hpp"

namespace dwdpsim {

using nlohmann::json;

std::string report_to_json(const RunReport& report,
                           const std::string& config_hash) {
  json j;
  j["config_hash"] = config_hash;
  j["strategy"] = report.strategy;
  j["num_ranks"] = report.num_ranks;
  j["num_layers"] = report.num_layers;
  j["iterations"] = report.iterations;
  j["warmup_iterations"] = report.warmup_iterations;
  json per_rank = json::array();
  for (int r = 0; r < report.num_ranks; ++r) {
    json rank;
    rank["rank"] = r;
    rank["mean_iteration_latency_us"] = report.mean_latency_us(r);
    json iters = json::array();
    for (int it = 0; it < report.iterations; ++it) {
      iters.push_back({
          {"iteration", it},
          {"start_ns", report.iter_start[r][it]},
          {"end_ns", report.iter_end[r][it]},
          {"tokens", report.iter_tokens[r][it]},
      });
    }
    rank["iterations"] = std::move(iters);
    per_rank.push_back(std::move(rank));
  }
  j["per_rank"] = std::move(per_rank);
  j["mean_iteration_latency_us"] = report.mean_latency_us();
  j["throughput_tokens_per_s"] = report.throughput_tokens_per_s();
  json events = json::array();
  for (const auto& e : report.events) {
    json ev{
        {"rank", e.rank},
        {"stream", e.stream == Stream::Compute ? "compute" : "copy_engine"},
        {"category", category_name(e.category)},
        {"start_ns", e.start},
        {"end_ns", e.end},
        {"layer", e.layer},
        {"iteration", e.iteration},
    };
    if (e.bytes > 0) ev["bytes"] = e.bytes;
    if (!e.detail.empty()) ev["detail"] = e.detail;
    events.push_back(std::move(ev));
  }
  j["events"] = std::move(events);
  return j.dump(2) + "\n";
}

std::string report_to_chrome_trace(const RunReport& report) {
  json arr = json::array();
  for (const auto& e : report.events) {
    std::string name = category_name(e.category);
    if (!e.detail.empty()) name += ":" + e.detail;
    name += " L" + std::to_string(e.layer);
    arr.push_back({
        {"name", name},
        {"cat", category_name(e.category)},
        {"ph", "X"},
        {"ts", static_cast<double>(e.start) / 1e3},
        {"dur", static_cast<double>(e.end - e.start) / 1e3},
        {"pid", e.rank},
        {"tid", e.stream == Stream::Compute ? 0 : 1},
        {"args", {{"iteration", e.iteration}, {"bytes", e.bytes}}},
    });
  }
  return arr.dump() + "\n";
}

}  // namespace dwdpsim
