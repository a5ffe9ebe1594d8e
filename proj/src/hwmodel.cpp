// SPDX-License-Identifier: Apache-2.0
#include "dwdpsim/hwmodel.hpp"

#include <algorithm>
#include <cmath>

namespace dwdpsim {

const char* category_name(Category c) {
  switch (c) {
    case Category::Attention:
      return "Attention";
    case Category::GroupedGemm:
      return "GroupedGEMM";
    case Category::DenseGemm:
      return "DenseGEMM";
    case Category::Others:
      return "Others";
    case Category::Communication:
      return "Communication";
    case Category::D2DCopy:
      return "D2DCopy";
    case Category::P2PCopy:
      return "P2PCopy";
    case Category::SyncWait:
      return "SyncWait";
  }
  return "?";
}

Category category_from_name(const std::string& name) {
  for (Category c :
       {Category::Attention, Category::GroupedGemm, Category::DenseGemm,
        Category::Others, Category::Communication, Category::D2DCopy,
        Category::P2PCopy, Category::SyncWait}) {
    if (name == category_name(c)) return c;
  }
  throw ConfigError("unknown category name: " + name);
}

void GpuSpec::validate() const {
  require(peak_flops > 0, "gpu.peak_flops must be > 0");
  require(mem_bw > 0, "gpu.mem_bw must be > 0");
  require(link_bw > 0, "gpu.link_bw must be > 0");
  require(ce_inflight >= 1, "gpu.ce_inflight must be >= 1");
  require(tdp > 0, "gpu.tdp must be > 0");
  require(idle_power_frac >= 0 && idle_power_frac < 1,
          "gpu.idle_power_frac must be in [0, 1)");
}

double InterferenceParams::default_throttle_exponent() {
  // Calibrated so a 1.144x overdraw yields a 0.798 normalized frequency.
  static const double gamma = std::log(0.798) / std::log(1.0 / 1.144);
  return gamma;
}

void InterferenceParams::validate() const {
  for (const auto& [cat, frac] : compute_power_frac) {
    require(frac >= 0 && frac <= 2,
            std::string("interference.compute_power_frac[") +
                category_name(cat) + "] must be in [0, 2]");
  }
  require(comm_power_frac >= 0 && comm_power_frac <= 2,
          "interference.comm_power_frac must be in [0, 2]");
  require(throttle_exponent > 0, "interference.throttle_exponent must be > 0");
}

double roofline_time(double flops, double bytes, const GpuSpec& gpu) {
  require(flops >= 0, "roofline_time: negative flops");
  require(bytes >= 0, "roofline_time: negative bytes");
  require(flops > 0 || bytes > 0, "roofline_time: operator has no work");
  return std::max(flops / gpu.peak_flops, bytes / gpu.mem_bw);
}

double mem_slowdown_factor(double comm_rate, const GpuSpec& gpu) {
  require(comm_rate >= 0, "mem_slowdown_factor: negative comm_rate");
  return 1.0 + std::min(comm_rate, gpu.link_bw) / gpu.mem_bw;
}

double power_throttle_factor(double active_power_frac,
                             const InterferenceParams& params) {
  require(active_power_frac >= 0, "power_throttle_factor: negative power");
  if (active_power_frac <= 1.0) return 1.0;
  return std::pow(1.0 / active_power_frac, params.throttle_exponent);
}

double overlap_power(Category category, const InterferenceParams& params,
                     const GpuSpec& gpu) {
  const auto it = params.compute_power_frac.find(category);
  if (it == params.compute_power_frac.end()) {
    throw ConfigError(std::string("overlap_power: no power figure for category ") +
                      category_name(category));
  }
  return it->second + params.comm_power_frac - gpu.idle_power_frac;
}

}  // namespace dwdpsim
