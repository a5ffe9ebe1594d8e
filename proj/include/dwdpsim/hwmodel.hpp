// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <map>
#include <string>

#include "dwdpsim/errors.hpp"

namespace dwdpsim {

// Timeline/kernel categories. The first five run on the compute stream,
// the copy categories on dedicated engines.
enum class Category {
  Attention,
  GroupedGemm,
  DenseGemm,
  Others,
  Communication,
  D2DCopy,
  P2PCopy,
  SyncWait,
};

const char* category_name(Category c);
Category category_from_name(const std::string& name);

// Hardware envelope of one GPU.
struct GpuSpec {
  double peak_flops = 5e15;      // FLOP/s at weight precision
  double mem_bw = 8e12;          // bytes/s HBM
  double link_bw = 1.8e12;       // bytes/s usable by one rank's peer pulls
  int ce_inflight = 2;           // copy-engine pipelining depth (slices in flight)
  double tdp = 1.0;              // power cap; 1.0 = normalized
  double idle_power_frac = 0.129;  // idle draw as fraction of tdp

  void validate() const;
};

// Knobs for the two communication-computation interference mechanisms:
// DRAM bandwidth stolen by peer traffic, and DVFS frequency throttling
// when overlapped power exceeds the cap.
struct InterferenceParams {
  bool mem_interference_on = true;
  bool power_interference_on = true;
  // Per-category compute power draw (fraction of tdp, idle included).
  std::map<Category, double> compute_power_frac = {
      {Category::Attention, 0.967},  {Category::GroupedGemm, 0.85},
      {Category::DenseGemm, 0.85},   {Category::Others, 0.85},
      {Category::D2DCopy, 0.85},
  };
  // Two-sided communication power draw (fraction of tdp, idle included).
  double comm_power_frac = 0.305;
  // Frequency response exponent; the default maps 1.144x overdraw to
  // a 0.798 normalized frequency.
  double throttle_exponent = default_throttle_exponent();

  static double default_throttle_exponent();

  void validate() const;
};

// max(F/P, B/BW). Rejects negative inputs and the all-zero operator.
double roofline_time(double flops, double bytes, const GpuSpec& gpu);

// Multiplicative slowdown of memory-bound work overlapping peer traffic
// at `comm_rate` bytes/s: 1 + min(comm_rate, link_bw)/mem_bw.
double mem_slowdown_factor(double comm_rate, const GpuSpec& gpu);

// Normalized frequency under a total draw of `active_power_frac` of tdp:
// 1 below the cap, (1/x)^gamma above it. Compute durations divide by this.
double power_throttle_factor(double active_power_frac,
                             const InterferenceParams& params);

// Estimated total draw when `category` compute overlaps two-sided
// communication; the idle baseline is counted once.
double overlap_power(Category category, const InterferenceParams& params,
                     const GpuSpec& gpu);

}  // namespace dwdpsim
