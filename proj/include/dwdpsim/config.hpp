// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <optional>
#include <string>
#include <vector>

#include "dwdpsim/hwmodel.hpp"
#include "dwdpsim/modelspec.hpp"
#include "dwdpsim/simcore.hpp"
#include "dwdpsim/workload.hpp"

namespace dwdpsim {

struct StrategySpec {
  enum class Kind { Dep, Dwdp };
  Kind kind = Kind::Dwdp;
  int group_size = 4;
  int extra_redundancy = 0;  // dwdp only
  DwdpOptions dwdp;
};

struct SweepSpec {
  enum class Axis { Isl, Mnt, Cv, GroupSize, SliceSize };
  Axis axis = Axis::Isl;
  std::vector<double> values;
};

struct ExperimentConfig {
  GpuSpec gpu;
  InterferenceParams interference;
  MoeModelSpec model;
  WorkloadSpec workload;
  StrategySpec strategy;
  std::optional<SweepSpec> sweep;
  int iterations = 8;
  int warmup_iterations = 2;
  std::string output_dir = "out";

  void validate() const;
  // Copy with one sweep-axis value applied.
  ExperimentConfig with_axis_value(SweepSpec::Axis axis, double value) const;
};

// Bundled GB200-like hardware profile (memory and link bandwidth per the
// published NVL72 figures; the rest calibrated).
GpuSpec gb200_gpu_profile();
// Bundled DeepSeek-R1-like model profile. Dimensions follow the public
// architecture; per-category scalars are calibration values fitted once
// against the reference roofline curve.
MoeModelSpec r1_like_model_profile();
// Full default experiment around the two profiles.
ExperimentConfig default_config();

// JSON (de)serialization. Parsing starts from default_config(): absent
// sections keep their defaults, unknown keys are rejected.
ExperimentConfig config_from_json(const std::string& text);
std::string config_to_json(const ExperimentConfig& config);

// FNV-1a hash of the canonical JSON form, for output provenance.
std::string config_hash(const ExperimentConfig& config);

const char* axis_name(SweepSpec::Axis axis);
SweepSpec::Axis axis_from_name(const std::string& name);

}  // namespace dwdpsim
