// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "dwdpsim/modelspec.hpp"
#include "dwdpsim/rng.hpp"

namespace dwdpsim {

// Input-sequence-length distribution families.
struct IslDist {
  enum class Kind { Fixed, UniformRatio, Normal };
  Kind kind = Kind::Fixed;
  // Fixed: length; UniformRatio: max length; Normal: mean.
  double length = 8192;
  double ratio = 1.0;   // UniformRatio: lengths in [ratio*length, length]
  double stddev = 0.0;  // Normal

  void validate() const;
  // Population CV of request lengths implied by the parameters.
  double cv() const;

  static IslDist fixed(double length);
  static IslDist uniform_ratio(double max_length, double ratio);
  static IslDist normal(double mean, double stddev);
  // Family with the given mean whose request-length CV equals `cv`
  // (normal for cv > 0, fixed for cv == 0).
  static IslDist from_cv(double mean, double cv);
};

struct WorkloadSpec {
  IslDist isl_dist;
  std::int64_t max_num_tokens = 32768;  // MNT: per-rank forward-pass budget
  int batch_per_rank = 1;               // requests drawn per rank per iteration
  double routing_skew = 0.0;            // Zipf exponent; 0 = balanced routing
  std::uint64_t seed = 1;

  void validate() const;
};

// Work assigned to the ranks for one iteration.
struct RankBatch {
  // tokens[r] = context tokens rank r processes this iteration.
  std::vector<std::int64_t> tokens;
  // requests[r] = number of requests packed into rank r's batch.
  std::vector<std::int64_t> requests;
  // routed[r][e] = (token, expert) assignments of rank r's tokens to
  // expert e; rows sum to tokens[r] * top_k.
  std::vector<std::vector<std::int64_t>> routed;

  std::int64_t mean_seq_len(int rank) const;
};

// (token, expert) assignment counts for one rank's tokens. skew == 0
// splits tokens*top_k exactly evenly over the experts (remainder spread
// round-robin) as the balanced baseline; skew > 0 samples a multinomial
// with Zipf(skew) expert popularity. Deterministic per seed.
std::vector<std::int64_t> route_tokens(std::int64_t tokens,
                                       const MoeModelSpec& model,
                                       double routing_skew,
                                       std::uint64_t seed);

// Draw `iterations` batches for `num_ranks` ranks. Each rank consumes an
// independent substream: per iteration it draws batch_per_rank request
// lengths, then packs pending requests greedily up to max_num_tokens;
// overflow carries into the next iteration.
std::vector<RankBatch> sample_batches(const WorkloadSpec& spec,
                                      const MoeModelSpec& model, int num_ranks,
                                      int iterations);

// Population coefficient of variation of per-rank token counts.
double imbalance_cv(const RankBatch& batch);

// CSV round-trip for exact workload replay across strategies.
std::string batches_to_csv(const std::vector<RankBatch>& batches);
std::vector<RankBatch> batches_from_csv(const std::string& csv);

}  // namespace dwdpsim
