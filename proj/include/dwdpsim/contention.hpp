// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <map>

#include "dwdpsim/errors.hpp"

namespace dwdpsim {

// Distribution of the contention level C: the number of pulls that
// concurrently target one source, including the tagged pull. Support is
// {1 .. N-1}; under the random asynchronous model C-1 ~ Binomial(N-2, 1/(N-1)).
struct ContentionPmf {
  int group_size = 0;
  bool degenerate = false;  // N == 2: C is identically 1
  std::map<int, double> probs;

  double mean() const;
  // Pr[C >= c].
  double tail(int c) const;
};

// Ideal service time of one pull when a rank issues N-1 serial pulls
// over a total communication window T.
double ideal_pull_time(double total_comm_time, int group_size);

// Closed-form contention PMF for a DWDP group of size N.
ContentionPmf contention_pmf(int group_size);

// Independent Monte Carlo estimate of the same PMF: per round, the tagged
// rank picks a source uniformly over its N-1 peers and each of the other
// N-2 ranks collides with probability 1/(N-1). Deterministic per seed.
ContentionPmf contention_mc(int group_size, std::int64_t rounds,
                            std::uint64_t seed);

// Fully serialized equal-size approximation of the expected pull latency,
// E[C] * tau. A pessimistic analytic bound only: real latency depends on
// pipelining and system effects the event simulator models instead.
double serialized_latency_bound(const ContentionPmf& pmf, double tau);

}  // namespace dwdpsim
