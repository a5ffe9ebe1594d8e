// SPDX-License-Identifier: Apache-2.0
#include "dwdpsim/contention.hpp"

#include <cmath>
#include <vector>

#include "dwdpsim/rng.hpp"

namespace dwdpsim {

double ContentionPmf::mean() const {
  double m = 0;
  for (const auto& [c, p] : probs) m += c * p;
  return m;
}

double ContentionPmf::tail(int c) const {
  double t = 0;
  for (const auto& [k, p] : probs) {
    if (k >= c) t += p;
  }
  return t;
}

double ideal_pull_time(double total_comm_time, int group_size) {
  require(group_size >= 2, "ideal_pull_time: group_size must be >= 2");
  require(total_comm_time > 0, "ideal_pull_time: total time must be > 0");
  return total_comm_time / static_cast<double>(group_size - 1);
}

namespace {

// Binomial pmf via log-gamma, stable for n up to the largest group sizes.
double binom_pmf(int n, double p, int k) {
  if (k < 0 || k > n) return 0.0;
  if (p == 0.0) return k == 0 ? 1.0 : 0.0;
  const double logc = std::lgamma(n + 1.0) - std::lgamma(k + 1.0) -
                      std::lgamma(n - k + 1.0);
  return std::exp(logc + k * std::log(p) + (n - k) * std::log1p(-p));
}

}  // namespace

ContentionPmf contention_pmf(int group_size) {
  require(group_size >= 2, "contention_pmf: group_size must be >= 2");
  ContentionPmf pmf;
  pmf.group_size = group_size;
  if (group_size == 2) {
    pmf.degenerate = true;
    pmf.probs[1] = 1.0;
    return pmf;
  }
  const int n = group_size - 2;
  const double p = 1.0 / static_cast<double>(group_size - 1);
  for (int c = 1; c <= group_size - 1; ++c) {
    pmf.probs[c] = binom_pmf(n, p, c - 1);
  }
  return pmf;
}

ContentionPmf contention_mc(int group_size, std::int64_t rounds,
                            std::uint64_t seed) {
  require(group_size >= 2, "contention_mc: group_size must be >= 2");
  require(rounds >= 1, "contention_mc: rounds must be >= 1");
  ContentionPmf pmf;
  pmf.group_size = group_size;
  pmf.degenerate = group_size == 2;

  Rng rng(seed);
  const double p = 1.0 / static_cast<double>(group_size - 1);
  std::vector<std::int64_t> hits(group_size, 0);
  for (std::int64_t r = 0; r < rounds; ++r) {
    // The tagged rank's source choice only fixes which peer the others may
    // collide with; drawing it keeps the experiment faithful to the model.
    (void)rng.uniform_below(static_cast<std::uint64_t>(group_size - 1));
    int competing = 0;
    for (int other = 0; other < group_size - 2; ++other) {
      if (rng.bernoulli(p)) ++competing;
    }
    hits[1 + competing]++;
  }
  for (int c = 1; c <= group_size - 1; ++c) {
    pmf.probs[c] = static_cast<double>(hits[c]) / static_cast<double>(rounds);
  }
  if (group_size == 2) pmf.probs = {{1, 1.0}};
  return pmf;
}

double serialized_latency_bound(const ContentionPmf& pmf, double tau) {
  require(tau >= 0, "serialized_latency_bound: negative tau");
  return pmf.mean() * tau;
}

}  // namespace dwdpsim
