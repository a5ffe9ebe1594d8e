// SPDX-License-Identifier: Apache-2.0
#include "dwdpsim/workload.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <sstream>

namespace dwdpsim {

void IslDist::validate() const {
  require(length >= 1, "workload.isl: length/mean must be >= 1");
  switch (kind) {
    case Kind::Fixed:
      break;
    case Kind::UniformRatio:
      require(ratio > 0 && ratio <= 1, "workload.isl: ratio must be in (0, 1]");
      break;
    case Kind::Normal:
      require(stddev >= 0, "workload.isl: stddev must be >= 0");
      break;
  }
}

double IslDist::cv() const {
  switch (kind) {
    case Kind::Fixed:
      return 0.0;
    case Kind::UniformRatio:
      // Uniform on [r*L, L]: std/mean = (1-r) / ((1+r) * sqrt(3)).
      return (1.0 - ratio) / ((1.0 + ratio) * std::sqrt(3.0));
    case Kind::Normal:
      return stddev / length;
  }
  return 0.0;
}

IslDist IslDist::fixed(double length) {
  IslDist d;
  d.kind = Kind::Fixed;
  d.length = length;
  return d;
}

IslDist IslDist::uniform_ratio(double max_length, double ratio) {
  IslDist d;
  d.kind = Kind::UniformRatio;
  d.length = max_length;
  d.ratio = ratio;
  return d;
}

IslDist IslDist::normal(double mean, double stddev) {
  IslDist d;
  d.kind = Kind::Normal;
  d.length = mean;
  d.stddev = stddev;
  return d;
}

IslDist IslDist::from_cv(double mean, double cv) {
  require(cv >= 0, "workload.isl: cv must be >= 0");
  if (cv == 0.0) return fixed(mean);
  return normal(mean, cv * mean);
}

void WorkloadSpec::validate() const {
  isl_dist.validate();
  require(batch_per_rank >= 1, "workload.batch_per_rank must be >= 1");
  require(routing_skew >= 0, "workload.routing_skew must be >= 0");
  // The largest request the family can produce must fit the token budget.
  double max_isl = isl_dist.length;
  if (isl_dist.kind == IslDist::Kind::Normal) {
    max_isl = isl_dist.length;  // draws are clamped to [1, MNT] while packing
  }
  require(max_num_tokens >= static_cast<std::int64_t>(max_isl),
          "workload.max_num_tokens smaller than the smallest request");
}

std::int64_t RankBatch::mean_seq_len(int rank) const {
  if (requests[rank] <= 0) return tokens[rank];
  return std::max<std::int64_t>(1, tokens[rank] / requests[rank]);
}

std::vector<std::int64_t> route_tokens(std::int64_t tokens,
                                       const MoeModelSpec& model,
                                       double routing_skew,
                                       std::uint64_t seed) {
  model.validate();
  require(tokens >= 0, "route_tokens: negative tokens");
  const int e = model.num_experts;
  std::vector<std::int64_t> counts(e, 0);
  const std::int64_t assignments = tokens * model.top_k;
  if (assignments == 0) return counts;

  if (routing_skew == 0.0) {
    // Balanced baseline: exact equal split, remainder round-robin.
    const std::int64_t each = assignments / e;
    const std::int64_t rem = assignments % e;
    for (int i = 0; i < e; ++i) counts[i] = each + (i < rem ? 1 : 0);
    return counts;
  }

  std::vector<double> weights(e);
  for (int i = 0; i < e; ++i)
    weights[i] = std::pow(static_cast<double>(i + 1), -routing_skew);
  AliasTable table(weights);
  Rng rng(seed);
  for (std::int64_t a = 0; a < assignments; ++a) counts[table.sample(rng)]++;
  return counts;
}

namespace {

std::int64_t draw_length(const IslDist& dist, Rng& rng,
                         std::int64_t max_tokens) {
  double raw = dist.length;
  switch (dist.kind) {
    case IslDist::Kind::Fixed:
      break;
    case IslDist::Kind::UniformRatio:
      raw = rng.uniform(dist.ratio * dist.length, dist.length);
      break;
    case IslDist::Kind::Normal:
      // Clamped rather than resampled so the draw count per request is
      // fixed; the clamp is inert for the supported parameter regimes.
      raw = rng.normal(dist.length, dist.stddev);
      break;
  }
  const double clamped =
      std::min(std::max(raw, 1.0), static_cast<double>(max_tokens));
  return static_cast<std::int64_t>(std::llround(clamped));
}

}  // namespace

std::vector<RankBatch> sample_batches(const WorkloadSpec& spec,
                                      const MoeModelSpec& model, int num_ranks,
                                      int iterations) {
  spec.validate();
  model.validate();
  require(num_ranks >= 1, "sample_batches: num_ranks must be >= 1");
  require(iterations >= 1, "sample_batches: iterations must be >= 1");

  std::vector<RankBatch> out(iterations);
  for (auto& b : out) {
    b.tokens.assign(num_ranks, 0);
    b.requests.assign(num_ranks, 0);
    b.routed.assign(num_ranks, {});
  }
  for (int r = 0; r < num_ranks; ++r) {
    Rng rng = Rng::forked(spec.seed, 0x10000u + static_cast<std::uint64_t>(r));
    std::deque<std::int64_t> pending;
    for (int it = 0; it < iterations; ++it) {
      for (int q = 0; q < spec.batch_per_rank; ++q)
        pending.push_back(draw_length(spec.isl_dist, rng, spec.max_num_tokens));
      std::int64_t used = 0, reqs = 0;
      while (!pending.empty() && used + pending.front() <= spec.max_num_tokens) {
        used += pending.front();
        pending.pop_front();
        ++reqs;
      }
      out[it].tokens[r] = used;
      out[it].requests[r] = reqs;
      const std::uint64_t route_seed = Rng::mix(
          Rng::mix(spec.seed, 0x20000u + static_cast<std::uint64_t>(r)),
          static_cast<std::uint64_t>(it));
      out[it].routed[r] =
          route_tokens(used, model, spec.routing_skew, route_seed);
    }
  }
  return out;
}

double imbalance_cv(const RankBatch& batch) {
  const std::size_t n = batch.tokens.size();
  require(n >= 2, "imbalance_cv: need at least 2 ranks");
  double mean = 0;
  for (auto t : batch.tokens) mean += static_cast<double>(t);
  mean /= static_cast<double>(n);
  require(mean != 0, "imbalance_cv: zero mean token count");
  double var = 0;
  for (auto t : batch.tokens) {
    const double d = static_cast<double>(t) - mean;
    var += d * d;
  }
  var /= static_cast<double>(n);
  return std::sqrt(var) / mean;
}

std::string batches_to_csv(const std::vector<RankBatch>& batches) {
  std::ostringstream os;
  os << "iteration,rank,tokens,requests,expert_counts\n";
  for (std::size_t it = 0; it < batches.size(); ++it) {
    const auto& b = batches[it];
    for (std::size_t r = 0; r < b.tokens.size(); ++r) {
      os << it << "," << r << "," << b.tokens[r] << "," << b.requests[r] << ",";
      for (std::size_t e = 0; e < b.routed[r].size(); ++e) {
        if (e) os << ";";
        os << b.routed[r][e];
      }
      os << "\n";
    }
  }
  return os.str();
}

std::vector<RankBatch> batches_from_csv(const std::string& csv) {
  std::istringstream is(csv);
  std::string line;
  require(static_cast<bool>(std::getline(is, line)), "batches csv: empty file");
  require(line == "iteration,rank,tokens,requests,expert_counts",
          "batches csv: unexpected header");
  std::vector<RankBatch> out;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    std::istringstream ls(line);
    std::string field;
    auto next = [&](const char* what) {
      require(static_cast<bool>(std::getline(ls, field, ',')),
              std::string("batches csv: missing field ") + what);
      return field;
    };
    const std::size_t it = std::stoull(next("iteration"));
    const std::size_t rank = std::stoull(next("rank"));
    const std::int64_t tokens = std::stoll(next("tokens"));
    const std::int64_t requests = std::stoll(next("requests"));
    std::vector<std::int64_t> routed;
    if (std::getline(ls, field)) {
      std::istringstream es(field);
      std::string c;
      while (std::getline(es, c, ';')) routed.push_back(std::stoll(c));
    }
    if (out.size() <= it) out.resize(it + 1);
    auto& b = out[it];
    if (b.tokens.size() <= rank) {
      b.tokens.resize(rank + 1, 0);
      b.requests.resize(rank + 1, 0);
      b.routed.resize(rank + 1);
    }
    b.tokens[rank] = tokens;
    b.requests[rank] = requests;
    b.routed[rank] = std::move(routed);
  }
  require(!out.empty(), "batches csv: no rows");
  return out;
}

}  // namespace dwdpsim
