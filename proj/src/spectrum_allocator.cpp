#include "cpsl/spectrum_allocator.hpp"

#include <algorithm>
#include <limits>

#include <fmt/format.h>

#include "cpsl/errors.hpp"

namespace cpsl {

namespace {

void sort_by_id(std::vector<DeviceState>& cluster) {
  std::sort(cluster.begin(), cluster.end(),
            [](const DeviceState& a, const DeviceState& b) { return a.id < b.id; });
}

void check_feasible(const std::vector<DeviceState>& cluster, const EnvSpec& env) {
  if (cluster.empty()) throw ValidationError("cannot allocate an empty cluster");
  if (static_cast<int>(cluster.size()) > env.subcarriers) {
    throw InfeasibleError(fmt::format("cluster of {} devices exceeds {} subcarriers",
                                      cluster.size(), env.subcarriers));
  }
}

AllocationResult pack(const std::vector<DeviceState>& cluster, std::vector<int> x,
                      double latency) {
  AllocationResult r;
  for (const auto& d : cluster) r.allocation.device_ids.push_back(d.id);
  r.allocation.subcarriers = std::move(x);
  r.latency = latency;
  return r;
}

}  // namespace

std::vector<int> greedy_counts(const ClusterEvaluator& eval, int subcarriers) {
  const int k = eval.size();
  if (k > subcarriers) {
    throw InfeasibleError(
        fmt::format("cluster of {} devices exceeds {} subcarriers", k, subcarriers));
  }
  std::vector<int> x(k, 1);
  int rr = 0;
  for (int round = 0; round < subcarriers - k; ++round) {
    const double base = eval.total(x);
    int best = -1;
    double best_gain = 0.0;
    for (int i = 0; i < k; ++i) {
      ++x[i];
      const double gain = base - eval.total(x);
      --x[i];
      if (gain > best_gain) {
        best_gain = gain;
        best = i;
      }
    }
    if (best < 0) {
      best = rr;
      rr = (rr + 1) % k;
    }
    ++x[best];
  }
  return x;
}

AllocationResult allocate_greedy(std::vector<DeviceState> cluster, const CutProfile& profile,
                                 const EnvSpec& env) {
  check_feasible(cluster, env);
  sort_by_id(cluster);
  ClusterEvaluator eval(cluster, profile, env);
  auto x = greedy_counts(eval, env.subcarriers);
  const double d = eval.total(x);
  return pack(cluster, std::move(x), d);
}

std::uint64_t composition_count(int c, int k) {
  if (k < 0 || c < 0 || k > c) return 0;
  k = std::min(k, c - k);
  // binom(c, k) built incrementally; each partial product is itself a binomial.
  unsigned __int128 r = 1;
  for (int i = 1; i <= k; ++i) {
    r = r * static_cast<unsigned>(c - k + i) / static_cast<unsigned>(i);
    if (r > std::numeric_limits<std::uint64_t>::max()) {
      return std::numeric_limits<std::uint64_t>::max();
    }
  }
  return static_cast<std::uint64_t>(r);
}

AllocationResult allocate_exhaustive(std::vector<DeviceState> cluster, const CutProfile& profile,
                                     const EnvSpec& env, std::uint64_t guard) {
  check_feasible(cluster, env);
  sort_by_id(cluster);
  const int k = static_cast<int>(cluster.size());
  const int c = env.subcarriers;
  const auto count = composition_count(c, k);
  if (count > guard) {
    throw GuardError(fmt::format(
        "exhaustive allocation would enumerate {} compositions (guard {})", count, guard));
  }
  ClusterEvaluator eval(cluster, profile, env);
  std::vector<int> x(k, 1);
  std::vector<int> best_x = x;
  double best = std::numeric_limits<double>::infinity();
  int used = k;
  // Odometer over x in lexicographic order, last coordinate fastest.
  while (true) {
    const double d = eval.total(x);
    if (d < best) {
      best = d;
      best_x = x;
    }
    int i = k - 1;
    while (i >= 0) {
      if (used < c) {
        ++x[i];
        ++used;
        break;
      }
      used -= x[i] - 1;
      x[i] = 1;
      --i;
    }
    if (i < 0) break;
  }
  return pack(cluster, std::move(best_x), best);
}

}  // namespace cpsl
