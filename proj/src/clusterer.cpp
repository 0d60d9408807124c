#include "cpsl/clusterer.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <iterator>
#include <iostream>
#include <limits>
#include <map>
#include <numeric>

#include <fmt/format.h>

#include "cpsl/errors.hpp"
#include "cpsl/spectrum_allocator.hpp"

namespace cpsl {

void GibbsParams::validate() const {
  if (!(delta > 0.0)) throw ValidationError("gibbs: delta must be > 0");
  if (iterations < 1) throw ValidationError("gibbs: iterations must be >= 1");
}

double acceptance_probability(double theta_old, double theta_new, double delta) {
  if (!(delta > 0.0)) throw DomainError("delta must be > 0");
  if (theta_new == theta_old) return 0.5;
  const double z = (theta_new - theta_old) / delta;
  if (std::isnan(z)) return 0.5;
  // logistic(-z) without overflowing exp
  if (z >= 0.0) {
    const double e = std::exp(-z);
    return e / (1.0 + e);
  }
  return 1.0 / (1.0 + std::exp(z));
}

namespace {

void sort_members(std::vector<int>& v) { std::sort(v.begin(), v.end()); }

std::vector<std::vector<int>> chunk(const std::vector<int>& order, int capacity) {
  std::vector<std::vector<int>> clusters;
  for (std::size_t s = 0; s < order.size(); s += capacity) {
    const auto e = std::min(order.size(), s + capacity);
    std::vector<int> members(order.begin() + s, order.begin() + e);
    sort_members(members);
    clusters.push_back(std::move(members));
  }
  return clusters;
}

void check_inputs(const std::vector<DeviceState>& devices, const EnvSpec& env) {
  if (devices.empty()) throw ValidationError("no devices to cluster");
  if (env.cluster_capacity < 1) throw ValidationError("cluster capacity must be >= 1");
  for (std::size_t n = 0; n < devices.size(); ++n) {
    if (devices[n].id != static_cast<int>(n)) {
      throw ValidationError("device ids must be 0..N-1 in order");
    }
  }
  if (std::min<int>(env.cluster_capacity, devices.size()) > env.subcarriers) {
    throw InfeasibleError(fmt::format("clusters of {} devices exceed {} subcarriers",
                                      env.cluster_capacity, env.subcarriers));
  }
}

// Greedy allocation per cluster, cached by member set.
class Allocator {
 public:
  Allocator(const std::vector<DeviceState>& devices, const CutProfile& profile,
            const EnvSpec& env, bool exact = false)
      : devices_(devices), profile_(profile), env_(env), exact_(exact) {}

  const AllocationResult& operator()(const std::vector<int>& members) {
    auto it = cache_.find(members);
    if (it != cache_.end()) return it->second;
    auto cluster = select_devices(devices_, members);
    const bool enumerate =
        exact_ && composition_count(env_.subcarriers, static_cast<int>(members.size())) <=
                      kCompositionGuard;
    auto r = enumerate ? allocate_exhaustive(std::move(cluster), profile_, env_)
                       : allocate_greedy(std::move(cluster), profile_, env_);
    return cache_.emplace(members, std::move(r)).first->second;
  }

 private:
  const std::vector<DeviceState>& devices_;
  const CutProfile& profile_;
  const EnvSpec& env_;
  bool exact_;
  std::map<std::vector<int>, AllocationResult> cache_;
};

double sum_in_order(const std::vector<double>& v) {
  double s = 0.0;
  for (double d : v) s += d;
  return s;
}

}  // namespace

namespace {

// Returns the two touched cluster indices.
std::pair<int, int> swap_in_place(ClusterAssignment& a, std::mt19937_64& rng) {
  const int m = a.cluster_count();
  auto& cl = a.mutable_clusters();
  const int m1 = std::uniform_int_distribution<int>(0, m - 1)(rng);
  int m2 = std::uniform_int_distribution<int>(0, m - 2)(rng);
  if (m2 >= m1) ++m2;
  const int i = std::uniform_int_distribution<int>(0, static_cast<int>(cl[m1].size()) - 1)(rng);
  const int j = std::uniform_int_distribution<int>(0, static_cast<int>(cl[m2].size()) - 1)(rng);
  std::swap(cl[m1][i], cl[m2][j]);
  sort_members(cl[m1]);
  sort_members(cl[m2]);
  return {m1, m2};
}

}  // namespace

ClusterAssignment propose_swap(const ClusterAssignment& a, std::mt19937_64& rng) {
  if (a.cluster_count() < 2) {
    std::clog << "warning: swap proposal needs at least two clusters; keeping assignment\n";
    return a;
  }
  ClusterAssignment out = a;
  swap_in_place(out, rng);
  return out;
}

ClusterAssignment initial_assignment(int n_devices, int capacity, InitMode mode,
                                     std::uint64_t seed) {
  if (mode == InitMode::Sequential) return ClusterAssignment::sequential(n_devices, capacity);
  std::vector<int> order(n_devices);
  std::iota(order.begin(), order.end(), 0);
  std::mt19937_64 rng(seed);
  std::shuffle(order.begin(), order.end(), rng);
  return {n_devices, chunk(order, capacity)};
}

ClusteringResult evaluate_assignment(const ClusterAssignment& a,
                                     const std::vector<DeviceState>& devices,
                                     const CutProfile& profile, const EnvSpec& env) {
  check_inputs(devices, env);
  a.validate(env.cluster_capacity);
  Allocator alloc(devices, profile, env);
  ClusteringResult r;
  r.assignment = a;
  for (const auto& members : a.clusters()) {
    const auto& ar = alloc(members);
    r.allocations.push_back(ar.allocation);
    r.cluster_latency.push_back(ar.latency);
  }
  r.theta = sum_in_order(r.cluster_latency);
  return r;
}

ClusteringResult gibbs_cluster(const std::vector<DeviceState>& devices, const CutProfile& profile,
                               const EnvSpec& env, const GibbsParams& params) {
  params.validate();
  check_inputs(devices, env);
  const int n = static_cast<int>(devices.size());
  // Random init draws from its own stream so the proposal sequence does not
  // depend on the init mode.
  auto current = initial_assignment(n, env.cluster_capacity, params.init,
                                    derive_seed(params.seed, 0xC1u));
  current.validate(env.cluster_capacity);

  Allocator alloc(devices, profile, env);
  std::vector<double> lat;
  std::vector<SpectrumAllocation> allocs;
  for (const auto& members : current.clusters()) {
    const auto& ar = alloc(members);
    lat.push_back(ar.latency);
    allocs.push_back(ar.allocation);
  }
  double theta = sum_in_order(lat);

  ClusteringResult best;
  best.assignment = current;
  best.allocations = allocs;
  best.cluster_latency = lat;
  best.theta = theta;
  if (params.keep_trace) best.trace.push_back({0, theta, theta, false});

  const int m = current.cluster_count();
  if (m < 2) {
    std::clog << "warning: single cluster; nothing to swap\n";
    return best;
  }

  std::mt19937_64 rng(params.seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (int g = 1; g <= params.iterations; ++g) {
    auto proposal = current;
    const auto [m1, m2] = swap_in_place(proposal, rng);
    const auto& cl = proposal.clusters();

    const auto& a1 = alloc(cl[m1]);
    const auto& a2 = alloc(cl[m2]);
    auto new_lat = lat;
    new_lat[m1] = a1.latency;
    new_lat[m2] = a2.latency;
    const double theta_new = sum_in_order(new_lat);

    const double eps = acceptance_probability(theta, theta_new, params.delta);
    const bool accept = unit(rng) < eps;
    if (accept) {
      current = std::move(proposal);
      lat = std::move(new_lat);
      allocs[m1] = a1.allocation;
      allocs[m2] = a2.allocation;
      theta = theta_new;
      if (theta < best.theta) {
        best.assignment = current;
        best.allocations = allocs;
        best.cluster_latency = lat;
        best.theta = theta;
      }
    }
    if (params.keep_trace) best.trace.push_back({g, theta, best.theta, accept});
  }
  return best;
}

namespace {

std::uint64_t sat_mul(std::uint64_t a, std::uint64_t b) {
  if (a != 0 && b > std::numeric_limits<std::uint64_t>::max() / a) {
    return std::numeric_limits<std::uint64_t>::max();
  }
  return a * b;
}

}  // namespace

std::uint64_t partition_count(int n_devices, int capacity) {
  if (n_devices < 1 || capacity < 1) return 0;
  const int rem = n_devices % capacity;
  std::uint64_t total = rem ? composition_count(n_devices, rem) : 1;
  // Full clusters: the lowest remaining device picks capacity-1 companions.
  for (int left = n_devices - rem; left > 0; left -= capacity) {
    total = sat_mul(total, composition_count(left - 1, capacity - 1));
  }
  return total;
}

namespace {

struct PartitionSearch {
  int n_devices;
  int capacity;
  Allocator& alloc;
  std::vector<std::vector<int>> current;
  std::vector<double> lat;
  std::vector<SpectrumAllocation> allocs;
  ClusteringResult best;

  using Done = std::function<void(const std::vector<int>&, const std::vector<int>&)>;

  // All `need`-subsets of pool[start..] added to `pick`, in lexicographic order.
  static void choose(const std::vector<int>& pool, std::size_t start, int need,
                     std::vector<int>& pick, const Done& done) {
    if (need == 0) {
      std::vector<int> rest;
      std::set_difference(pool.begin(), pool.end(), pick.begin(), pick.end(),
                          std::back_inserter(rest));
      done(pick, rest);
      return;
    }
    for (std::size_t i = start; i + need <= pool.size(); ++i) {
      pick.push_back(pool[i]);
      choose(pool, i + 1, need - 1, pick, done);
      pick.pop_back();
    }
  }

  void push(const std::vector<int>& members) {
    const auto& ar = alloc(members);
    current.push_back(members);
    lat.push_back(ar.latency);
    allocs.push_back(ar.allocation);
  }
  void pop() {
    current.pop_back();
    lat.pop_back();
    allocs.pop_back();
  }

  void leaf() {
    const double theta = sum_in_order(lat);
    if (theta < best.theta) {
      best.assignment = ClusterAssignment(n_devices, current);
      best.allocations = allocs;
      best.cluster_latency = lat;
      best.theta = theta;
    }
  }

  // Full clusters over `pool`; each new cluster holds the lowest remaining
  // device so unlabeled partitions are visited once. `tail` (the remainder
  // cluster, possibly empty) is appended last.
  void full(const std::vector<int>& pool, const std::vector<int>& tail) {
    if (pool.empty()) {
      if (tail.empty()) {
        leaf();
      } else {
        push(tail);
        leaf();
        pop();
      }
      return;
    }
    std::vector<int> pick{pool.front()};
    choose(pool, 1, capacity - 1, pick, [&](const std::vector<int>& members,
                                             const std::vector<int>& rest) {
      push(members);
      full(rest, tail);
      pop();
    });
  }
};

}  // namespace

ClusteringResult cluster_exhaustive(const std::vector<DeviceState>& devices,
                                    const CutProfile& profile, const EnvSpec& env,
                                    std::uint64_t guard) {
  check_inputs(devices, env);
  const int n = static_cast<int>(devices.size());
  const int cap = env.cluster_capacity;
  const auto count = partition_count(n, cap);
  if (count > guard) {
    throw GuardError(fmt::format(
        "exhaustive clustering would enumerate {} partitions (guard {})", count, guard));
  }
  Allocator alloc(devices, profile, env, /*exact=*/true);
  PartitionSearch search{n, cap, alloc, {}, {}, {}, {}};
  search.best.theta = std::numeric_limits<double>::infinity();
  std::vector<int> all(n);
  std::iota(all.begin(), all.end(), 0);
  const int rem = n % cap;
  if (rem == 0) {
    search.full(all, {});
  } else {
    std::vector<int> pick;
    PartitionSearch::choose(all, 0, rem, pick,
                            [&](const std::vector<int>& tail, const std::vector<int>& rest) {
                              search.full(rest, tail);
                            });
  }
  return search.best;
}

ClusteringResult cluster_random(const std::vector<DeviceState>& devices,
                                const CutProfile& profile, const EnvSpec& env,
                                std::uint64_t seed) {
  check_inputs(devices, env);
  const auto a = initial_assignment(static_cast<int>(devices.size()), env.cluster_capacity,
                                    InitMode::Random, seed);
  return evaluate_assignment(a, devices, profile, env);
}

ClusteringResult cluster_heuristic(const std::vector<DeviceState>& devices,
                                   const CutProfile& profile, const EnvSpec& env) {
  check_inputs(devices, env);
  std::vector<int> order(devices.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](int a, int b) { return devices[a].f > devices[b].f; });
  const ClusterAssignment a(static_cast<int>(devices.size()),
                            chunk(order, env.cluster_capacity));
  return evaluate_assignment(a, devices, profile, env);
}

void write_trace_csv(std::ostream& os, const std::vector<TraceRow>& trace) {
  os << "iteration,theta_s,best_s,accepted\n";
  for (const auto& r : trace) {
    os << fmt::format("{},{:.17g},{:.17g},{}\n", r.iteration, r.theta, r.best,
                      r.accepted ? 1 : 0);
  }
}

nlohmann::json clustering_to_json(const ClusteringResult& r) {
  nlohmann::json clusters = nlohmann::json::array();
  for (std::size_t m = 0; m < r.allocations.size(); ++m) {
    clusters.push_back({{"devices", r.allocations[m].device_ids},
                        {"subcarriers", r.allocations[m].subcarriers},
                        {"latency_s", r.cluster_latency.at(m)}});
  }
  return {{"theta_s", r.theta}, {"clusters", clusters}};
}

}  // namespace cpsl
