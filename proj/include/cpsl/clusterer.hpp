#pragma once

#include <cstdint>
#include <ostream>
#include <random>
#include <vector>

#include <nlohmann/json.hpp>

#include "cpsl/decisions.hpp"
#include "cpsl/latency_model.hpp"

namespace cpsl {

enum class InitMode { Sequential, Random };

struct GibbsParams {
  double delta = 1e-4;
  int iterations = 1000;
  std::uint64_t seed = 0;
  InitMode init = InitMode::Sequential;
  bool keep_trace = true;

  void validate() const;
};

struct TraceRow {
  int iteration = 0;
  double theta = 0.0;  // chain state after this iteration
  double best = 0.0;
  bool accepted = false;
};

struct ClusteringResult {
  ClusterAssignment assignment;
  std::vector<SpectrumAllocation> allocations;
  std::vector<double> cluster_latency;
  double theta = 0.0;
  std::vector<TraceRow> trace;
};

// 1 / (1 + exp((theta_new - theta_old) / delta)); exactly 0.5 at equality,
// saturates cleanly for infinite or huge arguments.
double acceptance_probability(double theta_old, double theta_new, double delta);

// Swaps one uniformly chosen device from each of two distinct uniformly chosen
// clusters. With a single cluster it warns and returns `a` unchanged.
ClusterAssignment propose_swap(const ClusterAssignment& a, std::mt19937_64& rng);

ClusterAssignment initial_assignment(int n_devices, int capacity, InitMode mode,
                                     std::uint64_t seed);

ClusteringResult gibbs_cluster(const std::vector<DeviceState>& devices, const CutProfile& profile,
                               const EnvSpec& env, const GibbsParams& params);

inline constexpr std::uint64_t kPartitionGuard = 100'000;

// Number of partitions of n devices into clusters of `capacity` (one remainder
// cluster if needed), clusters unlabeled. Saturates at UINT64_MAX.
std::uint64_t partition_count(int n_devices, int capacity);

ClusteringResult cluster_exhaustive(const std::vector<DeviceState>& devices,
                                    const CutProfile& profile, const EnvSpec& env,
                                    std::uint64_t guard = kPartitionGuard);

// Benchmarks: random partition, or devices grouped by similar f (sorted by
// descending f, then chunked). Both allocate spectrum greedily.
ClusteringResult cluster_random(const std::vector<DeviceState>& devices,
                                const CutProfile& profile, const EnvSpec& env,
                                std::uint64_t seed);
ClusteringResult cluster_heuristic(const std::vector<DeviceState>& devices,
                                   const CutProfile& profile, const EnvSpec& env);

// Greedy allocation and round latency for a fixed assignment.
ClusteringResult evaluate_assignment(const ClusterAssignment& a,
                                     const std::vector<DeviceState>& devices,
                                     const CutProfile& profile, const EnvSpec& env);

void write_trace_csv(std::ostream& os, const std::vector<TraceRow>& trace);
nlohmann::json clustering_to_json(const ClusteringResult& r);

}  // namespace cpsl
