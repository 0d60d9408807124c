#pragma once

#include <cstdint>
#include <vector>

#include "cpsl/decisions.hpp"
#include "cpsl/latency_model.hpp"

namespace cpsl {

struct AllocationResult {
  SpectrumAllocation allocation;
  double latency = 0.0;  // D_m under `allocation`
};

inline constexpr std::uint64_t kCompositionGuard = 1'000'000;

// Devices are ordered by id before allocating, so "lowest index" in tie-breaks
// means lowest device id.
AllocationResult allocate_greedy(std::vector<DeviceState> cluster, const CutProfile& profile,
                                 const EnvSpec& env);
AllocationResult allocate_exhaustive(std::vector<DeviceState> cluster, const CutProfile& profile,
                                     const EnvSpec& env,
                                     std::uint64_t guard = kCompositionGuard);

// Greedy on a prepared evaluator; returns counts aligned with its devices.
std::vector<int> greedy_counts(const ClusterEvaluator& eval, int subcarriers);

// Number of integer vectors x >= 1 of length k with sum <= c, i.e. binom(c, k).
// Saturates at UINT64_MAX.
std::uint64_t composition_count(int c, int k);

}  // namespace cpsl
