#include "cpsl/decisions.hpp"

#include <algorithm>
#include <numeric>

#include <fmt/format.h>

#include "cpsl/errors.hpp"

namespace cpsl {

ClusterAssignment::ClusterAssignment(int n_devices, std::vector<std::vector<int>> clusters)
    : n_devices_(n_devices), clusters_(std::move(clusters)) {}

ClusterAssignment ClusterAssignment::sequential(int n_devices, int capacity) {
  if (capacity < 1 || n_devices < 1) throw ValidationError("assignment: bad dimensions");
  std::vector<std::vector<int>> clusters;
  for (int start = 0; start < n_devices; start += capacity) {
    std::vector<int> members;
    for (int n = start; n < std::min(n_devices, start + capacity); ++n) members.push_back(n);
    clusters.push_back(std::move(members));
  }
  return {n_devices, std::move(clusters)};
}

std::vector<int> ClusterAssignment::cluster_of() const {
  std::vector<int> out(n_devices_, -1);
  for (int m = 0; m < cluster_count(); ++m) {
    for (int n : clusters_[m]) out.at(n) = m;
  }
  return out;
}

std::vector<std::vector<int>> ClusterAssignment::matrix() const {
  std::vector<std::vector<int>> a(n_devices_, std::vector<int>(cluster_count(), 0));
  for (int m = 0; m < cluster_count(); ++m) {
    for (int n : clusters_[m]) a.at(n).at(m) = 1;
  }
  return a;
}

void ClusterAssignment::validate(int capacity) const {
  std::vector<int> seen(n_devices_, 0);
  for (const auto& members : clusters_) {
    for (int n : members) {
      if (n < 0 || n >= n_devices_) {
        throw ValidationError(fmt::format("assignment: device {} out of range", n));
      }
      ++seen[n];
    }
  }
  for (int n = 0; n < n_devices_; ++n) {
    if (seen[n] != 1) {
      throw ValidationError(
          fmt::format("assignment: device {} appears in {} clusters", n, seen[n]));
    }
  }
  int short_clusters = 0;
  for (const auto& members : clusters_) {
    const int k = static_cast<int>(members.size());
    if (k == 0 || k > capacity) {
      throw ValidationError(
          fmt::format("assignment: cluster of size {} violates capacity {}", k, capacity));
    }
    if (k < capacity) ++short_clusters;
  }
  const int expected_short = n_devices_ % capacity == 0 ? 0 : 1;
  if (short_clusters != expected_short) {
    throw ValidationError(fmt::format(
        "assignment: {} under-filled clusters, expected {}", short_clusters, expected_short));
  }
}

int SpectrumAllocation::total() const {
  return std::accumulate(subcarriers.begin(), subcarriers.end(), 0);
}

int SpectrumAllocation::of(int device_id) const {
  for (std::size_t i = 0; i < device_ids.size(); ++i) {
    if (device_ids[i] == device_id) return subcarriers.at(i);
  }
  throw ValidationError(fmt::format("allocation has no entry for device {}", device_id));
}

}  // namespace cpsl
