#pragma once

#include <vector>

namespace cpsl {

// Partition of N devices into M clusters, stored as member lists. Device ids
// are 0-based indices into the round's device vector.
class ClusterAssignment {
 public:
  ClusterAssignment() = default;
  ClusterAssignment(int n_devices, std::vector<std::vector<int>> clusters);

  // Devices 0..N-1 chunked into consecutive clusters of `capacity`; the last
  // cluster holds the remainder when capacity does not divide N.
  static ClusterAssignment sequential(int n_devices, int capacity);

  int device_count() const { return n_devices_; }
  int cluster_count() const { return static_cast<int>(clusters_.size()); }
  const std::vector<int>& members(int m) const { return clusters_.at(m); }
  const std::vector<std::vector<int>>& clusters() const { return clusters_; }
  std::vector<std::vector<int>>& mutable_clusters() { return clusters_; }

  std::vector<int> cluster_of() const;
  // Binary N x M association matrix.
  std::vector<std::vector<int>> matrix() const;

  // Each device in exactly one cluster; every cluster has `capacity` members
  // except at most one remainder cluster with fewer (when capacity does not
  // divide N). Throws ValidationError.
  void validate(int capacity) const;

  bool operator==(const ClusterAssignment&) const = default;

 private:
  int n_devices_ = 0;
  std::vector<std::vector<int>> clusters_;
};

// Subcarrier counts for the devices of one cluster, aligned with
// `device_ids`.
struct SpectrumAllocation {
  std::vector<int> device_ids;
  std::vector<int> subcarriers;

  int total() const;
  int of(int device_id) const;
  bool operator==(const SpectrumAllocation&) const = default;
};

}  // namespace cpsl
