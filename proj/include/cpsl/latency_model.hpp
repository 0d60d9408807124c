#pragma once

#include <ostream>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "cpsl/decisions.hpp"
#include "cpsl/model_profiler.hpp"
#include "cpsl/network_env.hpp"

namespace cpsl {

// Per-device latency components in seconds.
struct ComponentLatencies {
  double broadcast = 0.0;          // device-side model download, all C subcarriers
  double device_forward = 0.0;     // minibatch forward on the device
  double smashed_upload = 0.0;     // minibatch smashed data to the AP
  double gradient_download = 0.0;  // smashed-data gradient back to the device
  double device_backward = 0.0;    // minibatch backward on the device
  double model_upload = 0.0;       // device-side model to the AP
};

struct PhaseLatencies {
  double starting = 0.0;
  double inner = 0.0;
  double ending = 0.0;
};

struct ClusterLatency {
  std::vector<int> device_ids;
  std::vector<int> subcarriers;
  std::vector<ComponentLatencies> components;
  double server = 0.0;  // tau_e for the whole cluster
  PhaseLatencies phases;
  double total = 0.0;  // starting + (L-1) * inner + ending
};

enum class Scheme { CPSL, VanillaSL, FL };
std::string to_string(Scheme scheme);

struct RoundLatency {
  Scheme scheme = Scheme::CPSL;
  std::vector<ClusterLatency> clusters;
  double total = 0.0;
};

ComponentLatencies component_latencies(const DeviceState& device, const CutProfile& profile,
                                       int subcarriers, const EnvSpec& env);

// Server-side forward plus update for a cluster of k devices.
double server_latency(int cluster_size, const CutProfile& profile, const EnvSpec& env);

// Evaluates the per-cluster latency D_m for many candidate allocations of the
// same cluster. Per-device terms that do not depend on the allocation are
// computed once; every public entry point in this module goes through here so
// all callers see bit-identical values.
class ClusterEvaluator {
 public:
  ClusterEvaluator(std::vector<DeviceState> devices, const CutProfile& profile,
                   const EnvSpec& env);

  int size() const { return static_cast<int>(devices_.size()); }
  const std::vector<DeviceState>& devices() const { return devices_; }

  PhaseLatencies phases(std::span<const int> subcarriers) const;
  double total(std::span<const int> subcarriers) const;
  ClusterLatency detail(std::span<const int> subcarriers) const;

 private:
  struct Terms {
    double broadcast;
    double forward;
    double backward;
    double upload_unit;    // B * xi_s / R, divided by x
    double gradient_unit;  // xi_g / R
    double model_unit;     // xi_d / R
  };
  void check(std::span<const int> subcarriers) const;

  std::vector<DeviceState> devices_;
  std::vector<Terms> terms_;
  double server_ = 0.0;
  int local_epochs_ = 1;
};

// Starting, inner and ending phase latencies for one cluster.
ClusterLatency phase_latencies(const std::vector<DeviceState>& cluster,
                               const CutProfile& profile, const SpectrumAllocation& alloc,
                               const EnvSpec& env);

std::vector<DeviceState> select_devices(const std::vector<DeviceState>& devices,
                                        const std::vector<int>& ids);

RoundLatency cpsl_round_latency(const ClusterAssignment& assignment,
                                const std::vector<SpectrumAllocation>& allocations,
                                const std::vector<DeviceState>& devices,
                                const CutProfile& profile, const EnvSpec& env);

// Devices trained one after another, each using every subcarrier; the
// device-side model is uploaded to the AP and broadcast to the next device.
RoundLatency vanilla_sl_round_latency(const std::vector<DeviceState>& devices,
                                      const CutProfile& profile, const EnvSpec& env);

// All devices train the full model in parallel; uploads share the spectrum
// evenly (floor(C / N) subcarriers each). Throws InfeasibleError if N > C.
RoundLatency fl_round_latency(const std::vector<DeviceState>& devices,
                              const CutProfile& full_model, const EnvSpec& env);

// One row per (cluster, device, component) plus server and phase rows.
void write_round_csv(std::ostream& os, const RoundLatency& round);
nlohmann::json round_to_json(const RoundLatency& round);

}  // namespace cpsl
