#include "cpsl/latency_model.hpp"

#include <algorithm>

#include <fmt/format.h>

#include "cpsl/errors.hpp"

namespace cpsl {

std::string to_string(Scheme scheme) {
  switch (scheme) {
    case Scheme::CPSL:
      return "CPSL";
    case Scheme::VanillaSL:
      return "SL";
    case Scheme::FL:
      return "FL";
  }
  return "unknown";
}

ComponentLatencies component_latencies(const DeviceState& device, const CutProfile& profile,
                                       int subcarriers, const EnvSpec& env) {
  ClusterEvaluator eval({device}, profile, env);
  const int x[] = {subcarriers};
  return eval.detail(x).components.front();
}

double server_latency(int cluster_size, const CutProfile& profile, const EnvSpec& env) {
  if (cluster_size < 1) throw DomainError("cluster size must be >= 1");
  return cluster_size * env.batch * (profile.gamma_s_f + profile.gamma_s_b) /
         (env.server_f * env.kappa);
}

ClusterEvaluator::ClusterEvaluator(std::vector<DeviceState> devices, const CutProfile& profile,
                                   const EnvSpec& env)
    : devices_(std::move(devices)), local_epochs_(env.local_epochs) {
  if (devices_.empty()) throw ValidationError("cluster has no devices");
  terms_.reserve(devices_.size());
  const double b = env.batch;
  for (const auto& d : devices_) {
    if (!(d.f > 0.0)) throw ValidationError(fmt::format("device {}: f must be > 0", d.id));
    const double rate = subcarrier_rate(d.snr_db, env.subcarrier_bandwidth);
    Terms t;
    t.broadcast = profile.xi_d / (env.subcarriers * rate);
    t.forward = b * profile.gamma_d_f / (d.f * env.kappa);
    t.backward = b * profile.gamma_d_b / (d.f * env.kappa);
    t.upload_unit = b * profile.xi_s / rate;
    t.gradient_unit = profile.xi_g / rate;
    t.model_unit = profile.xi_d / rate;
    terms_.push_back(t);
  }
  server_ = server_latency(size(), profile, env);
}

void ClusterEvaluator::check(std::span<const int> x) const {
  if (x.size() != devices_.size()) {
    throw ValidationError(fmt::format("allocation has {} entries for a cluster of {}",
                                      x.size(), devices_.size()));
  }
  for (int v : x) {
    if (v < 1) throw DomainError(fmt::format("subcarrier count {} < 1", v));
  }
}

PhaseLatencies ClusterEvaluator::phases(std::span<const int> x) const {
  check(x);
  double start = 0.0;
  double inner = 0.0;
  double end = 0.0;
  for (std::size_t k = 0; k < terms_.size(); ++k) {
    const auto& t = terms_[k];
    const double xk = x[k];
    const double up = t.upload_unit / xk;
    const double grad = t.gradient_unit / xk;
    const double model = t.model_unit / xk;
    start = std::max(start, t.broadcast + t.forward + up);
    inner = std::max(inner, grad + t.backward + t.forward + up);
    end = std::max(end, grad + t.backward + model);
  }
  return {start + server_, inner + server_, end};
}

double ClusterEvaluator::total(std::span<const int> x) const {
  const auto p = phases(x);
  return p.starting + (local_epochs_ - 1) * p.inner + p.ending;
}

ClusterLatency ClusterEvaluator::detail(std::span<const int> x) const {
  ClusterLatency out;
  out.phases = phases(x);
  out.total = out.phases.starting + (local_epochs_ - 1) * out.phases.inner + out.phases.ending;
  out.server = server_;
  out.subcarriers.assign(x.begin(), x.end());
  for (std::size_t k = 0; k < terms_.size(); ++k) {
    const auto& t = terms_[k];
    const double xk = x[k];
    out.device_ids.push_back(devices_[k].id);
    out.components.push_back({t.broadcast, t.forward, t.upload_unit / xk,
                              t.gradient_unit / xk, t.backward, t.model_unit / xk});
  }
  return out;
}

ClusterLatency phase_latencies(const std::vector<DeviceState>& cluster,
                               const CutProfile& profile, const SpectrumAllocation& alloc,
                               const EnvSpec& env) {
  if (alloc.device_ids.size() != alloc.subcarriers.size()) {
    throw ValidationError("allocation ids and counts differ in length");
  }
  if (alloc.total() > env.subcarriers) {
    throw ValidationError(fmt::format("allocation uses {} subcarriers, capacity is {}",
                                      alloc.total(), env.subcarriers));
  }
  std::vector<int> x;
  x.reserve(cluster.size());
  for (const auto& d : cluster) x.push_back(alloc.of(d.id));
  if (alloc.device_ids.size() != cluster.size()) {
    throw ValidationError("allocation covers devices outside the cluster");
  }
  return ClusterEvaluator(cluster, profile, env).detail(x);
}

std::vector<DeviceState> select_devices(const std::vector<DeviceState>& devices,
                                        const std::vector<int>& ids) {
  std::vector<DeviceState> out;
  out.reserve(ids.size());
  for (int id : ids) out.push_back(devices.at(id));
  return out;
}

RoundLatency cpsl_round_latency(const ClusterAssignment& assignment,
                                const std::vector<SpectrumAllocation>& allocations,
                                const std::vector<DeviceState>& devices,
                                const CutProfile& profile, const EnvSpec& env) {
  if (static_cast<int>(devices.size()) != assignment.device_count()) {
    throw ValidationError("assignment and device list differ in size");
  }
  if (static_cast<int>(allocations.size()) != assignment.cluster_count()) {
    throw ValidationError("need one allocation per cluster");
  }
  RoundLatency round;
  round.scheme = Scheme::CPSL;
  for (int m = 0; m < assignment.cluster_count(); ++m) {
    auto cl = phase_latencies(select_devices(devices, assignment.members(m)), profile,
                              allocations[m], env);
    round.total += cl.total;
    round.clusters.push_back(std::move(cl));
  }
  return round;
}

RoundLatency vanilla_sl_round_latency(const std::vector<DeviceState>& devices,
                                      const CutProfile& profile, const EnvSpec& env) {
  RoundLatency round;
  round.scheme = Scheme::VanillaSL;
  const int all[] = {env.subcarriers};
  for (const auto& d : devices) {
    // A one-device cluster holding the whole spectrum: its ending-phase
    // upload is the handoff, and the next device's broadcast is the download.
    auto cl = ClusterEvaluator({d}, profile, env).detail(all);
    round.total += cl.total;
    round.clusters.push_back(std::move(cl));
  }
  return round;
}

RoundLatency fl_round_latency(const std::vector<DeviceState>& devices,
                              const CutProfile& full_model, const EnvSpec& env) {
  const int n = static_cast<int>(devices.size());
  if (n < 1) throw ValidationError("FL round needs at least one device");
  if (n > env.subcarriers) {
    throw InfeasibleError(
        fmt::format("FL needs one subcarrier per device: N = {} > C = {}", n, env.subcarriers));
  }
  const int x = env.subcarriers / n;
  RoundLatency round;
  round.scheme = Scheme::FL;
  ClusterLatency cl;
  const double work = full_model.gamma_d_f + full_model.gamma_d_b +
                      full_model.gamma_s_f + full_model.gamma_s_b;
  for (const auto& d : devices) {
    const double rate = subcarrier_rate(d.snr_db, env.subcarrier_bandwidth);
    ComponentLatencies c;
    c.broadcast = full_model.xi_d / (env.subcarriers * rate);
    const double compute = env.batch * env.local_epochs * work / (d.f * env.kappa);
    // Split evenly for reporting; forward and backward workloads are equal.
    c.device_forward = compute * (full_model.gamma_d_f + full_model.gamma_s_f) / work;
    c.device_backward = compute - c.device_forward;
    c.model_upload = full_model.xi_d / (x * rate);
    cl.device_ids.push_back(d.id);
    cl.subcarriers.push_back(x);
    cl.components.push_back(c);
    cl.total = std::max(cl.total, c.broadcast + compute + c.model_upload);
  }
  cl.phases.ending = cl.total;
  round.total = cl.total;
  round.clusters.push_back(std::move(cl));
  return round;
}

void write_round_csv(std::ostream& os, const RoundLatency& round) {
  os << "scheme,cluster,device,component,seconds\n";
  const auto scheme = to_string(round.scheme);
  for (std::size_t m = 0; m < round.clusters.size(); ++m) {
    const auto& cl = round.clusters[m];
    for (std::size_t k = 0; k < cl.components.size(); ++k) {
      const auto& c = cl.components[k];
      const std::pair<const char*, double> rows[] = {
          {"tau_b", c.broadcast},         {"tau_d", c.device_forward},
          {"tau_s", c.smashed_upload},    {"tau_g", c.gradient_download},
          {"tau_u", c.device_backward},   {"tau_t", c.model_upload}};
      for (const auto& [name, v] : rows) {
        os << fmt::format("{},{},{},{},{:.17g}\n", scheme, m, cl.device_ids[k], name, v);
      }
    }
    os << fmt::format("{},{},,tau_e,{:.17g}\n", scheme, m, cl.server);
    os << fmt::format("{},{},,d_S,{:.17g}\n", scheme, m, cl.phases.starting);
    os << fmt::format("{},{},,d_I,{:.17g}\n", scheme, m, cl.phases.inner);
    os << fmt::format("{},{},,d_E,{:.17g}\n", scheme, m, cl.phases.ending);
    os << fmt::format("{},{},,D_m,{:.17g}\n", scheme, m, cl.total);
  }
  os << fmt::format("{},,,D_t,{:.17g}\n", scheme, round.total);
}

nlohmann::json round_to_json(const RoundLatency& round) {
  nlohmann::json clusters = nlohmann::json::array();
  for (const auto& cl : round.clusters) {
    clusters.push_back({{"devices", cl.device_ids},
                        {"subcarriers", cl.subcarriers},
                        {"tau_e", cl.server},
                        {"d_S", cl.phases.starting},
                        {"d_I", cl.phases.inner},
                        {"d_E", cl.phases.ending},
                        {"D_m", cl.total}});
  }
  return {{"scheme", to_string(round.scheme)}, {"total_s", round.total}, {"clusters", clusters}};
}

}  // namespace cpsl
