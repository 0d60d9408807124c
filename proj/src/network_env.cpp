#include "cpsl/network_env.hpp"

#include <cmath>

#include <fmt/format.h>

#include "cpsl/errors.hpp"

namespace cpsl {

double EnvSpec::f_mean_of(int device) const {
  return f_mean.size() == 1 ? f_mean.front() : f_mean.at(device);
}

double EnvSpec::snr_mean_of(int device) const {
  return snr_mean_db.size() == 1 ? snr_mean_db.front() : snr_mean_db.at(device);
}

int EnvSpec::cluster_count() const {
  return (n_devices + cluster_capacity - 1) / cluster_capacity;
}

void EnvSpec::validate() const {
  auto fail = [](const std::string& msg) { throw ValidationError("env: " + msg); };
  if (n_devices < 1) fail("n_devices must be >= 1");
  if (subcarriers < 1) fail("subcarriers must be >= 1");
  if (!(subcarrier_bandwidth > 0.0)) fail("subcarrier_bandwidth must be > 0");
  if (!(kappa > 0.0)) fail("kappa must be > 0");
  if (!(server_f > 0.0)) fail("server_f must be > 0");
  if (batch < 1) fail("batch must be >= 1");
  if (local_epochs < 1) fail("local_epochs must be >= 1");
  if (cluster_capacity < 1) fail("cluster_capacity must be >= 1");
  if (n_devices < cluster_capacity) fail("n_devices must be >= cluster_capacity");
  if (f_std < 0.0 || snr_std_db < 0.0) fail("standard deviations must be >= 0");
  auto check_means = [&](const std::vector<double>& v, const char* name) {
    if (v.size() != 1 && v.size() != static_cast<std::size_t>(n_devices)) {
      fail(fmt::format("{} must have 1 or {} entries, has {}", name, n_devices, v.size()));
    }
  };
  check_means(f_mean, "f_mean");
  check_means(snr_mean_db, "snr_mean_db");
  for (double f : f_mean) {
    if (!(f > 0.0)) fail("f_mean entries must be > 0");
  }
  for (double s : snr_mean_db) {
    if (!std::isfinite(s)) fail("snr_mean_db entries must be finite");
  }
}

std::uint64_t derive_seed(std::uint64_t master, std::uint64_t index) {
  std::uint64_t z = master + 0x9E3779B97F4A7C15ULL * (index + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

void draw_heterogeneous_means(EnvSpec& spec, double f_lo, double f_hi, double snr_lo_db,
                              double snr_hi_db, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> f_dist(f_lo, f_hi);
  std::uniform_real_distribution<double> snr_dist(snr_lo_db, snr_hi_db);
  spec.f_mean.resize(spec.n_devices);
  spec.snr_mean_db.resize(spec.n_devices);
  for (int n = 0; n < spec.n_devices; ++n) {
    spec.f_mean[n] = f_dist(rng);
    spec.snr_mean_db[n] = snr_dist(rng);
  }
}

std::vector<DeviceState> sample_devices(const EnvSpec& spec, std::uint64_t seed) {
  spec.validate();
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> unit(0.0, 1.0);
  std::vector<DeviceState> devices;
  devices.reserve(spec.n_devices);
  for (int n = 0; n < spec.n_devices; ++n) {
    const double mu_f = spec.f_mean_of(n);
    const double floor_f = 0.01 * mu_f;
    double f = mu_f;
    if (spec.f_std > 0.0) {
      int attempts = 0;
      do {
        f = mu_f + spec.f_std * unit(rng);
      } while (f < floor_f && ++attempts < 64);
      if (f < floor_f) f = floor_f;
    }
    double snr = spec.snr_mean_of(n);
    if (spec.snr_std_db > 0.0) snr += spec.snr_std_db * unit(rng);
    devices.push_back({n, f, snr});
  }
  return devices;
}

std::vector<DeviceState> mean_devices(const EnvSpec& spec) {
  spec.validate();
  std::vector<DeviceState> devices;
  devices.reserve(spec.n_devices);
  for (int n = 0; n < spec.n_devices; ++n) {
    devices.push_back({n, spec.f_mean_of(n), spec.snr_mean_of(n)});
  }
  return devices;
}

double subcarrier_rate(double snr_db, double w) {
  return w * std::log2(1.0 + std::pow(10.0, snr_db / 10.0));
}

double expected_subcarrier_rate(double snr_mean_db, double snr_std_db, double w, int n_mc,
                                std::uint64_t seed) {
  if (n_mc < 1) throw DomainError("n_mc must be >= 1");
  if (snr_std_db == 0.0) return subcarrier_rate(snr_mean_db, w);
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> dist(snr_mean_db, snr_std_db);
  // Kahan-compensated running sum keeps 1e7-sample references stable.
  double sum = 0.0;
  double comp = 0.0;
  for (int i = 0; i < n_mc; ++i) {
    const double y = subcarrier_rate(dist(rng), w) - comp;
    const double t = sum + y;
    comp = (t - sum) - y;
    sum = t;
  }
  return sum / n_mc;
}

namespace {

std::vector<double> number_or_list(const nlohmann::json& j, const char* key) {
  const auto& v = j.at(key);
  try {
    if (v.is_array()) return v.get<std::vector<double>>();
    return {v.get<double>()};
  } catch (const nlohmann::json::exception&) {
    throw ConfigError(fmt::format("env: field '{}' must be a number or list of numbers", key));
  }
}

template <typename T>
void read(const nlohmann::json& j, const char* key, T& out) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<T>();
  } catch (const nlohmann::json::exception&) {
    throw ConfigError(fmt::format("env: field '{}' has the wrong type", key));
  }
}

}  // namespace

EnvSpec env_from_json(const nlohmann::json& j, const EnvSpec& base, std::uint64_t het_seed) {
  if (!j.is_object()) throw ConfigError("env must be a JSON object");
  EnvSpec spec = base;
  read(j, "n_devices", spec.n_devices);
  if (j.contains("f_mean")) spec.f_mean = number_or_list(j, "f_mean");
  read(j, "f_std", spec.f_std);
  if (j.contains("snr_mean_db")) spec.snr_mean_db = number_or_list(j, "snr_mean_db");
  read(j, "snr_std_db", spec.snr_std_db);
  read(j, "subcarriers", spec.subcarriers);
  read(j, "subcarrier_bandwidth", spec.subcarrier_bandwidth);
  read(j, "kappa", spec.kappa);
  read(j, "server_f", spec.server_f);
  read(j, "batch", spec.batch);
  read(j, "local_epochs", spec.local_epochs);
  read(j, "cluster_capacity", spec.cluster_capacity);
  if (j.contains("heterogeneous")) {
    const auto& h = j.at("heterogeneous");
    try {
      const auto fr = h.at("f_range").get<std::vector<double>>();
      const auto sr = h.at("snr_range_db").get<std::vector<double>>();
      const auto seed = h.value("seed", het_seed);
      if (fr.size() != 2 || sr.size() != 2) throw ConfigError("ranges must have 2 entries");
      draw_heterogeneous_means(spec, fr[0], fr[1], sr[0], sr[1], seed);
    } catch (const nlohmann::json::exception&) {
      throw ConfigError("env.heterogeneous needs f_range, snr_range_db (and optional seed)");
    }
  }
  spec.validate();
  return spec;
}

nlohmann::json env_to_json(const EnvSpec& spec) {
  return {
      {"n_devices", spec.n_devices},
      {"f_mean", spec.f_mean},
      {"f_std", spec.f_std},
      {"snr_mean_db", spec.snr_mean_db},
      {"snr_std_db", spec.snr_std_db},
      {"subcarriers", spec.subcarriers},
      {"subcarrier_bandwidth", spec.subcarrier_bandwidth},
      {"kappa", spec.kappa},
      {"server_f", spec.server_f},
      {"batch", spec.batch},
      {"local_epochs", spec.local_epochs},
      {"cluster_capacity", spec.cluster_capacity},
  };
}

}  // namespace cpsl
