#pragma once

#include <cstdint>
#include <random>
#include <vector>

#include <nlohmann/json.hpp>

namespace cpsl {

// One device's realised state for a training round.
struct DeviceState {
  int id = 0;            // 0-based device index
  double f = 0.0;        // computing capability, cycles/s
  double snr_db = 0.0;   // received SNR, dB (same for uplink and downlink)
};

// Environment parameters. Per-device means may be given with a single entry,
// which then applies to every device. Defaults are the homogeneous reference
// setup: 30 devices at 0.5e9 cycles/s and 17 dB, 30 x 1 MHz subcarriers.
struct EnvSpec {
  int n_devices = 30;
  std::vector<double> f_mean{0.5e9};
  double f_std = 0.0;
  std::vector<double> snr_mean_db{17.0};
  double snr_std_db = 0.0;
  int subcarriers = 30;
  double subcarrier_bandwidth = 1.0e6;  // Hz
  double kappa = 1.0;                   // FLOPs per cycle
  double server_f = 100.0e9;            // cycles/s
  int batch = 16;
  int local_epochs = 1;
  int cluster_capacity = 5;

  double f_mean_of(int device) const;
  double snr_mean_of(int device) const;
  int cluster_count() const;  // ceil(N / K_m)

  // Throws ValidationError if any invariant is violated.
  void validate() const;
};

// Draws per-device means uniformly from the given ranges (heterogeneous
// setup). Deterministic for a fixed seed.
void draw_heterogeneous_means(EnvSpec& spec, double f_lo, double f_hi, double snr_lo_db,
                              double snr_hi_db, std::uint64_t seed);

// Gaussian draws around the per-device means. Computing capabilities are
// truncated below at 1% of the mean (resampled, then clamped as a last resort).
std::vector<DeviceState> sample_devices(const EnvSpec& spec, std::uint64_t seed);

// Devices fixed at their means.
std::vector<DeviceState> mean_devices(const EnvSpec& spec);

// Shannon rate of one subcarrier at a point SNR: w * log2(1 + 10^(snr/10)).
double subcarrier_rate(double snr_db, double w);

// Monte-Carlo expectation of subcarrier_rate over N(snr_mean, snr_std^2) in dB.
double expected_subcarrier_rate(double snr_mean_db, double snr_std_db, double w, int n_mc,
                                std::uint64_t seed);

// Deterministic seed derivation (splitmix64 over the pair).
std::uint64_t derive_seed(std::uint64_t master, std::uint64_t index);

// `het_seed` is used when a "heterogeneous" block carries no seed of its own.
EnvSpec env_from_json(const nlohmann::json& j, const EnvSpec& base = {},
                      std::uint64_t het_seed = 0);
nlohmann::json env_to_json(const EnvSpec& spec);

}  // namespace cpsl
