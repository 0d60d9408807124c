#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

#include "cpsl/model_profiler.hpp"
#include "cpsl/network_env.hpp"

namespace testing {

inline bool close_rel(double a, double b, double rel) {
  return std::abs(a - b) <= rel * std::max(std::abs(a), std::abs(b));
}

// The reference profile at the third cut.
inline cpsl::CutProfile pool1_profile() {
  auto model = cpsl::bundled_lenet();
  return cpsl::model_profiles(model, 16, cpsl::ProfileSource::Override).at(2);
}

inline cpsl::CutProfile full_override_profile() {
  auto model = cpsl::bundled_lenet();
  return cpsl::model_profiles(model, 16, cpsl::ProfileSource::Override).back();
}

inline std::vector<cpsl::DeviceState> uniform_devices(int n, double f = 0.5e9,
                                                      double snr = 17.0) {
  std::vector<cpsl::DeviceState> out;
  for (int i = 0; i < n; ++i) out.push_back({i, f, snr});
  return out;
}

// Random devices for property tests.
inline std::vector<cpsl::DeviceState> random_devices(int n, std::mt19937_64& rng,
                                                     double f_lo = 0.1e9, double f_hi = 1.0e9,
                                                     double s_lo = 5.0, double s_hi = 30.0) {
  std::uniform_real_distribution<double> uf(f_lo, f_hi), us(s_lo, s_hi);
  std::vector<cpsl::DeviceState> out;
  for (int i = 0; i < n; ++i) {
    const double f = uf(rng);
    out.push_back({i, f, us(rng)});
  }
  return out;
}

// Random but plausible cut profile.
inline cpsl::CutProfile random_profile(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.1, 1.0);
  cpsl::CutProfile p;
  p.cut = 1;
  p.xi_d = u(rng) * 8e6;
  p.xi_s = u(rng) * 2e5;
  p.xi_g = 16 * p.xi_s * u(rng);
  p.gamma_d_f = p.gamma_d_b = u(rng) * 2e7;
  p.gamma_s_f = p.gamma_s_b = u(rng) * 1e8;
  return p;
}

}  // namespace testing
