#include "cpsl/cut_selector.hpp"

#include <algorithm>
#include <cmath>

#include <fmt/format.h>

#include "cpsl/errors.hpp"
#include "cpsl/parallel.hpp"

namespace cpsl {

void SaaParams::validate() const {
  if (j_samples < 1) throw ValidationError("saa: j_samples must be >= 1");
  gibbs.validate();
}

std::uint64_t sample_seed(std::uint64_t master, int j) { return derive_seed(master, 2 * j); }

std::uint64_t chain_seed(std::uint64_t master, int j) { return derive_seed(master, 2 * j + 1); }

double percentile(std::vector<double> values, double q) {
  if (values.empty()) throw DomainError("percentile of an empty sample");
  std::sort(values.begin(), values.end());
  const double pos = q * static_cast<double>(values.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = std::min(lo + 1, values.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  return values[lo] + frac * (values[hi] - values[lo]);
}

CutSelection select_cut(const std::vector<CutProfile>& profiles,
                        const std::vector<std::string>& names, const EnvSpec& env,
                        const SaaParams& params, int jobs) {
  params.validate();
  env.validate();
  if (profiles.empty()) throw ValidationError("no cut profiles");
  if (names.size() != profiles.size()) throw ValidationError("one name per cut profile");
  std::vector<int> cuts = params.candidates;
  if (cuts.empty()) {
    for (std::size_t v = 1; v <= profiles.size(); ++v) cuts.push_back(static_cast<int>(v));
  }
  for (int v : cuts) {
    if (v < 1 || v > static_cast<int>(profiles.size())) {
      throw ValidationError(fmt::format("candidate cut {} out of range", v));
    }
  }

  const int J = params.j_samples;
  std::vector<std::vector<DeviceState>> populations(J);
  for (int j = 0; j < J; ++j) populations[j] = sample_devices(env, sample_seed(params.seed, j));

  const std::size_t nv = cuts.size();
  std::vector<double> theta(J * nv, 0.0);
  parallel_for(theta.size(), jobs, [&](std::size_t idx) {
    const int j = static_cast<int>(idx / nv);
    const std::size_t vi = idx % nv;
    GibbsParams g = params.gibbs;
    g.seed = chain_seed(params.seed, j);
    g.keep_trace = false;
    theta[idx] = gibbs_cluster(populations[j], profiles[cuts[vi] - 1], env, g).theta;
  });

  CutSelection sel;
  double best = 0.0;
  for (std::size_t vi = 0; vi < nv; ++vi) {
    CutStats s;
    s.cut = cuts[vi];
    s.layer = names[cuts[vi] - 1];
    for (int j = 0; j < J; ++j) s.samples.push_back(theta[j * nv + vi]);
    double sum = 0.0;
    for (double t : s.samples) sum += t;
    s.mean = sum / J;
    if (J > 1) {
      double ss = 0.0;
      for (double t : s.samples) ss += (t - s.mean) * (t - s.mean);
      s.std = std::sqrt(ss / (J - 1));
    }
    s.p025 = percentile(s.samples, 0.025);
    s.p975 = percentile(s.samples, 0.975);
    if (sel.table.empty() || s.mean < best) {
      best = s.mean;
      sel.v_star = s.cut;
    }
    sel.table.push_back(std::move(s));
  }
  return sel;
}

void write_cut_table_csv(std::ostream& os, const CutSelection& sel) {
  os << "cut,layer,mean_s,std_s,p2_5_s,p97_5_s\n";
  for (const auto& s : sel.table) {
    os << fmt::format("{},{},{:.17g},{:.17g},{:.17g},{:.17g}\n", s.cut, s.layer, s.mean, s.std,
                      s.p025, s.p975);
  }
}

nlohmann::json cut_selection_to_json(const CutSelection& sel) {
  nlohmann::json rows = nlohmann::json::array();
  for (const auto& s : sel.table) {
    rows.push_back({{"cut", s.cut},
                    {"layer", s.layer},
                    {"mean_s", s.mean},
                    {"std_s", s.std},
                    {"p2_5_s", s.p025},
                    {"p97_5_s", s.p975}});
  }
  return {{"v_star", sel.v_star}, {"table", rows}};
}

}  // namespace cpsl
