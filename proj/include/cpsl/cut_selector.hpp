#pragma once

#include <cstdint>
#include <ostream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "cpsl/clusterer.hpp"

namespace cpsl {

struct SaaParams {
  int j_samples = 30;
  std::uint64_t seed = 0;
  GibbsParams gibbs;
  std::vector<int> candidates;  // 1-based cuts; empty means every cut

  void validate() const;
};

struct CutStats {
  int cut = 0;
  std::string layer;
  double mean = 0.0;
  double std = 0.0;  // sample standard deviation over the J draws
  double p025 = 0.0;
  double p975 = 0.0;
  std::vector<double> samples;
};

struct CutSelection {
  int v_star = 0;
  std::vector<CutStats> table;
};

// Device population for SAA sample j.
std::uint64_t sample_seed(std::uint64_t master, int j);
// Gibbs chain seed for sample j, shared by every candidate cut.
std::uint64_t chain_seed(std::uint64_t master, int j);

// profiles[v-1] describes cut v; names[v-1] labels it in the table.
CutSelection select_cut(const std::vector<CutProfile>& profiles,
                        const std::vector<std::string>& names, const EnvSpec& env,
                        const SaaParams& params, int jobs = 1);

// Linear interpolation between closest ranks (q in [0, 1]).
double percentile(std::vector<double> values, double q);

void write_cut_table_csv(std::ostream& os, const CutSelection& sel);
nlohmann::json cut_selection_to_json(const CutSelection& sel);

}  // namespace cpsl
