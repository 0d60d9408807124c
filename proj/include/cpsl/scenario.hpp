#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "cpsl/cut_selector.hpp"
#include "cpsl/split_trainer.hpp"

namespace cpsl {

// Everything a CLI command needs, resolved from a scenario document.
struct Scenario {
  nlohmann::json doc;  // defaults merged with the file and CLI overrides
  std::uint64_t seed = 0;
  ModelConfig model;
  ProfileSource profile_source = ProfileSource::Override;
  ProfileSource sweep_source = ProfileSource::Computed;
  int cut = 3;
  EnvSpec env;
  std::vector<std::string> latency_schemes;
  GibbsParams gibbs;
  SaaParams saa;
  std::vector<TrainScheme> train_schemes;
  TrainerConfig trainer;
  std::string out_dir;

  std::uint64_t hash() const;
  // "# scenario_hash=<16 hex digits> seed=<n>"
  std::string header_comment() const;
  std::vector<CutProfile> profiles(ProfileSource source) const;
  std::vector<std::string> layer_names() const;
  // Device population for latency and optimization runs.
  std::vector<DeviceState> devices() const;
};

const nlohmann::json& default_scenario_json();

// `base_dir` resolves a relative model path.
Scenario parse_scenario(const nlohmann::json& overrides, const std::string& base_dir = ".");
Scenario load_scenario_file(const std::string& path);
nlohmann::json read_json_file(const std::string& path);

std::uint64_t fnv1a64(const std::string& bytes);

// Seeds derived from the master seed.
std::uint64_t heterogeneous_seed(std::uint64_t master);
std::uint64_t population_seed(std::uint64_t master);

ProfileSource profile_source_from_string(const std::string& s);
std::string to_string(ProfileSource s);

}  // namespace cpsl
