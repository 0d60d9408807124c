#include "cpsl/scenario.hpp"

#include <filesystem>
#include <fstream>

#include <fmt/format.h>

#include "cpsl/errors.hpp"

namespace cpsl {

namespace fs = std::filesystem;

const nlohmann::json& default_scenario_json() {
  static const nlohmann::json doc = [] {
    const TrainerConfig t;
    return nlohmann::json{
        {"seed", 0},
        {"model", "bundled"},
        {"profile_source", "override"},
        {"sweep_profile_source", "computed"},
        {"cut", 3},
        {"env", env_to_json(EnvSpec{})},
        {"latency_schemes", {"CPSL", "SL", "FL"}},
        {"gibbs", {{"delta", 1e-4}, {"iterations", 1000}, {"init", "sequential"}}},
        {"saa", {{"j_samples", 30}, {"candidates", nlohmann::json::array()}}},
        {"trainer",
         {{"schemes", {"CL", "SL", "CPSL", "FL"}},
          {"eta_d", t.eta_d},
          {"eta_e", t.eta_e},
          {"eta_fl", t.eta_fl},
          {"eta_cl", t.eta_cl},
          {"batch", t.batch},
          {"local_epochs", t.local_epochs},
          {"rounds", t.rounds},
          {"cut", t.cut},
          {"n_devices", t.n_devices},
          {"cluster_capacity", t.cluster_capacity},
          {"hidden", t.hidden},
          {"data",
           {{"n_classes", t.data.n_classes},
            {"dims", t.data.dims},
            {"samples_per_device", t.data.samples_per_device},
            {"classes_per_device", t.data.classes_per_device},
            {"separation", t.data.separation},
            {"test_per_class", t.data.test_per_class}}}}},
        {"out", "out"},
    };
  }();
  return doc;
}

std::uint64_t fnv1a64(const std::string& bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::uint64_t heterogeneous_seed(std::uint64_t master) { return derive_seed(master, 7); }
std::uint64_t population_seed(std::uint64_t master) { return derive_seed(master, 8); }

ProfileSource profile_source_from_string(const std::string& s) {
  if (s == "override") return ProfileSource::Override;
  if (s == "computed") return ProfileSource::Computed;
  throw ConfigError(fmt::format("profile source must be 'override' or 'computed', got '{}'", s));
}

std::string to_string(ProfileSource s) {
  return s == ProfileSource::Override ? "override" : "computed";
}

nlohmann::json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError(fmt::format("cannot open '{}'", path));
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError(fmt::format("{}: {}", path, e.what()));
  }
}

namespace {

template <typename T>
T get(const nlohmann::json& j, const char* key, const char* where) {
  try {
    return j.at(key).get<T>();
  } catch (const nlohmann::json::exception&) {
    throw ConfigError(fmt::format("{}: field '{}' missing or of the wrong type", where, key));
  }
}

InitMode init_from_string(const std::string& s) {
  if (s == "sequential") return InitMode::Sequential;
  if (s == "random") return InitMode::Random;
  throw ConfigError(fmt::format("gibbs.init must be 'sequential' or 'random', got '{}'", s));
}

}  // namespace

Scenario parse_scenario(const nlohmann::json& overrides, const std::string& base_dir) {
  if (!overrides.is_object()) throw ConfigError("scenario must be a JSON object");
  Scenario s;
  s.doc = default_scenario_json();
  s.doc.merge_patch(overrides);
  const auto& d = s.doc;

  s.seed = get<std::uint64_t>(d, "seed", "scenario");
  const auto model = get<std::string>(d, "model", "scenario");
  if (model == "bundled") {
    s.model = bundled_lenet();
  } else {
    fs::path p(model);
    if (p.is_relative()) p = fs::path(base_dir) / p;
    s.model = load_model_config_file(p.string());
  }
  s.profile_source = profile_source_from_string(get<std::string>(d, "profile_source", "scenario"));
  s.sweep_source =
      profile_source_from_string(get<std::string>(d, "sweep_profile_source", "scenario"));
  s.cut = get<int>(d, "cut", "scenario");
  if (s.cut < 1 || s.cut > static_cast<int>(s.model.layers.size())) {
    throw ValidationError(fmt::format("scenario: cut {} outside 1..{}", s.cut,
                                      s.model.layers.size()));
  }
  s.env = env_from_json(d.at("env"), EnvSpec{}, heterogeneous_seed(s.seed));
  s.latency_schemes = get<std::vector<std::string>>(d, "latency_schemes", "scenario");
  for (const auto& name : s.latency_schemes) {
    if (name != "CPSL" && name != "SL" && name != "FL") {
      throw ConfigError(fmt::format("latency scheme '{}' is not CPSL, SL or FL", name));
    }
  }

  const auto& g = d.at("gibbs");
  s.gibbs.delta = get<double>(g, "delta", "gibbs");
  s.gibbs.iterations = get<int>(g, "iterations", "gibbs");
  s.gibbs.init = init_from_string(get<std::string>(g, "init", "gibbs"));
  s.gibbs.seed = derive_seed(s.seed, 9);
  s.gibbs.validate();

  const auto& a = d.at("saa");
  s.saa.j_samples = get<int>(a, "j_samples", "saa");
  s.saa.candidates = get<std::vector<int>>(a, "candidates", "saa");
  s.saa.seed = s.seed;
  s.saa.gibbs = s.gibbs;
  s.saa.validate();

  const auto& t = d.at("trainer");
  for (const auto& name : get<std::vector<std::string>>(t, "schemes", "trainer")) {
    s.train_schemes.push_back(train_scheme_from_string(name));
  }
  auto& c = s.trainer;
  c.eta_d = get<double>(t, "eta_d", "trainer");
  c.eta_e = get<double>(t, "eta_e", "trainer");
  c.eta_fl = get<double>(t, "eta_fl", "trainer");
  c.eta_cl = get<double>(t, "eta_cl", "trainer");
  c.batch = get<int>(t, "batch", "trainer");
  c.local_epochs = get<int>(t, "local_epochs", "trainer");
  c.rounds = get<int>(t, "rounds", "trainer");
  c.cut = get<int>(t, "cut", "trainer");
  c.n_devices = get<int>(t, "n_devices", "trainer");
  c.cluster_capacity = get<int>(t, "cluster_capacity", "trainer");
  c.hidden = get<std::vector<int>>(t, "hidden", "trainer");
  c.seed = s.seed;
  const auto& dd = t.at("data");
  c.data.n_classes = get<int>(dd, "n_classes", "trainer.data");
  c.data.dims = get<int>(dd, "dims", "trainer.data");
  c.data.samples_per_device = get<int>(dd, "samples_per_device", "trainer.data");
  c.data.classes_per_device = get<int>(dd, "classes_per_device", "trainer.data");
  c.data.separation = get<double>(dd, "separation", "trainer.data");
  c.data.test_per_class = get<int>(dd, "test_per_class", "trainer.data");
  c.validate();

  s.out_dir = get<std::string>(d, "out", "scenario");
  return s;
}

Scenario load_scenario_file(const std::string& path) {
  const auto j = read_json_file(path);
  return parse_scenario(j, fs::path(path).parent_path().string().empty()
                               ? "."
                               : fs::path(path).parent_path().string());
}

// The output directory does not change results, so it is left out.
std::uint64_t Scenario::hash() const {
  auto d = doc;
  d.erase("out");
  return fnv1a64(d.dump());
}

std::string Scenario::header_comment() const {
  return fmt::format("# scenario_hash={:016x} seed={}", hash(), seed);
}

std::vector<CutProfile> Scenario::profiles(ProfileSource source) const {
  return model_profiles(model, env.batch, source);
}

std::vector<std::string> Scenario::layer_names() const {
  std::vector<std::string> names;
  for (const auto& l : model.layers) names.push_back(l.name);
  return names;
}

std::vector<DeviceState> Scenario::devices() const {
  return sample_devices(env, population_seed(seed));
}

}  // namespace cpsl
