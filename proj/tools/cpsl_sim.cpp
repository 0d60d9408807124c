// cpsl-sim: command-line driver for the latency model, resource management
// and split-training simulations.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <fmt/format.h>

#include "cpsl/errors.hpp"
#include "cpsl/parallel.hpp"
#include "cpsl/scenario.hpp"
#include "cpsl/spectrum_allocator.hpp"

namespace fs = std::filesystem;
using namespace cpsl;

namespace {

enum Exit { kOk = 0, kInternal = 1, kConfig = 2, kInfeasible = 3, kGuard = 4 };

struct Common {
  std::string config;
  bool use_default = false;
  std::uint64_t seed = 0;
  bool seed_set = false;
  std::string out;
  int jobs = 1;
  int cut = 0;
  int clusters = 0;
  int devices = 0;
};

void add_common(CLI::App* cmd, Common& c) {
  cmd->add_option("--config", c.config, "scenario JSON file");
  cmd->add_flag("--default", c.use_default, "use the built-in homogeneous scenario");
  cmd->add_option_function<std::uint64_t>(
      "--seed", [&c](const std::uint64_t& v) { c.seed = v, c.seed_set = true; }, "master seed");
  cmd->add_option("--out", c.out, "output directory (overrides the scenario)");
  cmd->add_option("--jobs", c.jobs, "worker threads")->check(CLI::PositiveNumber);
}

void add_cut(CLI::App* cmd, Common& c) {
  cmd->add_option("--cut", c.cut, "cut layer (1-based)")->check(CLI::PositiveNumber);
}

void add_shape(CLI::App* cmd, Common& c) {
  cmd->add_option("--clusters", c.clusters, "number of clusters")->check(CLI::PositiveNumber);
  cmd->add_option("--devices", c.devices, "number of devices")->check(CLI::PositiveNumber);
}

nlohmann::json scenario_doc(const Common& c) {
  if (!c.config.empty() && c.use_default) {
    throw ConfigError("--config and --default are mutually exclusive");
  }
  nlohmann::json doc = c.config.empty() ? nlohmann::json::object() : read_json_file(c.config);
  if (c.seed_set) doc["seed"] = c.seed;
  if (c.cut > 0) doc["cut"] = c.cut;
  if (!c.out.empty()) doc["out"] = c.out;
  if (c.devices > 0 || c.clusters > 0) {
    auto env = default_scenario_json().at("env");
    env.merge_patch(doc.value("env", nlohmann::json::object()));
    const int n = c.devices > 0 ? c.devices : env.at("n_devices").get<int>();
    doc["env"]["n_devices"] = n;
    if (c.clusters > 0) {
      if (c.clusters > n) throw ValidationError("--clusters exceeds the number of devices");
      doc["env"]["cluster_capacity"] = (n + c.clusters - 1) / c.clusters;
    } else if (env.at("cluster_capacity").get<int>() > n) {
      doc["env"]["cluster_capacity"] = n;
    }
  }
  return doc;
}

std::string base_dir(const Common& c) {
  const auto parent = fs::path(c.config).parent_path();
  return parent.empty() ? "." : parent.string();
}

Scenario load(const Common& c) { return parse_scenario(scenario_doc(c), base_dir(c)); }

// Files are buffered and written by commit(), so a failing command leaves no
// partial output behind.
class Output {
 public:
  explicit Output(const Scenario& s) : s_(s) {}

  void csv(const std::string& name, const std::string& body) {
    pending_.emplace_back(name, s_.header_comment() + "\n" + body);
  }
  void json(const std::string& name, nlohmann::json j) {
    j["scenario_hash"] = fmt::format("{:016x}", s_.hash());
    j["seed"] = s_.seed;
    pending_.emplace_back(name, j.dump(2) + "\n");
  }
  int commit() const {
    const fs::path dir(s_.out_dir);
    fs::create_directories(dir);
    for (const auto& [name, text] : pending_) {
      const auto path = dir / name;
      std::ofstream f(path, std::ios::binary);
      if (!(f << text)) throw ConfigError(fmt::format("cannot write '{}'", path.string()));
      std::cout << path.string() << "\n";
    }
    return 0;
  }

 private:
  const Scenario& s_;
  std::vector<std::pair<std::string, std::string>> pending_;
};

template <typename Fn>
std::string render(Fn&& fn) {
  std::ostringstream os;
  fn(os);
  return os.str();
}

const CutProfile& cut_profile(const Scenario& s, const std::vector<CutProfile>& profiles) {
  return profiles.at(s.cut - 1);
}

int cmd_profile(const Common& c, const std::string& source) {
  const auto s = load(c);
  const auto src = source.empty() ? s.profile_source : profile_source_from_string(source);
  auto profiles = s.profiles(src);
  if (c.cut > 0) profiles = {profiles.at(c.cut - 1)};
  Output out(s);
  out.csv("profile.csv",
          render([&](std::ostream& os) { write_profiles_csv(os, profiles, s.model.layers); }));
  return out.commit();
}

nlohmann::json sweep(const Scenario& s, Output& out, int jobs) {
  const auto sel = select_cut(s.profiles(s.sweep_source), s.layer_names(), s.env, s.saa, jobs);
  out.csv("cut_sweep.csv", render([&](std::ostream& os) { write_cut_table_csv(os, sel); }));
  auto j = cut_selection_to_json(sel);
  j["profile_source"] = to_string(s.sweep_source);
  j["j_samples"] = s.saa.j_samples;
  return j;
}

int cmd_latency(const Common& c, bool sweep_cut) {
  const auto s = load(c);
  Output out(s);
  const auto devices = s.devices();
  const auto profiles = s.profiles(s.profile_source);
  const auto& p = cut_profile(s, profiles);

  nlohmann::json totals = nlohmann::json::object();
  for (const auto& name : s.latency_schemes) {
    RoundLatency round;
    if (name == "CPSL") {
      const auto r = gibbs_cluster(devices, p, s.env, s.gibbs);
      round = cpsl_round_latency(r.assignment, r.allocations, devices, p, s.env);
    } else if (name == "SL") {
      round = vanilla_sl_round_latency(devices, p, s.env);
    } else {
      round = fl_round_latency(devices, profiles.back(), s.env);
    }
    totals[name] = round.total;
    out.csv(fmt::format("latency_{}.csv", name),
            render([&](std::ostream& os) { write_round_csv(os, round); }));
  }
  nlohmann::json summary{
      {"cut", s.cut},
      {"layer", s.model.layers.at(s.cut - 1).name},
      {"profile_source", to_string(s.profile_source)},
      {"n_devices", s.env.n_devices},
      {"clusters", s.env.cluster_count()},
      {"round_latency_s", totals},
      // expected per-round values for the homogeneous setup, for comparison only
      {"reference_s", {{"CPSL", 3.78}, {"SL", 13.90}, {"FL", 33.43}}},
  };
  if (sweep_cut) summary["cut_sweep"] = sweep(s, out, c.jobs);
  out.json("latency_summary.json", summary);
  return out.commit();
}

int cmd_sweep(const Common& c) {
  const auto s = load(c);
  Output out(s);
  out.json("cut_sweep.json", sweep(s, out, c.jobs));
  return out.commit();
}

int cmd_optimize(const Common& c, const std::string& baseline, int seeds, bool oracle) {
  const auto s = load(c);
  Output out(s);
  const auto profiles = s.profiles(s.profile_source);
  const auto& p = cut_profile(s, profiles);
  const auto devices = s.devices();

  const auto r = gibbs_cluster(devices, p, s.env, s.gibbs);
  out.csv("trace.csv", render([&](std::ostream& os) { write_trace_csv(os, r.trace); }));
  auto j = clustering_to_json(r);
  j["cut"] = s.cut;
  j["delta"] = s.gibbs.delta;
  j["iterations"] = s.gibbs.iterations;
  if (oracle) {
    const auto o = cluster_exhaustive(devices, p, s.env);
    j["oracle"] = clustering_to_json(o);
    j["oracle_gap"] = (r.theta - o.theta) / o.theta;
  }
  out.json("assignment.json", j);

  if (!baseline.empty()) {
    if (baseline != "random" && baseline != "heuristic") {
      throw ConfigError("--baseline must be 'random' or 'heuristic'");
    }
    std::vector<double> proposed(seeds), base(seeds);
    std::vector<std::uint64_t> run_seeds(seeds);
    for (int k = 0; k < seeds; ++k) run_seeds[k] = derive_seed(s.seed, 100 + k);
    parallel_for(static_cast<std::size_t>(seeds), c.jobs, [&](std::size_t k) {
      auto doc = s.doc;
      doc["seed"] = run_seeds[k];
      const auto sk = parse_scenario(doc, base_dir(c));
      const auto dk = sk.devices();
      const auto pk = sk.profiles(sk.profile_source).at(sk.cut - 1);
      proposed[k] = gibbs_cluster(dk, pk, sk.env, sk.gibbs).theta;
      base[k] = baseline == "random"
                    ? cluster_random(dk, pk, sk.env, derive_seed(run_seeds[k], 10)).theta
                    : cluster_heuristic(dk, pk, sk.env).theta;
    });
    double mp = 0.0, mb = 0.0;
    std::string body = fmt::format("run,seed,proposed_s,{}_s\n", baseline);
    for (int k = 0; k < seeds; ++k) {
      body += fmt::format("{},{},{:.17g},{:.17g}\n", k, run_seeds[k], proposed[k], base[k]);
      mp += proposed[k];
      mb += base[k];
    }
    mp /= seeds;
    mb /= seeds;
    out.csv(fmt::format("baseline_{}.csv", baseline), body);
    out.json(fmt::format("baseline_{}.json", baseline),
             {{"baseline", baseline},
              {"runs", seeds},
              {"proposed_mean_s", mp},
              {"baseline_mean_s", mb},
              {"reduction", 1.0 - mp / mb}});
  }
  return out.commit();
}

double simulated_round(const Scenario& s, TrainScheme scheme) {
  const auto devices = s.devices();
  const auto profiles = s.profiles(s.profile_source);
  const auto& p = cut_profile(s, profiles);
  switch (scheme) {
    case TrainScheme::CPSL: {
      const auto a = ClusterAssignment::sequential(s.env.n_devices, s.env.cluster_capacity);
      return evaluate_assignment(a, devices, p, s.env).theta;
    }
    case TrainScheme::SL:
      return vanilla_sl_round_latency(devices, p, s.env).total;
    case TrainScheme::FL:
      return fl_round_latency(devices, profiles.back(), s.env).total;
    case TrainScheme::CL:
      return 0.0;
  }
  return 0.0;
}

int cmd_train(const Common& c, int rounds) {
  auto doc = scenario_doc(c);
  if (rounds >= 0) doc["trainer"]["rounds"] = rounds;
  const auto s = parse_scenario(doc, base_dir(c));
  Output out(s);
  nlohmann::json finals = nlohmann::json::object();
  for (const auto scheme : s.train_schemes) {
    auto cfg = s.trainer;
    cfg.round_latency_s = simulated_round(s, scheme);
    const auto m = run_training(scheme, cfg);
    const auto name = to_string(scheme);
    out.csv(fmt::format("metrics_{}.csv", name),
            render([&](std::ostream& os) { write_metrics_csv(os, m); }));
    out.json(fmt::format("checkpoint_{}.json", name), checkpoint_to_json(m.model));
    const auto& last = m.rounds.empty() ? RoundMetrics{} : m.rounds.back();
    finals[name] = {{"loss", last.loss},
                    {"train_acc", last.train_acc},
                    {"test_acc", last.test_acc},
                    {"simulated_elapsed_s", last.simulated_elapsed_s}};
  }
  out.json("train_summary.json", {{"rounds", s.trainer.rounds}, {"final", finals}});
  return out.commit();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"split learning latency and resource management simulator", "cpsl-sim"};
  app.require_subcommand(1);

  Common c;
  std::string source;
  bool sweep_cut = false;
  std::string baseline;
  int seeds = 1;
  bool oracle = false;
  int rounds = -1;

  auto* profile = app.add_subcommand("profile", "per-cut sizes and workloads");
  add_common(profile, c);
  add_cut(profile, c);
  profile->add_option("--source", source, "override | computed");

  auto* latency = app.add_subcommand("latency", "per-round latency of CPSL, SL and FL");
  add_common(latency, c);
  add_cut(latency, c);
  add_shape(latency, c);
  latency->add_flag("--sweep-cut", sweep_cut, "also run the cut-layer sweep");

  auto* optimize = app.add_subcommand("optimize", "device clustering and spectrum allocation");
  add_common(optimize, c);
  add_cut(optimize, c);
  add_shape(optimize, c);
  optimize->add_option("--baseline", baseline, "random | heuristic");
  optimize->add_option("--seeds", seeds, "runs for the baseline comparison")
      ->check(CLI::PositiveNumber);
  optimize->add_flag("--oracle", oracle, "compare against exhaustive clustering");

  auto* train = app.add_subcommand("train", "split training on synthetic data");
  add_common(train, c);
  train->add_option("--rounds", rounds, "override trainer rounds")->check(CLI::NonNegativeNumber);

  auto* sweep_cmd = app.add_subcommand("sweep", "sample-average cut-layer selection");
  add_common(sweep_cmd, c);
  add_shape(sweep_cmd, c);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kOk : kConfig;
  }

  try {
    if (*profile) return cmd_profile(c, source);
    if (*latency) return cmd_latency(c, sweep_cut);
    if (*optimize) return cmd_optimize(c, baseline, seeds, oracle);
    if (*train) return cmd_train(c, rounds);
    if (*sweep_cmd) return cmd_sweep(c);
  } catch (const InfeasibleError& e) {
    std::cerr << "infeasible: " << e.what() << "\n";
    return kInfeasible;
  } catch (const GuardError& e) {
    std::cerr << "refused: " << e.what() << "\n";
    return kGuard;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kConfig;
  } catch (const fs::filesystem_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kConfig;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << "\n";
    return kInternal;
  }
  return kOk;
}
