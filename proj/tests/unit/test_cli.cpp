#include <doctest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "cpsl/errors.hpp"
#include "cpsl/scenario.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

const std::string kBin = CPSL_SIM_BIN;
const std::string kScenarios = std::string(CPSL_SOURCE_DIR) + "/scenarios";

fs::path scratch(const std::string& name) {
  auto p = fs::temp_directory_path() / fmt::format("cpsl_cli_{}_{}", ::getpid(), name);
  fs::remove_all(p);
  return p;
}

int run(const std::string& args) {
  const int rc = std::system(fmt::format("{} {} >/dev/null 2>&1", kBin, args).c_str());
  return WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::vector<std::string> lines(const fs::path& p) {
  std::vector<std::string> out;
  std::istringstream is(slurp(p));
  for (std::string l; std::getline(is, l);) out.push_back(l);
  return out;
}

fs::path write_config(const std::string& name, const json& j) {
  auto p = fs::temp_directory_path() / fmt::format("cpsl_cli_{}_{}.json", ::getpid(), name);
  std::ofstream(p) << j.dump(2);
  return p;
}

}  // namespace

TEST_CASE("scenario hash and header") {
  auto a = cpsl::parse_scenario(json::object());
  auto b = cpsl::parse_scenario({{"out", "elsewhere"}});
  auto c = cpsl::parse_scenario({{"seed", 1}});
  CHECK(a.hash() == b.hash());
  CHECK(a.hash() != c.hash());
  CHECK(a.header_comment() == fmt::format("# scenario_hash={:016x} seed=0", a.hash()));
  CHECK(cpsl::fnv1a64("") == 0xcbf29ce484222325ULL);
  CHECK(cpsl::fnv1a64("a") == 0xaf63dc4c8601ec8cULL);
  CHECK(a.env.n_devices == 30);
  CHECK(a.cut == 3);
  CHECK_THROWS_AS(cpsl::parse_scenario({{"profile_source", "guess"}}), cpsl::ConfigError);
  CHECK_THROWS_AS(cpsl::load_scenario_file("/nonexistent.json"), cpsl::ConfigError);
}

TEST_CASE("heterogeneous scenario draws means from the master seed") {
  auto s0 = cpsl::load_scenario_file(kScenarios + "/heterogeneous.json");
  REQUIRE(s0.env.f_mean.size() == 30);
  auto doc = s0.doc;
  doc["seed"] = s0.seed + 1;
  auto other = cpsl::parse_scenario(doc);
  CHECK(other.env.f_mean != s0.env.f_mean);
  doc["seed"] = s0.seed;
  CHECK(cpsl::parse_scenario(doc).env.f_mean == s0.env.f_mean);
}

TEST_CASE("profile command") {
  auto d = scratch("profile");
  REQUIRE(run(fmt::format("profile --default --out {}", d.string())) == 0);
  auto ls = lines(d / "profile.csv");
  REQUIRE(ls.size() == 14);
  CHECK(ls[0].rfind("# scenario_hash=", 0) == 0);
  CHECK(ls[0].find(" seed=0") != std::string::npos);
  CHECK(ls[1].rfind("cut,layer,", 0) == 0);

  auto one = scratch("profile_one");
  REQUIRE(run(fmt::format("profile --default --cut 3 --out {}", one.string())) == 0);
  auto ol = lines(one / "profile.csv");
  REQUIRE(ol.size() == 3);
  CHECK(ol[2].rfind("3,POOL1,", 0) == 0);

  auto comp = scratch("profile_computed");
  REQUIRE(run(fmt::format("profile --default --source computed --out {}", comp.string())) == 0);
  auto cl = lines(comp / "profile.csv");
  REQUIRE(cl.size() == 14);
  for (int v = 1; v <= 12; ++v) {
    CAPTURE(v);
    CHECK((cl[v + 1] == ls[v + 1]) == (v != 3 && v != 12));
  }
  CHECK(run(fmt::format("profile --default --cut 13 --out {}", one.string())) == 2);
}

TEST_CASE("latency command") {
  auto d = scratch("latency");
  REQUIRE(run(fmt::format("latency --default --out {}", d.string())) == 0);
  auto j = json::parse(slurp(d / "latency_summary.json"));
  const auto& r = j["round_latency_s"];
  CHECK(r["CPSL"].get<double>() < r["SL"].get<double>());
  CHECK(r["SL"].get<double>() < r["FL"].get<double>());
  CHECK(fs::exists(d / "latency_CPSL.csv"));
  CHECK(lines(d / "latency_FL.csv")[0] == lines(d / "latency_CPSL.csv")[0]);

  auto one = scratch("latency_one");
  REQUIRE(run(fmt::format("latency --default --clusters 1 --devices 1 --out {}", one.string())) == 0);
  auto k = json::parse(slurp(one / "latency_summary.json"));
  CHECK(k["round_latency_s"]["CPSL"].get<double>() ==
        doctest::Approx(k["round_latency_s"]["SL"].get<double>()).epsilon(1e-12));
}

TEST_CASE("reruns are byte identical") {
  auto a = scratch("rerun_a"), b = scratch("rerun_b");
  const auto cfg = kScenarios + "/toy_n4.json";
  REQUIRE(run(fmt::format("optimize --config {} --out {}", cfg, a.string())) == 0);
  REQUIRE(run(fmt::format("optimize --config {} --out {}", cfg, b.string())) == 0);
  for (const auto* f : {"trace.csv", "assignment.json"}) {
    CAPTURE(f);
    CHECK(slurp(a / f) == slurp(b / f));
    CHECK(!slurp(a / f).empty());
  }
  auto c = scratch("rerun_c");
  REQUIRE(run(fmt::format("optimize --config {} --seed 4 --out {}", cfg, c.string())) == 0);
  CHECK(slurp(a / "trace.csv") != slurp(c / "trace.csv"));
}

TEST_CASE("optimize against the oracle") {
  auto d = scratch("oracle");
  REQUIRE(run(fmt::format("optimize --config {}/toy_n4.json --oracle --out {}", kScenarios,
                          d.string())) == 0);
  auto j = json::parse(slurp(d / "assignment.json"));
  CHECK(j["oracle_gap"].get<double>() <= 1e-12);
  CHECK(j.contains("scenario_hash"));
  CHECK(lines(d / "trace.csv").size() == 2 + 501);
}

TEST_CASE("baseline comparison") {
  auto d = scratch("baseline");
  REQUIRE(run(fmt::format("optimize --config {}/toy_n4.json --baseline random --seeds 3 --out {}",
                          kScenarios, d.string())) == 0);
  CHECK(fs::exists(d / "baseline_random.csv"));
  CHECK(fs::exists(d / "baseline_random.json"));
  CHECK(run(fmt::format("optimize --default --baseline nearest --out {}", d.string())) == 2);
}

TEST_CASE("train command") {
  auto d = scratch("train");
  REQUIRE(run(fmt::format("train --default --rounds 2 --out {}", d.string())) == 0);
  for (const auto* s : {"CL", "SL", "CPSL", "FL"}) {
    CAPTURE(s);
    auto ls = lines(d / fmt::format("metrics_{}.csv", s));
    REQUIRE(ls.size() == 4);
    CHECK(ls[1] == "round,loss,train_acc,test_acc,simulated_elapsed_s");
    CHECK(fs::exists(d / fmt::format("checkpoint_{}.json", s)));
  }
  CHECK(fs::exists(d / "train_summary.json"));
}

TEST_CASE("sweep command") {
  auto cfg = write_config("sweep", {{"saa", {{"j_samples", 2}}}, {"gibbs", {{"iterations", 10}}}});
  auto d = scratch("sweep");
  REQUIRE(run(fmt::format("sweep --config {} --jobs 2 --out {}", cfg.string(), d.string())) == 0);
  auto ls = lines(d / "cut_sweep.csv");
  REQUIRE(ls.size() == 14);
  CHECK(ls[1] == "cut,layer,mean_s,std_s,p2_5_s,p97_5_s");
  auto j = json::parse(slurp(d / "cut_sweep.json"));
  CHECK(j["v_star"].get<int>() >= 1);
}

TEST_CASE("exit codes") {
  auto d = scratch("codes");
  CHECK(run("latency --config /nonexistent/scenario.json") == 2);
  CHECK(run("latency --default --no-such-flag") == 2);
  CHECK(run(fmt::format("latency --default --config {}/toy_n4.json", kScenarios)) == 2);
  CHECK(run("") == 2);
  CHECK(run(fmt::format("latency --default --devices 40 --out {}", d.string())) == 3);
  CHECK(run(fmt::format("optimize --default --oracle --out {}", d.string())) == 4);
  // failed runs leave nothing behind
  CHECK(!fs::exists(d / "latency_summary.json"));
  auto bad = write_config("bad", {{"env", {{"batch", "sixteen"}}}});
  CHECK(run(fmt::format("latency --config {} --out {}", bad.string(), d.string())) == 2);
  auto broken = fs::temp_directory_path() / fmt::format("cpsl_cli_{}_broken.json", ::getpid());
  std::ofstream(broken) << "{ not json";
  CHECK(run(fmt::format("profile --config {} --out {}", broken.string(), d.string())) == 2);
}
