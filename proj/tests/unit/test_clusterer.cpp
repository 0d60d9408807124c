#include <doctest.h>

#include <cmath>
#include <limits>
#include <map>
#include <set>
#include <sstream>

#include "cpsl/clusterer.hpp"
#include "cpsl/errors.hpp"
#include "cpsl/spectrum_allocator.hpp"
#include "support.hpp"

using namespace cpsl;

namespace {

using Partition = std::set<std::vector<int>>;

// Every labelling of n devices into clusters of `cap` (remainder last),
// collapsed to unlabeled partitions.
std::set<Partition> all_partitions(int n, int cap) {
  const int m = (n + cap - 1) / cap;
  std::vector<int> sizes(m, cap);
  if (n % cap) sizes.back() = n % cap;
  std::set<Partition> out;
  std::vector<int> label(n, 0);
  std::function<void(int, std::vector<int>&)> rec = [&](int i, std::vector<int>& used) {
    if (i == n) {
      std::vector<std::vector<int>> cl(m);
      for (int d = 0; d < n; ++d) cl[label[d]].push_back(d);
      out.insert(Partition(cl.begin(), cl.end()));
      return;
    }
    for (int c = 0; c < m; ++c) {
      if (used[c] == sizes[c]) continue;
      label[i] = c;
      ++used[c];
      rec(i + 1, used);
      --used[c];
    }
  };
  std::vector<int> used(m, 0);
  rec(0, used);
  return out;
}

double oracle_theta(const std::vector<DeviceState>& ds, const CutProfile& p, const EnvSpec& e) {
  double best = std::numeric_limits<double>::infinity();
  for (const auto& part : all_partitions(static_cast<int>(ds.size()), e.cluster_capacity)) {
    double t = 0;
    for (const auto& c : part) t += allocate_exhaustive(select_devices(ds, c), p, e).latency;
    best = std::min(best, t);
  }
  return best;
}

EnvSpec small_env(int n, int cap, int c) {
  EnvSpec e;
  e.n_devices = n;
  e.cluster_capacity = cap;
  e.subcarriers = c;
  return e;
}

void check_partition(const ClusterAssignment& a, int n, int cap) {
  CHECK_NOTHROW(a.validate(cap));
  auto mat = a.matrix();
  REQUIRE(static_cast<int>(mat.size()) == n);
  for (const auto& row : mat) CHECK(std::accumulate(row.begin(), row.end(), 0) == 1);
}

}  // namespace

TEST_CASE("acceptance probability values") {
  CHECK(acceptance_probability(3.0, 3.0, 1e-4) == 0.5);
  CHECK(acceptance_probability(1.0, 1.0 - 10 * 1e-4, 1e-4) ==
        doctest::Approx(1 / (1 + std::exp(-10.0))).epsilon(1e-9));
  CHECK(acceptance_probability(1.0, 1.0 + 10 * 1e-4, 1e-4) ==
        doctest::Approx(4.5398899e-5).epsilon(1e-6));
  CHECK_THROWS_AS(acceptance_probability(1.0, 2.0, 0.0), DomainError);
}

TEST_CASE("acceptance probability is monotone and saturates") {
  const double inf = std::numeric_limits<double>::infinity();
  double prev = 1.0;
  for (double d = -1.0; d <= 1.0; d += 0.01) {
    const double p = acceptance_probability(5.0, 5.0 + d, 0.1);
    CHECK(p <= prev);
    CHECK(p >= 0.0);
    CHECK(p <= 1.0);
    prev = p;
  }
  CHECK(acceptance_probability(1.0, inf, 1e-4) == 0.0);
  CHECK(acceptance_probability(inf, 1.0, 1e-4) == 1.0);
  CHECK(acceptance_probability(0.0, 1e300, 1e-300) == 0.0);
  CHECK(acceptance_probability(1e300, 0.0, 1e-300) == 1.0);
  CHECK(acceptance_probability(1.0, 1.001, 1e-12) == doctest::Approx(0.0));
  CHECK(acceptance_probability(1.001, 1.0, 1e-12) == doctest::Approx(1.0));
}

TEST_CASE("swap on two singletons") {
  std::mt19937_64 rng(1);
  auto a = ClusterAssignment::sequential(2, 1);
  auto b = propose_swap(a, rng);
  CHECK(b.members(0) == std::vector<int>{1});
  CHECK(b.members(1) == std::vector<int>{0});
}

TEST_CASE("swap keeps cluster sizes and picks pairs uniformly") {
  std::mt19937_64 rng(7);
  auto a = ClusterAssignment::sequential(6, 2);
  std::map<std::pair<int, int>, int> pairs;
  const int draws = 10000;
  for (int t = 0; t < draws; ++t) {
    auto b = propose_swap(a, rng);
    check_partition(b, 6, 2);
    std::vector<int> touched;
    for (int m = 0; m < 3; ++m) {
      CHECK(b.members(m).size() == 2);
      if (b.members(m) != a.members(m)) touched.push_back(m);
    }
    REQUIRE(touched.size() == 2);
    ++pairs[{touched[0], touched[1]}];
  }
  REQUIRE(pairs.size() == 3);
  const double sigma = std::sqrt(draws * (1.0 / 3) * (2.0 / 3));
  for (const auto& [k, v] : pairs) CHECK(std::abs(v - draws / 3.0) < 3 * sigma);
}

TEST_CASE("swap with one cluster is a no-op") {
  std::mt19937_64 rng(1);
  auto a = ClusterAssignment::sequential(4, 4);
  CHECK(propose_swap(a, rng) == a);
}

TEST_CASE("partition counts") {
  CHECK(partition_count(4, 2) == 3);
  CHECK(partition_count(6, 2) == 15);
  CHECK(partition_count(8, 4) == 35);
  CHECK(partition_count(7, 3) == 70);
  for (auto [n, k] : {std::pair{4, 2}, {6, 2}, {6, 3}, {7, 3}, {8, 4}, {5, 2}}) {
    CAPTURE(n);
    CAPTURE(k);
    CHECK(all_partitions(n, k).size() == partition_count(n, k));
  }
}

TEST_CASE("exhaustive clustering matches an independent enumeration") {
  std::mt19937_64 rng(3);
  for (auto [n, k, c] : {std::tuple{4, 2, 6}, {6, 2, 5}, {6, 3, 8}, {7, 3, 6}}) {
    auto e = small_env(n, k, c);
    auto ds = testing::random_devices(n, rng);
    auto p = testing::pool1_profile();
    auto r = cluster_exhaustive(ds, p, e);
    check_partition(r.assignment, n, k);
    CHECK(r.theta == doctest::Approx(oracle_theta(ds, p, e)).epsilon(1e-12));
  }
}

TEST_CASE("gibbs finds the optimum on four devices") {
  std::mt19937_64 rng(11);
  for (int s = 0; s < 10; ++s) {
    auto e = small_env(4, 2, 6);
    auto ds = testing::random_devices(4, rng);
    auto p = testing::pool1_profile();
    GibbsParams g;
    g.iterations = 500;
    g.seed = s;
    auto r = gibbs_cluster(ds, p, e, g);
    auto o = cluster_exhaustive(ds, p, e);
    CHECK(o.theta <= r.theta + 1e-12);
    CHECK(r.theta == doctest::Approx(o.theta).epsilon(1e-9));
  }
}

TEST_CASE("identical devices leave the objective unchanged") {
  EnvSpec e;
  GibbsParams g;
  g.iterations = 200;
  auto ds = testing::uniform_devices(30);
  auto r = gibbs_cluster(ds, testing::pool1_profile(), e, g);
  CHECK(r.theta == r.trace.front().theta);
  for (const auto& row : r.trace) CHECK(row.theta == r.theta);
}

TEST_CASE("chain bookkeeping") {
  std::mt19937_64 rng(13);
  EnvSpec e;
  auto ds = testing::random_devices(30, rng);
  auto p = testing::pool1_profile();
  GibbsParams g;
  g.iterations = 300;
  g.seed = 4;
  auto r = gibbs_cluster(ds, p, e, g);
  REQUIRE(r.trace.size() == 301);
  check_partition(r.assignment, 30, 5);
  double best = r.trace[0].theta;
  for (std::size_t i = 1; i < r.trace.size(); ++i) {
    CHECK(r.trace[i].iteration == static_cast<int>(i));
    best = std::min(best, r.trace[i].theta);
    CHECK(r.trace[i].best == best);
    CHECK(r.trace[i].best <= r.trace[i - 1].best);
  }
  CHECK(r.theta == best);
  // returned state is consistent with a fresh evaluation
  auto fresh = evaluate_assignment(r.assignment, ds, p, e);
  CHECK(fresh.theta == r.theta);
  CHECK(fresh.allocations == r.allocations);
}

TEST_CASE("every state the chain holds is a valid partition") {
  std::mt19937_64 rng(17);
  auto a = ClusterAssignment::sequential(17, 4);
  for (int t = 0; t < 2000; ++t) {
    a = propose_swap(a, rng);
    check_partition(a, 17, 4);
  }
}

TEST_CASE("longer chains never end worse") {
  std::mt19937_64 rng(19);
  EnvSpec e;
  auto ds = testing::random_devices(30, rng);
  auto p = testing::pool1_profile();
  double prev = std::numeric_limits<double>::infinity();
  for (int iters : {1, 10, 50, 200, 800}) {
    GibbsParams g;
    g.iterations = iters;
    g.seed = 8;
    const double t = gibbs_cluster(ds, p, e, g).theta;
    CHECK(t <= prev);
    prev = t;
  }
}

TEST_CASE("chains are reproducible") {
  std::mt19937_64 rng(23);
  EnvSpec e;
  auto ds = testing::random_devices(30, rng);
  GibbsParams g;
  g.iterations = 200;
  g.seed = 42;
  g.init = InitMode::Random;
  auto a = gibbs_cluster(ds, testing::pool1_profile(), e, g);
  auto b = gibbs_cluster(ds, testing::pool1_profile(), e, g);
  CHECK(a.assignment == b.assignment);
  CHECK(a.theta == b.theta);
  REQUIRE(a.trace.size() == b.trace.size());
  for (std::size_t i = 0; i < a.trace.size(); ++i) {
    CHECK(a.trace[i].theta == b.trace[i].theta);
    CHECK(a.trace[i].accepted == b.trace[i].accepted);
  }
}

TEST_CASE("a large smoothing factor does worse on average") {
  EnvSpec base;
  double sum_small = 0, sum_large = 0;
  const int seeds = 50;
  for (int s = 0; s < seeds; ++s) {
    EnvSpec e = base;
    e.f_std = 0.05e9;
    e.snr_std_db = 2.0;
    draw_heterogeneous_means(e, 0.1e9, 1.0e9, 5.0, 30.0, derive_seed(s, 1));
    auto ds = sample_devices(e, derive_seed(s, 2));
    GibbsParams g;
    g.seed = s;
    g.keep_trace = false;
    g.delta = 1e-4;
    sum_small += gibbs_cluster(ds, testing::pool1_profile(), e, g).theta;
    g.delta = 1e-2;
    sum_large += gibbs_cluster(ds, testing::pool1_profile(), e, g).theta;
  }
  MESSAGE("mean theta small delta ", sum_small / seeds, ", large delta ", sum_large / seeds);
  CHECK(sum_large > sum_small);
}

TEST_CASE("baselines produce valid partitions") {
  std::mt19937_64 rng(29);
  EnvSpec e;
  auto ds = testing::random_devices(30, rng);
  auto p = testing::pool1_profile();
  auto r = cluster_random(ds, p, e, 5);
  check_partition(r.assignment, 30, 5);
  CHECK(cluster_random(ds, p, e, 5).assignment == r.assignment);
  auto h = cluster_heuristic(ds, p, e);
  check_partition(h.assignment, 30, 5);
  // fastest five devices share the first cluster
  std::vector<int> order(30);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](int a, int b) { return ds[a].f > ds[b].f; });
  std::vector<int> top(order.begin(), order.begin() + 5);
  std::sort(top.begin(), top.end());
  CHECK(h.assignment.members(0) == top);
}

TEST_CASE("remainder cluster") {
  std::mt19937_64 rng(31);
  auto e = small_env(7, 3, 6);
  auto ds = testing::random_devices(7, rng);
  auto r = cluster_exhaustive(ds, testing::pool1_profile(), e);
  CHECK(r.assignment.cluster_count() == 3);
  CHECK(r.assignment.members(2).size() == 1);
  GibbsParams g;
  g.iterations = 300;
  auto gr = gibbs_cluster(ds, testing::pool1_profile(), e, g);
  check_partition(gr.assignment, 7, 3);
  CHECK(r.theta <= gr.theta + 1e-12);
}

TEST_CASE("clustering errors") {
  auto p = testing::pool1_profile();
  EnvSpec e;
  GibbsParams g;
  g.delta = 0;
  CHECK_THROWS_AS(gibbs_cluster(testing::uniform_devices(30), p, e, g), ValidationError);
  g = {};
  g.iterations = 0;
  CHECK_THROWS_AS(gibbs_cluster(testing::uniform_devices(30), p, e, g), ValidationError);
  CHECK_THROWS_AS(cluster_exhaustive(testing::uniform_devices(30), p, e), GuardError);
  auto tight = small_env(6, 3, 2);
  CHECK_THROWS_AS(gibbs_cluster(testing::uniform_devices(6), p, tight, {}), InfeasibleError);
  auto shuffled = testing::uniform_devices(4);
  std::swap(shuffled[0], shuffled[1]);
  CHECK_THROWS_AS(gibbs_cluster(shuffled, p, small_env(4, 2, 6), {}), ValidationError);
}

TEST_CASE("single cluster returns the initial state") {
  auto e = small_env(4, 4, 8);
  GibbsParams g;
  auto r = gibbs_cluster(testing::uniform_devices(4), testing::pool1_profile(), e, g);
  CHECK(r.assignment.cluster_count() == 1);
  CHECK(r.trace.size() == 1);
}

TEST_CASE("trace csv") {
  std::ostringstream os;
  write_trace_csv(os, {{0, 1.5, 1.5, false}, {1, 1.25, 1.25, true}});
  CHECK(os.str() == "iteration,theta_s,best_s,accepted\n0,1.5,1.5,0\n1,1.25,1.25,1\n");
}
