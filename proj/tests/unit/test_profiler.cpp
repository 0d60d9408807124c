#include <doctest.h>

#include <fstream>
#include <sstream>

#include "cpsl/errors.hpp"
#include "cpsl/model_profiler.hpp"
#include "support.hpp"

using namespace cpsl;
using nlohmann::json;

namespace {

// Hand-counted per-layer MACs and parameters for the bundled LeNet.
// 28x28x1 -> 26x26x32 -> 24x24x32 -> 12x12x32 -> 12x12x64 -> 12x12x64
// -> 6x6x64 -> 6x6x128 -> 6x6x128 -> 3x3x128 -> 382 -> 192 -> 10
const double kFlops[] = {26.0 * 26 * 9 * 1 * 32, 24.0 * 24 * 9 * 32 * 32, 0,
                         12.0 * 12 * 9 * 32 * 64, 12.0 * 12 * 9 * 64 * 64, 0,
                         6.0 * 6 * 9 * 64 * 128,  6.0 * 6 * 9 * 128 * 128, 0,
                         1152.0 * 382,            382.0 * 192,             192.0 * 10};
const long long kParams[] = {9 * 1 * 32 + 32,    9 * 32 * 32 + 32,   0,
                             9 * 32 * 64 + 64,   9 * 64 * 64 + 64,   0,
                             9 * 64 * 128 + 128, 9 * 128 * 128 + 128, 0,
                             1152 * 382 + 382,   382 * 192 + 192,    192 * 10 + 10};
const long long kOutElems[] = {26 * 26 * 32, 24 * 24 * 32, 12 * 12 * 32, 12 * 12 * 64,
                               12 * 12 * 64, 6 * 6 * 64,   6 * 6 * 128,  6 * 6 * 128,
                               3 * 3 * 128,  382,          192,          10};

double flops_through(int v) {
  double s = 0;
  for (int i = 0; i < v; ++i) s += kFlops[i];
  return s;
}

long long params_through(int v) {
  long long s = 0;
  for (int i = 0; i < v; ++i) s += kParams[i];
  return s;
}

json two_dense() {
  return json::parse(R"({"input": [1, 1, 8], "layers": [
      {"index": 1, "kind": "dense", "units": 4},
      {"index": 2, "kind": "dense", "units": 3}]})");
}

}  // namespace

TEST_CASE("lenet loads with twelve layers") {
  auto m = bundled_lenet();
  REQUIRE(m.layers.size() == 12);
  int conv = 0, pool = 0, dense = 0;
  for (const auto& l : m.layers) {
    conv += l.kind == LayerKind::Conv;
    pool += l.kind == LayerKind::MaxPool;
    dense += l.kind == LayerKind::Dense;
  }
  CHECK(conv == 6);
  CHECK(pool == 3);
  CHECK(dense == 3);
  CHECK(m.layers[2].name == "POOL1");
  CHECK(m.input == TensorShape{28, 28, 1});
}

TEST_CASE("bundled copy matches data file") {
  std::ifstream in(std::string(CPSL_SOURCE_DIR) + "/data/lenet.json");
  REQUIRE(in);
  json file;
  in >> file;
  CHECK(file == bundled_lenet_json());
}

TEST_CASE("layer list errors") {
  CHECK_THROWS_AS(load_layer_specs(json::array()), ValidationError);
  CHECK_THROWS_AS(load_layer_specs(json::parse(R"([{"index": 1, "kind": "dense", "units": 2},
      {"index": 3, "kind": "dense", "units": 2}])")),
                  ValidationError);
  CHECK_THROWS_AS(load_layer_specs(json::parse(R"([{"index": 1, "kind": "dense"}])")),
                  ConfigError);
  CHECK_THROWS_AS(load_layer_specs(json::parse(R"([{"index": 1, "kind": "conv", "filters": 2,
      "kernel": "big"}])")),
                  ConfigError);
  CHECK_THROWS_AS(load_layer_specs(json::parse(R"([{"index": 1, "kind": "rnn"}])")), ConfigError);
  // conv after dense
  CHECK_THROWS_AS(load_layer_specs(json::parse(R"([{"index": 1, "kind": "dense", "units": 2},
      {"index": 2, "kind": "conv", "filters": 2, "kernel": 1}])")),
                  ValidationError);
  try {
    load_layer_specs(json::parse(R"([{"index": 1, "kind": "dense", "units": "x"}])"));
    FAIL("expected throw");
  } catch (const ConfigError& e) {
    CHECK(std::string(e.what()).find("units") != std::string::npos);
  }
}

TEST_CASE("shapes follow hand propagation") {
  auto m = bundled_lenet();
  auto shapes = propagate_shapes(m.layers, m.input);
  REQUIRE(shapes.size() == 13);
  for (int i = 0; i < 12; ++i) CHECK(shapes[i + 1].elements() == kOutElems[i]);
  CHECK(shapes[1] == TensorShape{26, 26, 32});
  CHECK(shapes[3] == TensorShape{12, 12, 32});
}

TEST_CASE("per-layer flops and parameters") {
  auto m = bundled_lenet();
  auto shapes = propagate_shapes(m.layers, m.input);
  for (int i = 0; i < 12; ++i) {
    CAPTURE(i);
    CHECK(layer_forward_flops(m.layers[i], shapes[i]) == kFlops[i]);
    CHECK(layer_parameter_count(m.layers[i], shapes[i]) == kParams[i]);
  }
  CHECK(layer_forward_flops(m.layers[1], {26, 26, 32}) == 5308416.0);
  CHECK(layer_forward_flops(m.layers[9], {3, 3, 128}) == 440064.0);
  CHECK(layer_forward_flops(m.layers[2], {24, 24, 32}) == 0.0);

  FlopConvention two{2.0, true};
  CHECK(layer_forward_flops(m.layers[1], shapes[1], two) == 2 * kFlops[1]);
  CHECK(layer_forward_flops(m.layers[2], shapes[2], two) == 12.0 * 12 * 32 * 4);
}

TEST_CASE("kernel larger than input is a shape error") {
  LayerSpec c;
  c.kind = LayerKind::Conv;
  c.filters = 1;
  c.kernel_h = c.kernel_w = 5;
  CHECK_THROWS_AS(layer_output_shape(c, {3, 3, 1}), ShapeError);
  LayerSpec p;
  p.kind = LayerKind::MaxPool;
  p.window_h = p.window_w = 4;
  CHECK_THROWS_AS(layer_output_shape(p, {2, 2, 1}), ShapeError);
}

TEST_CASE("profile at the third cut") {
  auto m = bundled_lenet();
  auto p = profile_cut(m.layers, 3, 16, 4, m.input);
  CHECK(p.xi_s == 12.0 * 12 * 32 * 32);
  CHECK(p.xi_s == 147456.0);
  CHECK(p.xi_g == 16 * p.xi_s);
  CHECK(p.gamma_d_f == flops_through(3));
  CHECK(p.gamma_d_b == p.gamma_d_f);
  CHECK(p.xi_d == params_through(3) * 32.0);
  CHECK(p.gamma_s_f == flops_through(12) - flops_through(3));
  // reference value for the device side is 5.6 MFLOPs
  CHECK(testing::close_rel(p.gamma_d_f, 5.6e6, 0.05));
}

TEST_CASE("whole model on the device") {
  auto m = bundled_lenet();
  auto p = profile_cut(m.layers, 12, 16, 4, m.input);
  CHECK(p.xi_s == 0.0);
  CHECK(p.xi_g == 0.0);
  CHECK(p.gamma_s_f == 0.0);
  CHECK(p.gamma_s_b == 0.0);
  CHECK(p.gamma_d_f == flops_through(12));
  CHECK(p.xi_d == params_through(12) * 32.0);
  CHECK_THROWS_AS(profile_cut(m.layers, 0, 16, 4, m.input), DomainError);
  CHECK_THROWS_AS(profile_cut(m.layers, 13, 16, 4, m.input), DomainError);
  CHECK_THROWS_AS(profile_cut(m.layers, 3, 0, 4, m.input), DomainError);
}

TEST_CASE("cut sweep is monotone and conserves work") {
  auto m = bundled_lenet();
  auto ps = enumerate_cuts(m.layers, 16, 4, m.input);
  REQUIRE(ps.size() == 12);
  const double total = ps.back().gamma_d_f;
  for (std::size_t v = 0; v < ps.size(); ++v) {
    CAPTURE(v);
    CHECK(ps[v].cut == static_cast<int>(v) + 1);
    CHECK(ps[v].gamma_d_f + ps[v].gamma_s_f == doctest::Approx(total).epsilon(1e-12));
    if (v > 0) {
      CHECK(ps[v].gamma_d_f >= ps[v - 1].gamma_d_f);
      CHECK(ps[v].xi_d >= ps[v - 1].xi_d);
    }
  }
}

TEST_CASE("device model is small at the early cut") {
  auto m = bundled_lenet();
  auto ps = enumerate_cuts(m.layers, 16, 4, m.input);
  CHECK(ps[2].xi_d / ps[11].xi_d < 0.05);
}

TEST_CASE("single-layer model") {
  auto layers = load_layer_specs(json::parse(R"([{"index": 1, "kind": "dense", "units": 5}])"));
  auto ps = enumerate_cuts(layers, 4, 4, {1, 1, 3});
  REQUIRE(ps.size() == 1);
  CHECK(ps[0].xi_s == 0.0);
  CHECK(ps[0].gamma_s_f == 0.0);
  CHECK(ps[0].gamma_d_f == 15.0);
  CHECK(ps[0].xi_d == 20.0 * 32);
}

TEST_CASE("two dense layers by hand") {
  auto model = load_model_config(two_dense());
  auto ps = model_profiles(model, 2, ProfileSource::Computed);
  REQUIRE(ps.size() == 2);
  CHECK(ps[0].xi_d == (8 * 4 + 4) * 32.0);
  CHECK(ps[0].xi_s == 4 * 32.0);
  CHECK(ps[0].xi_g == 2 * 4 * 32.0);
  CHECK(ps[0].gamma_d_f == 32.0);
  CHECK(ps[0].gamma_s_f == 12.0);
  CHECK(ps[1].xi_d == (36 + 15) * 32.0);
}

TEST_CASE("overrides replace only the listed cuts") {
  auto m = bundled_lenet();
  auto computed = model_profiles(m, 16, ProfileSource::Computed);
  auto over = model_profiles(m, 16, ProfileSource::Override);
  for (int v = 0; v < 12; ++v) {
    CAPTURE(v);
    const bool listed = v == 2 || v == 11;
    const bool same = computed[v].xi_d == over[v].xi_d && computed[v].xi_s == over[v].xi_s &&
                      computed[v].gamma_d_f == over[v].gamma_d_f;
    CHECK(same != listed);
  }
  CHECK(over[2].xi_d == 0.67 * kBitsPerMB);
  CHECK(over[2].xi_s == 18 * kBitsPerKB);
  CHECK(over[2].xi_g == 36.1 * kBitsPerKB);
  CHECK(over[2].gamma_d_f == doctest::Approx(5.6e6));
  CHECK(over[2].gamma_s_b == doctest::Approx(86.01e6));
  CHECK(over[11].xi_d == 16.49 * kBitsPerMB);
  CHECK(over[11].gamma_d_f == doctest::Approx(91.6e6));
  CHECK(over[11].xi_s == 0.0);
  // computed and listed device workloads agree closely at the early cut
  CHECK(testing::close_rel(computed[2].gamma_d_f, over[2].gamma_d_f, 0.05));
}

TEST_CASE("partial override keeps computed fields") {
  auto j = two_dense();
  j["override"] = json::parse(R"([{"cut": 1, "xi_s_KB": 1}])");
  auto m = load_model_config(j);
  auto c = model_profiles(m, 2, ProfileSource::Computed);
  auto o = model_profiles(m, 2, ProfileSource::Override);
  CHECK(o[0].xi_s == 8000.0);
  CHECK(o[0].xi_d == c[0].xi_d);
  CHECK(o[0].xi_g == c[0].xi_g);

  j["override"] = json::parse(R"([{"cut": 3, "xi_s_KB": 1}])");
  CHECK_THROWS_AS(load_model_config(j), ValidationError);
  j["override"] = json::parse(R"([{"cut": 1, "xi_s_KB": -1}])");
  CHECK_THROWS_AS(load_model_config(j), ConfigError);
}

TEST_CASE("profile csv") {
  auto m = bundled_lenet();
  std::ostringstream os;
  write_profiles_csv(os, model_profiles(m, 16, ProfileSource::Computed), m.layers);
  std::istringstream is(os.str());
  std::string line;
  std::getline(is, line);
  CHECK(line == "cut,layer,xi_d_bits,xi_s_bits,xi_g_bits,gamma_d_f,gamma_d_b,gamma_s_f,gamma_s_b");
  int rows = 0;
  while (std::getline(is, line)) {
    ++rows;
    CHECK(std::count(line.begin(), line.end(), ',') == 8);
  }
  CHECK(rows == 12);
  CHECK(os.str().find("\n3,POOL1,") != std::string::npos);
}

TEST_CASE("missing model file") {
  CHECK_THROWS_AS(load_model_config_file("/nonexistent/model.json"), ConfigError);
}
