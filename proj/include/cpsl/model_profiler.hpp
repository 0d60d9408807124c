#pragma once

#include <map>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace cpsl {

enum class LayerKind { Conv, MaxPool, Dense };
enum class Padding { Valid, Same };

std::string to_string(LayerKind kind);

// One layer of a chain-topology network. Only the fields relevant to `kind`
// are meaningful; activation is carried as a label and never affects cost.
struct LayerSpec {
  int index = 0;  // 1-based
  std::string name;
  LayerKind kind = LayerKind::Dense;
  int filters = 0;
  int kernel_h = 0;
  int kernel_w = 0;
  Padding padding = Padding::Valid;
  int window_h = 0;
  int window_w = 0;
  int units = 0;
  std::string activation;
};

struct TensorShape {
  int height = 1;
  int width = 1;
  int channels = 1;

  long long elements() const {
    return static_cast<long long>(height) * width * channels;
  }
  bool operator==(const TensorShape&) const = default;
};

// FLOP counting convention. The default (one FLOP per multiply-accumulate,
// pooling free, bias ignored) is the convention under which LeNet's first
// three layers cost 5.5 MFLOPs per sample.
struct FlopConvention {
  double flops_per_mac = 1.0;
  bool count_pooling = false;  // if true, one FLOP per window element
};

// Cut-dependent quantities consumed by the latency model. Sizes are in bits,
// workloads in FLOPs per sample.
struct CutProfile {
  int cut = 0;
  double xi_d = 0.0;       // device-side model size
  double xi_s = 0.0;       // smashed data per sample
  double xi_g = 0.0;       // smashed-data gradient per minibatch
  double gamma_d_f = 0.0;  // device-side forward
  double gamma_d_b = 0.0;  // device-side backward
  double gamma_s_f = 0.0;  // server-side forward
  double gamma_s_b = 0.0;  // server-side backward
};

// Explicit per-cut values that take precedence over computed ones. Any field
// left empty keeps the computed value.
struct CutOverride {
  std::optional<double> xi_d;
  std::optional<double> xi_s;
  std::optional<double> xi_g;
  std::optional<double> gamma_d_f;
  std::optional<double> gamma_d_b;
  std::optional<double> gamma_s_f;
  std::optional<double> gamma_s_b;
};

struct ModelConfig {
  std::string name;
  TensorShape input;
  int bytes_per_value = 4;
  std::vector<LayerSpec> layers;
  std::map<int, CutOverride> overrides;
  FlopConvention flops;
};

// Unit helpers. 1 KB = 1e3 bytes, 1 MB = 1e6 bytes.
constexpr double kBitsPerKB = 8.0e3;
constexpr double kBitsPerMB = 8.0e6;

// Parses the "layers" array of a model config. Throws ConfigError naming the
// offending field, ValidationError for empty lists, index gaps or a conv/pool
// layer after the first dense layer.
std::vector<LayerSpec> load_layer_specs(const nlohmann::json& config);

// Parses a full model config (input shape, layers, optional overrides).
ModelConfig load_model_config(const nlohmann::json& config);
ModelConfig load_model_config_file(const std::string& path);

// The 12-layer LeNet with the overrides from the reference simulation setup.
const nlohmann::json& bundled_lenet_json();
ModelConfig bundled_lenet();

TensorShape layer_output_shape(const LayerSpec& layer, const TensorShape& input);
double layer_forward_flops(const LayerSpec& layer, const TensorShape& input,
                           const FlopConvention& conv = {});
long long layer_parameter_count(const LayerSpec& layer, const TensorShape& input);

// Per-layer input shapes, shapes[i] being the input to layers[i]; the final
// element is the network output shape.
std::vector<TensorShape> propagate_shapes(const std::vector<LayerSpec>& layers,
                                          const TensorShape& input);

CutProfile profile_cut(const std::vector<LayerSpec>& layers, int cut, int batch,
                       int bytes_per_value, const TensorShape& input,
                       const FlopConvention& conv = {});

std::vector<CutProfile> enumerate_cuts(const std::vector<LayerSpec>& layers, int batch,
                                       int bytes_per_value, const TensorShape& input,
                                       const FlopConvention& conv = {});

CutProfile apply_override(CutProfile profile, const CutOverride& ov);

enum class ProfileSource { Computed, Override };

// enumerate_cuts on the config's layers, then (for ProfileSource::Override)
// the config's per-cut overrides applied on top.
std::vector<CutProfile> model_profiles(const ModelConfig& model, int batch,
                                       ProfileSource source);

void write_profiles_csv(std::ostream& os, const std::vector<CutProfile>& profiles,
                        const std::vector<LayerSpec>& layers);

}  // namespace cpsl
