#include "cpsl/model_profiler.hpp"

namespace cpsl {

// Mirrors data/lenet.json; a unit test keeps the two in sync.
const nlohmann::json& bundled_lenet_json() {
  static const nlohmann::json kLenet = nlohmann::json::parse(R"json(
{
  "name": "lenet",
  "input": [28, 28, 1],
  "bytes_per_value": 4,
  "flops": {"flops_per_mac": 1.0, "count_pooling": false},
  "layers": [
    {"index": 1,  "name": "CONV1", "kind": "conv", "filters": 32,  "kernel": [3, 3], "padding": "valid", "activation": "relu"},
    {"index": 2,  "name": "CONV2", "kind": "conv", "filters": 32,  "kernel": [3, 3], "padding": "valid", "activation": "relu"},
    {"index": 3,  "name": "POOL1", "kind": "maxpool", "window": [2, 2], "activation": "none"},
    {"index": 4,  "name": "CONV3", "kind": "conv", "filters": 64,  "kernel": [3, 3], "padding": "same", "activation": "relu"},
    {"index": 5,  "name": "CONV4", "kind": "conv", "filters": 64,  "kernel": [3, 3], "padding": "same", "activation": "relu"},
    {"index": 6,  "name": "POOL2", "kind": "maxpool", "window": [2, 2], "activation": "none"},
    {"index": 7,  "name": "CONV5", "kind": "conv", "filters": 128, "kernel": [3, 3], "padding": "same", "activation": "relu"},
    {"index": 8,  "name": "CONV6", "kind": "conv", "filters": 128, "kernel": [3, 3], "padding": "same", "activation": "relu"},
    {"index": 9,  "name": "POOL3", "kind": "maxpool", "window": [2, 2], "activation": "none"},
    {"index": 10, "name": "FC1", "kind": "dense", "units": 382, "activation": "relu"},
    {"index": 11, "name": "FC2", "kind": "dense", "units": 192, "activation": "relu"},
    {"index": 12, "name": "FC3", "kind": "dense", "units": 10,  "activation": "softmax"}
  ],
  "override": [
    {"cut": 3, "xi_d_MB": 0.67, "xi_s_KB": 18, "xi_g_KB": 36.1,
     "gamma_d_f_MFLOPs": 5.6, "gamma_d_b_MFLOPs": 5.6,
     "gamma_s_f_MFLOPs": 86.01, "gamma_s_b_MFLOPs": 86.01},
    {"cut": 12, "xi_d_MB": 16.49, "xi_s_KB": 0, "xi_g_KB": 0,
     "gamma_d_f_MFLOPs": 91.6, "gamma_d_b_MFLOPs": 91.6,
     "gamma_s_f_MFLOPs": 0, "gamma_s_b_MFLOPs": 0}
  ]
}
)json");
  return kLenet;
}

ModelConfig bundled_lenet() { return load_model_config(bundled_lenet_json()); }

}  // namespace cpsl
