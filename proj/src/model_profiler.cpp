#include "cpsl/model_profiler.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

#include <fmt/format.h>

#include "cpsl/errors.hpp"

namespace cpsl {

using nlohmann::json;

std::string to_string(LayerKind kind) {
  switch (kind) {
    case LayerKind::Conv:
      return "conv";
    case LayerKind::MaxPool:
      return "maxpool";
    case LayerKind::Dense:
      return "dense";
  }
  return "unknown";
}

namespace {

template <typename T>
T require(const json& obj, const std::string& key, const std::string& where) {
  if (!obj.contains(key)) {
    throw ConfigError(fmt::format("{}: missing field '{}'", where, key));
  }
  try {
    return obj.at(key).get<T>();
  } catch (const json::exception&) {
    throw ConfigError(fmt::format("{}: field '{}' has the wrong type", where, key));
  }
}

void parse_window(const json& obj, const std::string& key, const std::string& where,
                  int& h, int& w) {
  if (!obj.contains(key)) {
    throw ConfigError(fmt::format("{}: missing field '{}'", where, key));
  }
  const auto& v = obj.at(key);
  if (v.is_number_integer()) {
    h = w = v.get<int>();
  } else if (v.is_array() && v.size() == 2 && v[0].is_number_integer() &&
             v[1].is_number_integer()) {
    h = v[0].get<int>();
    w = v[1].get<int>();
  } else {
    throw ConfigError(
        fmt::format("{}: field '{}' must be an integer or [h, w]", where, key));
  }
  if (h < 1 || w < 1) {
    throw ConfigError(fmt::format("{}: field '{}' must be positive", where, key));
  }
}

LayerSpec parse_layer(const json& j, std::size_t position) {
  const std::string where = fmt::format("layers[{}]", position);
  if (!j.is_object()) throw ConfigError(where + ": expected an object");
  LayerSpec layer;
  layer.index = require<int>(j, "index", where);
  layer.name = j.value("name", fmt::format("L{}", layer.index));
  layer.activation = j.value("activation", std::string{"none"});
  const auto kind = require<std::string>(j, "kind", where);
  if (kind == "conv") {
    layer.kind = LayerKind::Conv;
    layer.filters = require<int>(j, "filters", where);
    if (layer.filters < 1) throw ConfigError(where + ": field 'filters' must be positive");
    parse_window(j, "kernel", where, layer.kernel_h, layer.kernel_w);
    const auto pad = j.value("padding", std::string{"valid"});
    if (pad == "valid") {
      layer.padding = Padding::Valid;
    } else if (pad == "same") {
      layer.padding = Padding::Same;
    } else {
      throw ConfigError(fmt::format("{}: field 'padding' must be valid|same, got '{}'",
                                    where, pad));
    }
  } else if (kind == "maxpool") {
    layer.kind = LayerKind::MaxPool;
    parse_window(j, "window", where, layer.window_h, layer.window_w);
  } else if (kind == "dense") {
    layer.kind = LayerKind::Dense;
    layer.units = require<int>(j, "units", where);
    if (layer.units < 1) throw ConfigError(where + ": field 'units' must be positive");
  } else {
    throw ConfigError(fmt::format("{}: field 'kind' has unknown value '{}'", where, kind));
  }
  return layer;
}

std::optional<double> scaled(const json& j, const std::string& key, double scale) {
  if (!j.contains(key)) return std::nullopt;
  if (!j.at(key).is_number()) {
    throw ConfigError(fmt::format("override: field '{}' must be a number", key));
  }
  const double v = j.at(key).get<double>() * scale;
  if (v < 0.0) throw ConfigError(fmt::format("override: field '{}' is negative", key));
  return v;
}

}  // namespace

std::vector<LayerSpec> load_layer_specs(const json& config) {
  const json* arr = &config;
  if (config.is_object()) {
    if (!config.contains("layers")) throw ConfigError("missing field 'layers'");
    arr = &config.at("layers");
  }
  if (!arr->is_array()) throw ConfigError("field 'layers' must be an array");
  if (arr->empty()) throw ValidationError("layer list is empty");

  std::vector<LayerSpec> layers;
  layers.reserve(arr->size());
  for (std::size_t i = 0; i < arr->size(); ++i) layers.push_back(parse_layer((*arr)[i], i));

  std::sort(layers.begin(), layers.end(),
            [](const LayerSpec& a, const LayerSpec& b) { return a.index < b.index; });
  for (std::size_t i = 0; i < layers.size(); ++i) {
    if (layers[i].index != static_cast<int>(i) + 1) {
      throw ValidationError(fmt::format(
          "layer indices must be contiguous 1..{}; found {} at position {}", layers.size(),
          layers[i].index, i + 1));
    }
  }
  bool seen_dense = false;
  for (const auto& l : layers) {
    if (l.kind == LayerKind::Dense) {
      seen_dense = true;
    } else if (seen_dense) {
      throw ValidationError(fmt::format(
          "layer {} ({}) follows a dense layer; conv/maxpool must come first", l.index,
          to_string(l.kind)));
    }
  }
  return layers;
}

ModelConfig load_model_config(const json& config) {
  if (!config.is_object()) throw ConfigError("model config must be a JSON object");
  ModelConfig model;
  model.name = config.value("name", std::string{"model"});
  if (config.contains("input")) {
    const auto& in = config.at("input");
    if (!in.is_array() || in.size() != 3) {
      throw ConfigError("field 'input' must be [height, width, channels]");
    }
    try {
      model.input = {in[0].get<int>(), in[1].get<int>(), in[2].get<int>()};
    } catch (const json::exception&) {
      throw ConfigError("field 'input' must contain integers");
    }
    if (model.input.elements() < 1) throw ConfigError("field 'input' must be positive");
  }
  model.bytes_per_value = config.value("bytes_per_value", 4);
  if (model.bytes_per_value < 1) throw ConfigError("field 'bytes_per_value' must be positive");
  if (config.contains("flops")) {
    const auto& f = config.at("flops");
    model.flops.flops_per_mac = f.value("flops_per_mac", 1.0);
    model.flops.count_pooling = f.value("count_pooling", false);
  }
  model.layers = load_layer_specs(config);

  if (config.contains("override")) {
    const auto& ov = config.at("override");
    if (!ov.is_array()) throw ConfigError("field 'override' must be an array");
    for (const auto& entry : ov) {
      const int cut = require<int>(entry, "cut", "override");
      if (cut < 1 || cut > static_cast<int>(model.layers.size())) {
        throw ValidationError(fmt::format("override: cut {} out of range", cut));
      }
      CutOverride o;
      o.xi_d = scaled(entry, "xi_d_MB", kBitsPerMB);
      o.xi_s = scaled(entry, "xi_s_KB", kBitsPerKB);
      o.xi_g = scaled(entry, "xi_g_KB", kBitsPerKB);
      o.gamma_d_f = scaled(entry, "gamma_d_f_MFLOPs", 1e6);
      o.gamma_d_b = scaled(entry, "gamma_d_b_MFLOPs", 1e6);
      o.gamma_s_f = scaled(entry, "gamma_s_f_MFLOPs", 1e6);
      o.gamma_s_b = scaled(entry, "gamma_s_b_MFLOPs", 1e6);
      model.overrides[cut] = o;
    }
  }
  return model;
}

ModelConfig load_model_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError(fmt::format("cannot open model config '{}'", path));
  json j;
  try {
    in >> j;
  } catch (const json::parse_error& e) {
    throw ConfigError(fmt::format("{}: {}", path, e.what()));
  }
  return load_model_config(j);
}

TensorShape layer_output_shape(const LayerSpec& layer, const TensorShape& input) {
  switch (layer.kind) {
    case LayerKind::Conv: {
      if (layer.padding == Padding::Same) {
        return {input.height, input.width, layer.filters};
      }
      const int h = input.height - layer.kernel_h + 1;
      const int w = input.width - layer.kernel_w + 1;
      if (h < 1 || w < 1) {
        throw ShapeError(fmt::format("{}: {}x{} kernel does not fit {}x{} input", layer.name,
                                     layer.kernel_h, layer.kernel_w, input.height,
                                     input.width));
      }
      return {h, w, layer.filters};
    }
    case LayerKind::MaxPool: {
      if (input.height < layer.window_h || input.width < layer.window_w) {
        throw ShapeError(fmt::format("{}: {}x{} window does not fit {}x{} input", layer.name,
                                     layer.window_h, layer.window_w, input.height,
                                     input.width));
      }
      return {input.height / layer.window_h, input.width / layer.window_w, input.channels};
    }
    case LayerKind::Dense:
      return {1, 1, layer.units};
  }
  throw ShapeError("unknown layer kind");
}

double layer_forward_flops(const LayerSpec& layer, const TensorShape& input,
                           const FlopConvention& conv) {
  const TensorShape out = layer_output_shape(layer, input);
  switch (layer.kind) {
    case LayerKind::Conv: {
      const double macs = static_cast<double>(out.height) * out.width * layer.kernel_h *
                          layer.kernel_w * input.channels * layer.filters;
      return macs * conv.flops_per_mac;
    }
    case LayerKind::MaxPool:
      if (!conv.count_pooling) return 0.0;
      return static_cast<double>(out.elements()) * layer.window_h * layer.window_w;
    case LayerKind::Dense:
      return static_cast<double>(input.elements()) * layer.units * conv.flops_per_mac;
  }
  return 0.0;
}

long long layer_parameter_count(const LayerSpec& layer, const TensorShape& input) {
  switch (layer.kind) {
    case LayerKind::Conv:
      return static_cast<long long>(layer.kernel_h) * layer.kernel_w * input.channels *
                 layer.filters +
             layer.filters;
    case LayerKind::MaxPool:
      return 0;
    case LayerKind::Dense:
      return input.elements() * layer.units + layer.units;
  }
  return 0;
}

std::vector<TensorShape> propagate_shapes(const std::vector<LayerSpec>& layers,
                                          const TensorShape& input) {
  std::vector<TensorShape> shapes;
  shapes.reserve(layers.size() + 1);
  shapes.push_back(input);
  for (const auto& l : layers) shapes.push_back(layer_output_shape(l, shapes.back()));
  return shapes;
}

CutProfile profile_cut(const std::vector<LayerSpec>& layers, int cut, int batch,
                       int bytes_per_value, const TensorShape& input,
                       const FlopConvention& conv) {
  const int depth = static_cast<int>(layers.size());
  if (cut < 1 || cut > depth) {
    throw DomainError(fmt::format("cut layer {} outside 1..{}", cut, depth));
  }
  if (batch < 1) throw DomainError("batch size must be positive");
  const auto shapes = propagate_shapes(layers, input);
  const double bits_per_value = 8.0 * bytes_per_value;

  double device_flops = 0.0;
  double total_flops = 0.0;
  long long device_params = 0;
  for (int i = 0; i < depth; ++i) {
    const double f = layer_forward_flops(layers[i], shapes[i], conv);
    total_flops += f;
    if (i < cut) {
      device_flops += f;
      device_params += layer_parameter_count(layers[i], shapes[i]);
    }
  }

  CutProfile p;
  p.cut = cut;
  p.xi_d = static_cast<double>(device_params) * bits_per_value;
  // Nothing crosses the cut when the whole model sits on the device.
  p.xi_s = cut == depth ? 0.0 : static_cast<double>(shapes[cut].elements()) * bits_per_value;
  p.xi_g = batch * p.xi_s;
  p.gamma_d_f = device_flops;
  p.gamma_d_b = device_flops;
  p.gamma_s_f = total_flops - device_flops;
  p.gamma_s_b = p.gamma_s_f;
  if (cut == depth) p.gamma_s_f = p.gamma_s_b = 0.0;
  return p;
}

std::vector<CutProfile> enumerate_cuts(const std::vector<LayerSpec>& layers, int batch,
                                       int bytes_per_value, const TensorShape& input,
                                       const FlopConvention& conv) {
  std::vector<CutProfile> out;
  out.reserve(layers.size());
  for (int v = 1; v <= static_cast<int>(layers.size()); ++v) {
    out.push_back(profile_cut(layers, v, batch, bytes_per_value, input, conv));
  }
  return out;
}

CutProfile apply_override(CutProfile p, const CutOverride& ov) {
  p.xi_d = ov.xi_d.value_or(p.xi_d);
  p.xi_s = ov.xi_s.value_or(p.xi_s);
  p.xi_g = ov.xi_g.value_or(p.xi_g);
  p.gamma_d_f = ov.gamma_d_f.value_or(p.gamma_d_f);
  p.gamma_d_b = ov.gamma_d_b.value_or(p.gamma_d_b);
  p.gamma_s_f = ov.gamma_s_f.value_or(p.gamma_s_f);
  p.gamma_s_b = ov.gamma_s_b.value_or(p.gamma_s_b);
  return p;
}

std::vector<CutProfile> model_profiles(const ModelConfig& model, int batch,
                                       ProfileSource source) {
  auto profiles =
      enumerate_cuts(model.layers, batch, model.bytes_per_value, model.input, model.flops);
  if (source == ProfileSource::Override) {
    for (auto& p : profiles) {
      if (auto it = model.overrides.find(p.cut); it != model.overrides.end()) {
        p = apply_override(p, it->second);
      }
    }
  }
  return profiles;
}

void write_profiles_csv(std::ostream& os, const std::vector<CutProfile>& profiles,
                        const std::vector<LayerSpec>& layers) {
  os << "cut,layer,xi_d_bits,xi_s_bits,xi_g_bits,gamma_d_f,gamma_d_b,gamma_s_f,gamma_s_b\n";
  for (const auto& p : profiles) {
    const std::string name =
        (p.cut >= 1 && p.cut <= static_cast<int>(layers.size())) ? layers[p.cut - 1].name : "";
    os << fmt::format("{},{},{:.17g},{:.17g},{:.17g},{:.17g},{:.17g},{:.17g},{:.17g}\n", p.cut,
                      name, p.xi_d, p.xi_s, p.xi_g, p.gamma_d_f, p.gamma_d_b, p.gamma_s_f,
                      p.gamma_s_b);
  }
}

}  // namespace cpsl
