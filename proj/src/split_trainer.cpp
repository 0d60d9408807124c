#include "cpsl/split_trainer.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <fmt/format.h>

#include "cpsl/errors.hpp"
#include "cpsl/network_env.hpp"

namespace cpsl {

std::string to_string(Activation a) {
  switch (a) {
    case Activation::Identity:
      return "identity";
    case Activation::Relu:
      return "relu";
    case Activation::Softmax:
      return "softmax";
  }
  return "unknown";
}

Activation activation_from_string(const std::string& s) {
  if (s == "identity" || s == "linear" || s == "none") return Activation::Identity;
  if (s == "relu") return Activation::Relu;
  if (s == "softmax") return Activation::Softmax;
  throw ConfigError(fmt::format("unknown activation '{}'", s));
}

long long Network::parameter_count() const {
  long long n = 0;
  for (const auto& l : layers) n += l.w.size() + l.b.size();
  return n;
}

void Network::check() const {
  for (std::size_t i = 0; i < layers.size(); ++i) {
    const auto& l = layers[i];
    if (l.b.size() != l.w.cols()) throw ShapeError(fmt::format("layer {}: bias width", i + 1));
    if (i > 0 && layers[i - 1].out() != l.in()) {
      throw ShapeError(fmt::format("layer {}: expects {} inputs, previous emits {}", i + 1,
                                   l.in(), layers[i - 1].out()));
    }
    if (l.act == Activation::Softmax && i + 1 != layers.size()) {
      throw ShapeError("softmax is only allowed on the last layer");
    }
  }
}

Network make_network(const std::vector<int>& widths, const std::vector<Activation>& acts,
                     std::uint64_t seed) {
  if (widths.size() < 2 || acts.size() != widths.size() - 1) {
    throw ValidationError("network needs widths {in, ..., out} and one activation per layer");
  }
  std::mt19937_64 rng(seed);
  Network net;
  for (std::size_t i = 0; i + 1 < widths.size(); ++i) {
    const int in = widths[i];
    const int out = widths[i + 1];
    if (in < 1 || out < 1) throw ValidationError("layer widths must be >= 1");
    std::normal_distribution<double> dist(0.0, std::sqrt(2.0 / in));
    DenseLayer l;
    l.w.resize(in, out);
    for (int r = 0; r < in; ++r) {
      for (int c = 0; c < out; ++c) l.w(r, c) = dist(rng);
    }
    l.b = Vector::Zero(out);
    l.act = acts[i];
    net.layers.push_back(std::move(l));
  }
  net.check();
  return net;
}

Network default_toy_network(int inputs, int classes, std::uint64_t seed) {
  return make_network({inputs, 16, 16, classes},
                      {Activation::Relu, Activation::Relu, Activation::Softmax}, seed);
}

SplitModel split(const Network& net, int cut) {
  const int v = static_cast<int>(net.layers.size());
  if (cut < 1 || cut > v) throw DomainError(fmt::format("cut {} outside 1..{}", cut, v));
  SplitModel m;
  m.cut = cut;
  m.device.layers.assign(net.layers.begin(), net.layers.begin() + cut);
  m.server.layers.assign(net.layers.begin() + cut, net.layers.end());
  return m;
}

Network merge(const SplitModel& model) {
  Network net = model.device;
  net.layers.insert(net.layers.end(), model.server.layers.begin(), model.server.layers.end());
  net.check();
  return net;
}

Matrix forward(const Network& net, const Matrix& x, ForwardCache* cache) {
  if (cache) {
    cache->inputs.clear();
    cache->pre.clear();
  }
  Matrix a = x;
  for (std::size_t i = 0; i < net.layers.size(); ++i) {
    const auto& l = net.layers[i];
    if (a.cols() != l.in()) {
      throw ShapeError(
          fmt::format("layer {} expects width {}, got {}", i + 1, l.in(), a.cols()));
    }
    Matrix z = (a * l.w).rowwise() + l.b.transpose();
    if (cache) cache->inputs.push_back(std::move(a));
    if (l.act == Activation::Relu) {
      a = z.cwiseMax(0.0);
    } else {
      a = z;
    }
    if (cache) cache->pre.push_back(std::move(z));
  }
  return a;
}

Matrix backward(const Network& net, const ForwardCache& cache, const Matrix& d_out,
                Gradients* grads) {
  const std::size_t n = net.layers.size();
  if (cache.inputs.size() != n) throw ShapeError("backward without a matching forward");
  if (grads) grads->assign(n, {});
  Matrix d = d_out;
  for (std::size_t i = n; i-- > 0;) {
    const auto& l = net.layers[i];
    if (l.act == Activation::Relu) {
      d = d.cwiseProduct((cache.pre[i].array() > 0.0).cast<double>().matrix());
    }
    if (grads) {
      (*grads)[i].w = cache.inputs[i].transpose() * d;
      (*grads)[i].b = d.colwise().sum().transpose();
    }
    d = d * l.w.transpose();
  }
  return d;
}

Matrix softmax_rows(const Matrix& logits) {
  Matrix p(logits.rows(), logits.cols());
  for (Eigen::Index r = 0; r < logits.rows(); ++r) {
    const double m = logits.row(r).maxCoeff();
    const auto e = (logits.row(r).array() - m).exp();
    p.row(r) = e / e.sum();
  }
  return p;
}

double nll(const Matrix& logits, const std::vector<int>& labels, Matrix* d_logits) {
  if (static_cast<Eigen::Index>(labels.size()) != logits.rows()) {
    throw ShapeError("one label per row required");
  }
  double total = 0.0;
  if (d_logits) d_logits->resize(logits.rows(), logits.cols());
  for (Eigen::Index r = 0; r < logits.rows(); ++r) {
    const int y = labels[r];
    if (y < 0 || y >= logits.cols()) throw ShapeError(fmt::format("label {} out of range", y));
    const double m = logits.row(r).maxCoeff();
    const double lse = m + std::log((logits.row(r).array() - m).exp().sum());
    total += lse - logits(r, y);
    if (d_logits) {
      d_logits->row(r) = (logits.row(r).array() - lse).exp();
      (*d_logits)(r, y) -= 1.0;
    }
  }
  return total;
}

Matrix forward_device(const Network& device, const Matrix& x) { return forward(device, x); }

namespace {

Matrix concat_rows(const std::vector<Matrix>& blocks) {
  if (blocks.empty()) throw ShapeError("no smashed data");
  const auto width = blocks.front().cols();
  Eigen::Index rows = 0;
  for (const auto& b : blocks) {
    if (b.cols() != width) {
      throw ShapeError(fmt::format("smashed widths differ: {} vs {}", b.cols(), width));
    }
    rows += b.rows();
  }
  Matrix out(rows, width);
  Eigen::Index at = 0;
  for (const auto& b : blocks) {
    out.middleRows(at, b.rows()) = b;
    at += b.rows();
  }
  return out;
}

bool ends_in_softmax(const Network& net) {
  return !net.empty() && net.layers.back().act == Activation::Softmax;
}

void scale(Gradients& g, double s) {
  for (auto& l : g) {
    l.w *= s;
    l.b *= s;
  }
}

}  // namespace

Matrix forward_server_concat(const Network& server, const std::vector<Matrix>& smashed) {
  const Matrix out = forward(server, concat_rows(smashed));
  return ends_in_softmax(server) ? softmax_rows(out) : out;
}

SplitGrads backward_split(const std::vector<Network>& devices, const Network& server,
                          const std::vector<Matrix>& inputs,
                          const std::vector<std::vector<int>>& labels) {
  const std::size_t k = devices.size();
  if (k == 0 || inputs.size() != k || labels.size() != k) {
    throw ShapeError("need one model, input block and label list per device");
  }
  std::vector<ForwardCache> caches(k);
  std::vector<Matrix> smashed(k);
  std::vector<int> all_labels;
  for (std::size_t i = 0; i < k; ++i) {
    smashed[i] = forward(devices[i], inputs[i], &caches[i]);
    all_labels.insert(all_labels.end(), labels[i].begin(), labels[i].end());
  }
  const Matrix s = concat_rows(smashed);
  const double rows = static_cast<double>(s.rows());

  SplitGrads out;
  ForwardCache server_cache;
  Matrix d_logits;
  const Matrix logits = forward(server, s, &server_cache);
  out.loss = nll(logits, all_labels, &d_logits) / rows;
  // Gradients are propagated unscaled; the server's are averaged over every
  // row, each device's over its own rows.
  const Matrix d_s = backward(server, server_cache, d_logits, &out.server);
  scale(out.server, 1.0 / rows);

  Eigen::Index at = 0;
  for (std::size_t i = 0; i < k; ++i) {
    const auto n = smashed[i].rows();
    out.smashed.push_back(d_s.middleRows(at, n) / static_cast<double>(n));
    at += n;
    Gradients g;
    backward(devices[i], caches[i], out.smashed.back(), &g);
    out.device.push_back(std::move(g));
  }
  return out;
}

Gradients full_gradient(const Network& net, const Matrix& x, const std::vector<int>& labels,
                        double* loss) {
  ForwardCache cache;
  Matrix d;
  const Matrix logits = forward(net, x, &cache);
  const double total = nll(logits, labels, &d);
  if (loss) *loss = total / x.rows();
  d /= static_cast<double>(x.rows());
  Gradients g;
  backward(net, cache, d, &g);
  return g;
}

void sgd_step(Network& net, const Gradients& g, double lr) {
  if (g.size() != net.layers.size()) throw ShapeError("gradient/layer count mismatch");
  for (std::size_t i = 0; i < g.size(); ++i) {
    net.layers[i].w -= lr * g[i].w;
    net.layers[i].b -= lr * g[i].b;
  }
}

Network fedavg(const std::vector<Network>& models, const std::vector<double>& weights,
               const Network* reference) {
  if (models.empty()) throw ValidationError("fedavg of no models");
  if (weights.size() != models.size()) throw ValidationError("fedavg: one weight per model");
  const Network& ref = reference ? *reference : models.front();
  for (const auto& m : models) {
    if (m.layers.size() != ref.layers.size()) throw ShapeError("fedavg: architecture mismatch");
    for (std::size_t i = 0; i < m.layers.size(); ++i) {
      if (m.layers[i].w.rows() != ref.layers[i].w.rows() ||
          m.layers[i].w.cols() != ref.layers[i].w.cols()) {
        throw ShapeError("fedavg: architecture mismatch");
      }
    }
  }
  double total = 0.0;
  for (double w : weights) {
    if (!(w > 0.0)) throw ValidationError("fedavg weights must be > 0");
    total += w;
  }
  if (models.size() == 1) return models.front();
  Network out = ref;
  for (std::size_t i = 0; i < ref.layers.size(); ++i) {
    Matrix dw = Matrix::Zero(ref.layers[i].w.rows(), ref.layers[i].w.cols());
    Vector db = Vector::Zero(ref.layers[i].b.size());
    for (std::size_t k = 0; k < models.size(); ++k) {
      const double p = weights[k] / total;
      dw += p * (models[k].layers[i].w - ref.layers[i].w);
      db += p * (models[k].layers[i].b - ref.layers[i].b);
    }
    out.layers[i].w += dw;
    out.layers[i].b += db;
  }
  return out;
}

// ---- data ----

Dataset Dataset::subset(const std::vector<int>& rows) const {
  Dataset d;
  d.n_classes = n_classes;
  d.x.resize(static_cast<Eigen::Index>(rows.size()), x.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    d.x.row(static_cast<Eigen::Index>(i)) = x.row(rows[i]);
    d.y.push_back(y.at(rows[i]));
  }
  return d;
}

void DatasetSpec::validate() const {
  if (n_classes < 2) throw ValidationError("data: n_classes must be >= 2");
  if (dims < 1) throw ValidationError("data: dims must be >= 1");
  if (samples_per_device < 1) throw ValidationError("data: samples_per_device must be >= 1");
  if (classes_per_device < 1 || classes_per_device > n_classes) {
    throw ValidationError("data: classes_per_device must be in 1..n_classes");
  }
  if (!(separation >= 0.0)) throw ValidationError("data: separation must be >= 0");
  if (test_per_class < 1) throw ValidationError("data: test_per_class must be >= 1");
}

namespace {

Dataset draw_mixture(const Matrix& means, int per_class, std::mt19937_64& rng) {
  std::normal_distribution<double> noise(0.0, 1.0);
  const int classes = static_cast<int>(means.rows());
  Dataset d;
  d.n_classes = classes;
  d.x.resize(static_cast<Eigen::Index>(classes) * per_class, means.cols());
  Eigen::Index r = 0;
  for (int c = 0; c < classes; ++c) {
    for (int i = 0; i < per_class; ++i, ++r) {
      for (Eigen::Index q = 0; q < means.cols(); ++q) d.x(r, q) = means(c, q) + noise(rng);
      d.y.push_back(c);
    }
  }
  return d;
}

}  // namespace

SyntheticData make_gaussian_mixture(const DatasetSpec& spec, int n_devices, std::uint64_t seed) {
  spec.validate();
  if (n_devices < 1) throw ValidationError("data: n_devices must be >= 1");
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> centre(0.0, spec.separation);
  Matrix means(spec.n_classes, spec.dims);
  for (int c = 0; c < spec.n_classes; ++c) {
    for (int q = 0; q < spec.dims; ++q) means(c, q) = centre(rng);
  }
  // Worst case every device wants the same class.
  const int per_device =
      (spec.samples_per_device + spec.classes_per_device - 1) / spec.classes_per_device;
  SyntheticData out;
  std::mt19937_64 train_rng(derive_seed(seed, 1));
  std::mt19937_64 test_rng(derive_seed(seed, 2));
  out.train = draw_mixture(means, n_devices * per_device, train_rng);
  out.test = draw_mixture(means, spec.test_per_class, test_rng);
  return out;
}

std::vector<std::vector<int>> partition_non_iid(const Dataset& data, int n_devices,
                                                int classes_per_device, int samples_per_device,
                                                std::uint64_t seed) {
  const int classes = data.n_classes;
  if (classes_per_device < 1 || classes_per_device > classes) {
    throw ValidationError("partition: classes_per_device must be in 1..n_classes");
  }
  if (n_devices < 1 || samples_per_device < 1) throw ValidationError("partition: bad sizes");
  std::mt19937_64 rng(seed);
  std::vector<std::vector<int>> by_class(classes);
  for (int i = 0; i < data.size(); ++i) by_class.at(data.y[i]).push_back(i);
  for (auto& rows : by_class) std::shuffle(rows.begin(), rows.end(), rng);
  std::vector<std::size_t> used(classes, 0);

  std::vector<int> labels(classes);
  std::iota(labels.begin(), labels.end(), 0);
  std::vector<std::vector<int>> parts(n_devices);
  for (int n = 0; n < n_devices; ++n) {
    std::shuffle(labels.begin(), labels.end(), rng);
    for (int c = 0; c < classes_per_device; ++c) {
      const int cls = labels[c];
      const int take = samples_per_device / classes_per_device +
                       (c < samples_per_device % classes_per_device ? 1 : 0);
      if (used[cls] + take > by_class[cls].size()) {
        throw ValidationError(fmt::format("partition: class {} has too few samples", cls));
      }
      for (int i = 0; i < take; ++i) parts[n].push_back(by_class[cls][used[cls]++]);
    }
  }
  return parts;
}

BatchSampler::BatchSampler(std::vector<int> rows, std::uint64_t seed)
    : rows_(std::move(rows)), rng_(seed) {
  if (rows_.empty()) throw ValidationError("sampler needs at least one row");
  std::shuffle(rows_.begin(), rows_.end(), rng_);
}

std::vector<int> BatchSampler::next(int batch) {
  if (batch < 1 || static_cast<std::size_t>(batch) > rows_.size()) {
    throw ValidationError(
        fmt::format("batch {} does not fit a partition of {} samples", batch, rows_.size()));
  }
  if (pos_ + batch > rows_.size()) {
    std::shuffle(rows_.begin(), rows_.end(), rng_);
    pos_ = 0;
  }
  std::vector<int> out(rows_.begin() + pos_, rows_.begin() + pos_ + batch);
  pos_ += batch;
  return out;
}

// ---- training ----

std::string to_string(TrainScheme s) {
  switch (s) {
    case TrainScheme::CL:
      return "CL";
    case TrainScheme::SL:
      return "SL";
    case TrainScheme::CPSL:
      return "CPSL";
    case TrainScheme::FL:
      return "FL";
  }
  return "unknown";
}

TrainScheme train_scheme_from_string(const std::string& s) {
  if (s == "CL") return TrainScheme::CL;
  if (s == "SL") return TrainScheme::SL;
  if (s == "CPSL") return TrainScheme::CPSL;
  if (s == "FL") return TrainScheme::FL;
  throw ConfigError(fmt::format("unknown scheme '{}' (CL, SL, CPSL, FL)", s));
}

void TrainerConfig::validate() const {
  if (!(eta_d > 0.0) || !(eta_e > 0.0) || !(eta_fl > 0.0) || !(eta_cl > 0.0)) {
    throw ValidationError("trainer: learning rates must be > 0");
  }
  if (batch < 1) throw ValidationError("trainer: batch must be >= 1");
  if (local_epochs < 1) throw ValidationError("trainer: local_epochs must be >= 1");
  if (rounds < 0) throw ValidationError("trainer: rounds must be >= 0");
  if (n_devices < 1) throw ValidationError("trainer: n_devices must be >= 1");
  if (cluster_capacity < 1) throw ValidationError("trainer: cluster_capacity must be >= 1");
  if (cut < 1 || cut > static_cast<int>(hidden.size()) + 1) {
    throw ValidationError(
        fmt::format("trainer: cut must be in 1..{}", static_cast<int>(hidden.size()) + 1));
  }
  if (batch > data.samples_per_device) {
    throw ValidationError("trainer: batch exceeds samples per device");
  }
  data.validate();
}

TrainContext TrainContext::create(const TrainerConfig& cfg) {
  cfg.validate();
  auto data = make_gaussian_mixture(cfg.data, cfg.n_devices, derive_seed(cfg.seed, 101));
  auto parts = partition_non_iid(data.train, cfg.n_devices, cfg.data.classes_per_device,
                                 cfg.data.samples_per_device, derive_seed(cfg.seed, 102));
  std::vector<BatchSampler> samplers;
  std::vector<int> all;
  for (int n = 0; n < cfg.n_devices; ++n) {
    samplers.emplace_back(parts[n], derive_seed(cfg.seed, 1000 + n));
    all.insert(all.end(), parts[n].begin(), parts[n].end());
  }
  BatchSampler pooled(std::move(all), derive_seed(cfg.seed, 103));
  return {std::move(data), std::move(parts), std::move(samplers), std::move(pooled)};
}

namespace {

// One local epoch for a cluster: every member draws a minibatch, the server
// trains on the concatenation, then every member applies its own update.
void cluster_step(std::vector<Network>& devices, Network& server, const std::vector<int>& ids,
                  TrainContext& ctx, int batch, double eta_d, double eta_e) {
  std::vector<Matrix> inputs;
  std::vector<std::vector<int>> labels;
  for (int id : ids) {
    const auto rows = ctx.samplers.at(id).next(batch);
    auto d = ctx.data.train.subset(rows);
    inputs.push_back(std::move(d.x));
    labels.push_back(std::move(d.y));
  }
  const auto g = backward_split(devices, server, inputs, labels);
  if (!server.empty()) sgd_step(server, g.server, eta_e);
  for (std::size_t k = 0; k < devices.size(); ++k) sgd_step(devices[k], g.device[k], eta_d);
}

std::vector<double> sample_weights(const TrainContext& ctx, const std::vector<int>& ids) {
  std::vector<double> w;
  for (int id : ids) w.push_back(static_cast<double>(ctx.partitions.at(id).size()));
  return w;
}

}  // namespace

void run_cpsl_round(SplitModel& model, const ClusterAssignment& assignment, TrainContext& ctx,
                    const TrainerConfig& cfg) {
  for (const auto& members : assignment.clusters()) {
    const Network broadcast = model.device;
    std::vector<Network> devices(members.size(), broadcast);
    for (int l = 0; l < cfg.local_epochs; ++l) {
      cluster_step(devices, model.server, members, ctx, cfg.batch, cfg.eta_d, cfg.eta_e);
    }
    model.device = fedavg(devices, sample_weights(ctx, members), &broadcast);
  }
}

void run_sl_round(SplitModel& model, TrainContext& ctx, const TrainerConfig& cfg) {
  for (int n = 0; n < cfg.n_devices; ++n) {
    std::vector<Network> devices{model.device};
    for (int l = 0; l < cfg.local_epochs; ++l) {
      cluster_step(devices, model.server, {n}, ctx, cfg.batch, cfg.eta_d, cfg.eta_e);
    }
    model.device = std::move(devices.front());
  }
}

void run_fl_round(Network& model, TrainContext& ctx, const TrainerConfig& cfg) {
  Network none;
  std::vector<Network> locals;
  std::vector<int> ids;
  for (int n = 0; n < cfg.n_devices; ++n) {
    std::vector<Network> local{model};
    for (int l = 0; l < cfg.local_epochs; ++l) {
      cluster_step(local, none, {n}, ctx, cfg.batch, cfg.eta_fl, cfg.eta_fl);
    }
    locals.push_back(std::move(local.front()));
    ids.push_back(n);
  }
  model = fedavg(locals, sample_weights(ctx, ids), &model);
}

void run_cl_round(Network& model, TrainContext& ctx, const TrainerConfig& cfg) {
  const int steps = cfg.n_devices * cfg.local_epochs;
  for (int s = 0; s < steps; ++s) {
    const auto d = ctx.data.train.subset(ctx.pooled.next(cfg.batch));
    sgd_step(model, full_gradient(model, d.x, d.y), cfg.eta_cl);
  }
}

double accuracy(const Network& net, const Dataset& data) {
  if (data.size() == 0) return 0.0;
  const Matrix out = forward(net, data.x);
  int hit = 0;
  for (Eigen::Index r = 0; r < out.rows(); ++r) {
    Eigen::Index arg = 0;
    out.row(r).maxCoeff(&arg);
    if (arg == data.y[r]) ++hit;
  }
  return static_cast<double>(hit) / data.size();
}

double mean_loss(const Network& net, const Dataset& data) {
  if (data.size() == 0) return 0.0;
  return nll(forward(net, data.x), data.y) / data.size();
}

TrainMetrics run_training(TrainScheme scheme, const TrainerConfig& cfg,
                          const std::optional<ClusterAssignment>& assignment) {
  auto ctx = TrainContext::create(cfg);
  std::vector<int> widths{cfg.data.dims};
  std::vector<Activation> acts;
  for (int h : cfg.hidden) {
    widths.push_back(h);
    acts.push_back(Activation::Relu);
  }
  widths.push_back(cfg.data.n_classes);
  acts.push_back(Activation::Softmax);
  Network net = make_network(widths, acts, derive_seed(cfg.seed, 104));

  ClusterAssignment a = assignment
                            ? *assignment
                            : ClusterAssignment::sequential(cfg.n_devices, cfg.cluster_capacity);
  if (scheme == TrainScheme::CPSL) {
    if (a.device_count() != cfg.n_devices) {
      throw ValidationError("assignment does not cover the configured devices");
    }
    a.validate(cfg.cluster_capacity);
  }

  std::vector<int> all;
  for (const auto& p : ctx.partitions) all.insert(all.end(), p.begin(), p.end());
  const Dataset train = ctx.data.train.subset(all);

  TrainMetrics m;
  m.scheme = scheme;
  SplitModel sm = split(net, cfg.cut);
  for (int r = 1; r <= cfg.rounds; ++r) {
    switch (scheme) {
      case TrainScheme::CPSL:
        run_cpsl_round(sm, a, ctx, cfg);
        break;
      case TrainScheme::SL:
        run_sl_round(sm, ctx, cfg);
        break;
      case TrainScheme::FL:
        run_fl_round(net, ctx, cfg);
        break;
      case TrainScheme::CL:
        run_cl_round(net, ctx, cfg);
        break;
    }
    const Network& current =
        (scheme == TrainScheme::CPSL || scheme == TrainScheme::SL) ? (net = merge(sm)) : net;
    RoundMetrics rm;
    rm.round = r;
    rm.loss = mean_loss(current, train);
    rm.train_acc = accuracy(current, train);
    rm.test_acc = accuracy(current, ctx.data.test);
    rm.simulated_elapsed_s = r * cfg.round_latency_s;
    m.rounds.push_back(rm);
  }
  m.model = (scheme == TrainScheme::CPSL || scheme == TrainScheme::SL) ? merge(sm) : net;
  return m;
}

void write_metrics_csv(std::ostream& os, const TrainMetrics& m) {
  os << "round,loss,train_acc,test_acc,simulated_elapsed_s\n";
  for (const auto& r : m.rounds) {
    os << fmt::format("{},{:.17g},{:.17g},{:.17g},{:.17g}\n", r.round, r.loss, r.train_acc,
                      r.test_acc, r.simulated_elapsed_s);
  }
}

nlohmann::json checkpoint_to_json(const Network& net) {
  nlohmann::json layers = nlohmann::json::array();
  for (const auto& l : net.layers) {
    std::vector<double> w;
    w.reserve(l.w.size());
    for (Eigen::Index r = 0; r < l.w.rows(); ++r) {
      for (Eigen::Index c = 0; c < l.w.cols(); ++c) w.push_back(l.w(r, c));
    }
    layers.push_back({{"in", l.in()},
                      {"out", l.out()},
                      {"activation", to_string(l.act)},
                      {"weights", w},
                      {"bias", std::vector<double>(l.b.data(), l.b.data() + l.b.size())}});
  }
  return {{"layout", "layer-major; weights row-major (in x out), then bias"}, {"layers", layers}};
}

Network checkpoint_from_json(const nlohmann::json& j) {
  Network net;
  try {
    for (const auto& l : j.at("layers")) {
      DenseLayer d;
      const int in = l.at("in").get<int>();
      const int out = l.at("out").get<int>();
      const auto w = l.at("weights").get<std::vector<double>>();
      const auto b = l.at("bias").get<std::vector<double>>();
      if (static_cast<int>(w.size()) != in * out || static_cast<int>(b.size()) != out) {
        throw ShapeError("checkpoint: parameter count does not match layer shape");
      }
      d.w.resize(in, out);
      for (int r = 0; r < in; ++r) {
        for (int c = 0; c < out; ++c) d.w(r, c) = w[static_cast<std::size_t>(r) * out + c];
      }
      d.b = Eigen::Map<const Vector>(b.data(), out);
      d.act = activation_from_string(l.at("activation").get<std::string>());
      net.layers.push_back(std::move(d));
    }
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(fmt::format("checkpoint: {}", e.what()));
  }
  net.check();
  return net;
}

}  // namespace cpsl
