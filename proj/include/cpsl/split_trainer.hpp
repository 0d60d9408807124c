#pragma once

#include <cstdint>
#include <optional>
#include <ostream>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "cpsl/decisions.hpp"

namespace cpsl {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

// Softmax is only valid on the last layer; it is folded into the loss, so the
// layer itself emits logits.
enum class Activation { Identity, Relu, Softmax };
std::string to_string(Activation a);
Activation activation_from_string(const std::string& s);

struct DenseLayer {
  Matrix w;  // in x out
  Vector b;  // out
  Activation act = Activation::Relu;

  int in() const { return static_cast<int>(w.rows()); }
  int out() const { return static_cast<int>(w.cols()); }
};

struct Network {
  std::vector<DenseLayer> layers;

  bool empty() const { return layers.empty(); }
  long long parameter_count() const;
  void check() const;  // adjacent widths agree, softmax only last
};

// He-normal weights, zero biases. widths = {in, h1, ..., out}.
Network make_network(const std::vector<int>& widths, const std::vector<Activation>& acts,
                     std::uint64_t seed);
// Q -> 16 relu -> 16 relu -> classes softmax
Network default_toy_network(int inputs, int classes, std::uint64_t seed);

struct SplitModel {
  Network device;  // layers 1..v
  Network server;  // layers v+1..V
  int cut = 0;
};

SplitModel split(const Network& net, int cut);
Network merge(const SplitModel& model);

struct LayerGrad {
  Matrix w;
  Vector b;
};
using Gradients = std::vector<LayerGrad>;

struct ForwardCache {
  std::vector<Matrix> inputs;  // input to each layer
  std::vector<Matrix> pre;     // pre-activation of each layer
};

// Rows are samples. Returns the last layer's output (logits for softmax).
Matrix forward(const Network& net, const Matrix& x, ForwardCache* cache = nullptr);
// d_out is the gradient w.r.t. the network output; returns d_input and fills
// grads (unscaled, summed over rows).
Matrix backward(const Network& net, const ForwardCache& cache, const Matrix& d_out,
                Gradients* grads);

Matrix softmax_rows(const Matrix& logits);
// Summed NLL over rows and its gradient w.r.t. the logits (P - Y, unscaled).
double nll(const Matrix& logits, const std::vector<int>& labels, Matrix* d_logits = nullptr);

Matrix forward_device(const Network& device, const Matrix& x);
// Row-concatenates the smashed blocks in order and returns class
// probabilities (or raw outputs if the net does not end in softmax).
Matrix forward_server_concat(const Network& server, const std::vector<Matrix>& smashed);

struct SplitGrads {
  Gradients server;                // mean over all concatenated rows
  std::vector<Matrix> smashed;     // per device, scaled to its own-batch mean
  std::vector<Gradients> device;   // per device
  double loss = 0.0;               // mean NLL over all rows
};

// One split forward/backward for a cluster: device k runs devices[k] on
// inputs[k]; the server trains on the concatenation.
SplitGrads backward_split(const std::vector<Network>& devices, const Network& server,
                          const std::vector<Matrix>& inputs,
                          const std::vector<std::vector<int>>& labels);

// Unsplit mean-NLL gradient of a whole network.
Gradients full_gradient(const Network& net, const Matrix& x, const std::vector<int>& labels,
                        double* loss = nullptr);

void sgd_step(Network& net, const Gradients& g, double lr);

// w_ref + sum_k p_k (w_k - w_ref), p_k = weights_k / sum(weights). The
// reference defaults to the first model; a single model is returned as is.
Network fedavg(const std::vector<Network>& models, const std::vector<double>& weights,
               const Network* reference = nullptr);

// ---- data ----

struct Dataset {
  Matrix x;
  std::vector<int> y;
  int n_classes = 0;

  int size() const { return static_cast<int>(y.size()); }
  Dataset subset(const std::vector<int>& rows) const;
};

struct DatasetSpec {
  int n_classes = 10;
  int dims = 20;
  int samples_per_device = 180;
  int classes_per_device = 3;
  double separation = 1.0;  // std of class-mean coordinates; noise std is 1
  int test_per_class = 200;

  void validate() const;
};

struct SyntheticData {
  Dataset train;  // pool large enough for any non-IID draw
  Dataset test;
};

SyntheticData make_gaussian_mixture(const DatasetSpec& spec, int n_devices, std::uint64_t seed);

// Each device picks classes_per_device distinct classes at random and takes
// samples_per_device samples split evenly across them. Partitions are
// disjoint; throws ValidationError when a class runs out.
std::vector<std::vector<int>> partition_non_iid(const Dataset& data, int n_devices,
                                                int classes_per_device, int samples_per_device,
                                                std::uint64_t seed);

// Uniform minibatches without replacement; reshuffles when the epoch runs out.
class BatchSampler {
 public:
  BatchSampler(std::vector<int> rows, std::uint64_t seed);
  std::vector<int> next(int batch);

 private:
  std::vector<int> rows_;
  std::size_t pos_ = 0;
  std::mt19937_64 rng_;
};

// ---- training ----

enum class TrainScheme { CL, SL, CPSL, FL };
std::string to_string(TrainScheme s);
TrainScheme train_scheme_from_string(const std::string& s);

struct TrainerConfig {
  double eta_d = 0.05;
  double eta_e = 0.25;
  double eta_fl = 0.05;
  double eta_cl = 0.05;
  int batch = 16;
  int local_epochs = 1;
  int rounds = 100;
  int cut = 1;
  int n_devices = 30;
  int cluster_capacity = 5;
  std::vector<int> hidden{16, 16};
  std::uint64_t seed = 0;
  DatasetSpec data;
  double round_latency_s = 0.0;  // simulated seconds per round, 0 if unknown

  void validate() const;
};

struct RoundMetrics {
  int round = 0;
  double loss = 0.0;
  double train_acc = 0.0;
  double test_acc = 0.0;
  double simulated_elapsed_s = 0.0;
};

struct TrainMetrics {
  TrainScheme scheme = TrainScheme::CPSL;
  std::vector<RoundMetrics> rounds;
  Network model;
};

// Shared state for one training run: data, partitions, per-device samplers.
struct TrainContext {
  SyntheticData data;
  std::vector<std::vector<int>> partitions;
  std::vector<BatchSampler> samplers;
  BatchSampler pooled;

  static TrainContext create(const TrainerConfig& cfg);
};

// One CPSL round: clusters in order, L local epochs each, FedAvg, handoff.
// The server-side model carries over between clusters.
void run_cpsl_round(SplitModel& model, const ClusterAssignment& assignment, TrainContext& ctx,
                    const TrainerConfig& cfg);
void run_sl_round(SplitModel& model, TrainContext& ctx, const TrainerConfig& cfg);
void run_fl_round(Network& model, TrainContext& ctx, const TrainerConfig& cfg);
void run_cl_round(Network& model, TrainContext& ctx, const TrainerConfig& cfg);

// Full run. The CPSL assignment defaults to sequential chunks.
TrainMetrics run_training(TrainScheme scheme, const TrainerConfig& cfg,
                          const std::optional<ClusterAssignment>& assignment = std::nullopt);

double accuracy(const Network& net, const Dataset& data);
double mean_loss(const Network& net, const Dataset& data);

void write_metrics_csv(std::ostream& os, const TrainMetrics& m);
nlohmann::json checkpoint_to_json(const Network& net);
Network checkpoint_from_json(const nlohmann::json& j);

}  // namespace cpsl
