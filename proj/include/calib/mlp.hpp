#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "calib/dataset.hpp"
#include "calib/losses.hpp"
#include "calib/metrics.hpp"

namespace calib {

/// Fully-connected network with rectifier hidden layers and an identity
/// output layer. Layer l maps layer_dims[l] inputs to layer_dims[l+1]
/// outputs; weights[l] is row-major (out x in).
struct MlpModel {
  std::vector<int> layer_dims;
  std::vector<std::vector<double>> weights;
  std::vector<std::vector<double>> biases;

  std::size_t num_layers() const noexcept { return weights.size(); }
};

/// Gradients (or momentum buffers) shaped exactly like a model's parameters.
struct ParamGrads {
  std::vector<std::vector<double>> weights;
  std::vector<std::vector<double>> biases;
};

/// Learning rate in force from `epoch_start` until the next step.
struct LrStep {
  int epoch_start = 0;
  double lr = 0.1;
};

/// Everything that determines a training run besides the data itself.
/// hidden_dims fixes the architecture between the data's input width and
/// class count, so (config, data) fully specify the trained model.
struct TrainConfig {
  LossSpec loss;
  std::vector<int> hidden_dims = {64};
  int epochs = 40;
  int batch_size = 64;
  std::vector<LrStep> lr_schedule = {{0, 0.1}};
  double momentum = 0.9;
  std::uint64_t seed = 1;
  bool shuffle = true;

  void validate() const;
};

/// One row of the per-epoch training record. Validation fields are NaN when
/// training runs without a validation set.
struct EpochStats {
  double train_loss = 0.0;
  double val_loss = 0.0;
  double val_accuracy = 0.0;
  double val_ece = 0.0;
};

using TrainHistory = std::vector<EpochStats>;

/// Weights uniform on (-1/sqrt(fan_in), 1/sqrt(fan_in)), biases zero; the
/// same seed reproduces the same parameters bit-for-bit.
MlpModel init_mlp(const std::vector<int>& layer_dims, std::uint64_t seed);

ParamGrads zeros_like(const MlpModel& model);

LogitVector forward(const MlpModel& model, std::span<const double> x);

/// Loss value and parameter gradients for one sample: the configured loss's
/// logit gradient backpropagated through the network.
std::pair<double, ParamGrads> backward(const MlpModel& model,
                                       std::span<const double> x, int label,
                                       const LossSpec& spec);

/// Adds one sample's parameter gradients into `acc` (shaped by zeros_like)
/// and returns the sample's loss value. Lets the batch loop reuse buffers.
double accumulate_backward(const MlpModel& model, std::span<const double> x,
                           int label, const LossSpec& spec, ParamGrads& acc);

/// Classical momentum update: v <- momentum*v + g; theta <- theta - lr*v.
void sgd_step(MlpModel& model, const ParamGrads& grads, double lr,
              double momentum, ParamGrads& velocity);

/// Mini-batch SGD per the config. Each epoch reshuffles with a generator
/// derived from (seed, epoch), so runs are reproducible bit-for-bit. Batch
/// gradients are the mean over the batch, accumulated in sample order.
std::pair<MlpModel, TrainHistory> train(const TrainConfig& config,
                                        const Dataset& train_set,
                                        const Dataset& val_set);

/// Forward pass over a dataset, preserving order. An empty dataset yields an
/// empty PredictionSet (which the metrics layer will refuse).
PredictionSet evaluate(const MlpModel& model, const Dataset& ds);

/// Plain-text checkpoint: versioned magic line, the hash of the config that
/// produced the model, layer dims, then row-major parameters per layer at
/// 17 significant digits (round-trips bit-exactly).
void save_checkpoint(const MlpModel& model, const std::string& config_hash,
                     const std::string& path);

struct Checkpoint {
  MlpModel model;
  std::string config_hash;
};

Checkpoint load_checkpoint(const std::string& path);

}  // namespace calib
