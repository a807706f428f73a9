#include "calib/mlp.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

#include "calib/rng.hpp"

namespace calib {

namespace {

constexpr char kCheckpointMagic[] = "calib-mlp-v1";

// Seed streams within a training run.
constexpr std::uint64_t kInitStream = 0;
constexpr std::uint64_t kShuffleStreamBase = 1;  // + epoch index

void check_dims(const std::vector<int>& layer_dims) {
  if (layer_dims.size() < 2) {
    throw ConfigError("need at least input and output layer dims");
  }
  for (int d : layer_dims) {
    if (d < 1) throw ConfigError("layer dims must be >= 1");
  }
  if (layer_dims.back() < 2) {
    throw ConfigError("output layer needs >= 2 classes");
  }
}

// Forward pass keeping pre-activations (z) and post-activations (a) per
// layer for backprop. a[0] is the input; hidden activations are rectified.
struct ForwardTrace {
  std::vector<std::vector<double>> a;
  std::vector<std::vector<double>> z;
};

void run_forward(const MlpModel& model, std::span<const double> x,
                 ForwardTrace& trace) {
  if (x.size() != static_cast<std::size_t>(model.layer_dims.front())) {
    throw UsageError("input has " + std::to_string(x.size()) + " features, model expects " +
                     std::to_string(model.layer_dims.front()));
  }
  const std::size_t layers = model.num_layers();
  trace.a.resize(layers + 1);
  trace.z.resize(layers);
  trace.a[0].assign(x.begin(), x.end());

  for (std::size_t l = 0; l < layers; ++l) {
    const std::size_t in = static_cast<std::size_t>(model.layer_dims[l]);
    const std::size_t out = static_cast<std::size_t>(model.layer_dims[l + 1]);
    const std::vector<double>& w = model.weights[l];
    const std::vector<double>& prev = trace.a[l];
    std::vector<double>& z = trace.z[l];
    z.assign(model.biases[l].begin(), model.biases[l].end());
    for (std::size_t r = 0; r < out; ++r) {
      double acc = z[r];
      const double* row = w.data() + r * in;
      for (std::size_t c = 0; c < in; ++c) acc += row[c] * prev[c];
      z[r] = acc;
    }
    if (l + 1 < layers) {
      std::vector<double>& act = trace.a[l + 1];
      act.resize(out);
      for (std::size_t r = 0; r < out; ++r) act[r] = z[r] > 0.0 ? z[r] : 0.0;
    } else {
      trace.a[l + 1] = z;
    }
  }
}

}  // namespace

void TrainConfig::validate() const {
  loss.validate();
  if (epochs < 0) throw ConfigError("epochs must be >= 0");
  if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
  if (!(momentum >= 0.0 && momentum < 1.0)) {
    throw ConfigError("momentum must be in [0, 1)");
  }
  for (int h : hidden_dims) {
    if (h < 1) throw ConfigError("hidden dims must be >= 1");
  }
  if (lr_schedule.empty()) throw ConfigError("lr_schedule must be non-empty");
  if (lr_schedule.front().epoch_start != 0) {
    throw ConfigError("lr_schedule must start at epoch 0");
  }
  for (std::size_t i = 0; i < lr_schedule.size(); ++i) {
    if (!(lr_schedule[i].lr > 0.0)) throw ConfigError("learning rates must be > 0");
    if (i > 0 && lr_schedule[i].epoch_start <= lr_schedule[i - 1].epoch_start) {
      throw ConfigError("lr_schedule epochs must be strictly increasing");
    }
  }
}

MlpModel init_mlp(const std::vector<int>& layer_dims, std::uint64_t seed) {
  check_dims(layer_dims);
  Xoshiro256pp rng(seed);
  MlpModel model;
  model.layer_dims = layer_dims;
  const std::size_t layers = layer_dims.size() - 1;
  model.weights.resize(layers);
  model.biases.resize(layers);
  for (std::size_t l = 0; l < layers; ++l) {
    const std::size_t in = static_cast<std::size_t>(layer_dims[l]);
    const std::size_t out = static_cast<std::size_t>(layer_dims[l + 1]);
    const double bound = 1.0 / std::sqrt(static_cast<double>(in));
    model.weights[l].resize(in * out);
    for (double& w : model.weights[l]) w = rng.uniform(-bound, bound);
    model.biases[l].assign(out, 0.0);
  }
  return model;
}

ParamGrads zeros_like(const MlpModel& model) {
  ParamGrads g;
  g.weights.resize(model.num_layers());
  g.biases.resize(model.num_layers());
  for (std::size_t l = 0; l < model.num_layers(); ++l) {
    g.weights[l].assign(model.weights[l].size(), 0.0);
    g.biases[l].assign(model.biases[l].size(), 0.0);
  }
  return g;
}

LogitVector forward(const MlpModel& model, std::span<const double> x) {
  ForwardTrace trace;
  run_forward(model, x, trace);
  return LogitVector(std::move(trace.a.back()));
}

double accumulate_backward(const MlpModel& model, std::span<const double> x,
                           int label, const LossSpec& spec, ParamGrads& acc) {
  ForwardTrace trace;
  run_forward(model, x, trace);

  const LossOutput loss = evaluate_loss(spec, LogitVector(trace.a.back()), label);

  std::vector<double> delta = loss.grad;
  for (std::size_t li = model.num_layers(); li-- > 0;) {
    const std::size_t in = static_cast<std::size_t>(model.layer_dims[li]);
    const std::size_t out = static_cast<std::size_t>(model.layer_dims[li + 1]);
    const std::vector<double>& prev = trace.a[li];
    std::vector<double>& gw = acc.weights[li];
    std::vector<double>& gb = acc.biases[li];
    for (std::size_t r = 0; r < out; ++r) {
      gb[r] += delta[r];
      double* grow = gw.data() + r * in;
      for (std::size_t c = 0; c < in; ++c) grow[c] += delta[r] * prev[c];
    }
    if (li == 0) break;
    const std::vector<double>& w = model.weights[li];
    std::vector<double> next(in, 0.0);
    for (std::size_t r = 0; r < out; ++r) {
      const double* row = w.data() + r * in;
      for (std::size_t c = 0; c < in; ++c) next[c] += row[c] * delta[r];
    }
    // Rectifier gate: units that were clamped pass no signal.
    for (std::size_t c = 0; c < in; ++c) {
      if (!(trace.z[li - 1][c] > 0.0)) next[c] = 0.0;
    }
    delta = std::move(next);
  }
  return loss.value;
}

std::pair<double, ParamGrads> backward(const MlpModel& model,
                                       std::span<const double> x, int label,
                                       const LossSpec& spec) {
  ParamGrads grads = zeros_like(model);
  const double value = accumulate_backward(model, x, label, spec, grads);
  return {value, std::move(grads)};
}

void sgd_step(MlpModel& model, const ParamGrads& grads, double lr,
              double momentum, ParamGrads& velocity) {
  if (!(lr > 0.0)) throw UsageError("learning rate must be > 0");
  if (!(momentum >= 0.0 && momentum < 1.0)) {
    throw UsageError("momentum must be in [0, 1)");
  }
  if (grads.weights.size() != model.num_layers() ||
      velocity.weights.size() != model.num_layers()) {
    throw UsageError("gradient/velocity shape does not match the model");
  }
  for (std::size_t l = 0; l < model.num_layers(); ++l) {
    if (grads.weights[l].size() != model.weights[l].size() ||
        grads.biases[l].size() != model.biases[l].size()) {
      throw UsageError("gradient shape does not match the model");
    }
    for (std::size_t i = 0; i < model.weights[l].size(); ++i) {
      velocity.weights[l][i] = momentum * velocity.weights[l][i] + grads.weights[l][i];
      model.weights[l][i] -= lr * velocity.weights[l][i];
    }
    for (std::size_t i = 0; i < model.biases[l].size(); ++i) {
      velocity.biases[l][i] = momentum * velocity.biases[l][i] + grads.biases[l][i];
      model.biases[l][i] -= lr * velocity.biases[l][i];
    }
  }
}

std::pair<MlpModel, TrainHistory> train(const TrainConfig& config,
                                        const Dataset& train_set,
                                        const Dataset& val_set) {
  config.validate();
  if (train_set.size() == 0) throw UsageError("train: empty training set");

  std::vector<int> layer_dims;
  layer_dims.push_back(train_set.d);
  layer_dims.insert(layer_dims.end(), config.hidden_dims.begin(),
                    config.hidden_dims.end());
  layer_dims.push_back(train_set.k);

  MlpModel model = init_mlp(layer_dims, derive_seed(config.seed, kInitStream));
  ParamGrads velocity = zeros_like(model);
  ParamGrads batch_grads = zeros_like(model);
  TrainHistory history;
  history.reserve(static_cast<std::size_t>(config.epochs));

  const std::size_t n = train_set.size();
  std::vector<std::size_t> order(n);

  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    double lr = config.lr_schedule.front().lr;
    for (const LrStep& step : config.lr_schedule) {
      if (step.epoch_start <= epoch) lr = step.lr;
    }

    std::iota(order.begin(), order.end(), 0);
    if (config.shuffle) {
      Xoshiro256pp rng(derive_seed(
          config.seed, kShuffleStreamBase + static_cast<std::uint64_t>(epoch)));
      shuffle(order, rng);
    }

    double loss_sum = 0.0;
    const std::size_t bs = static_cast<std::size_t>(config.batch_size);
    for (std::size_t start = 0; start < n; start += bs) {
      const std::size_t end = std::min(start + bs, n);
      for (auto& layer : batch_grads.weights) std::fill(layer.begin(), layer.end(), 0.0);
      for (auto& layer : batch_grads.biases) std::fill(layer.begin(), layer.end(), 0.0);
      for (std::size_t i = start; i < end; ++i) {
        const std::size_t idx = order[i];
        loss_sum += accumulate_backward(model, train_set.features[idx],
                                        train_set.labels[idx], config.loss,
                                        batch_grads);
      }
      const double inv_batch = 1.0 / static_cast<double>(end - start);
      for (auto& layer : batch_grads.weights)
        for (double& g : layer) g *= inv_batch;
      for (auto& layer : batch_grads.biases)
        for (double& g : layer) g *= inv_batch;
      sgd_step(model, batch_grads, lr, config.momentum, velocity);
    }

    EpochStats stats;
    stats.train_loss = loss_sum / static_cast<double>(n);
    if (val_set.size() > 0) {
      const PredictionSet preds = evaluate(model, val_set);
      double val_loss_sum = 0.0;
      for (const PredictionRecord& r : preds.records()) {
        val_loss_sum += evaluate_loss(config.loss, r.logits, r.label).value;
      }
      stats.val_loss = val_loss_sum / static_cast<double>(preds.size());
      stats.val_accuracy = accuracy(preds);
      stats.val_ece = ece(preds);
    } else {
      stats.val_loss = std::nan("");
      stats.val_accuracy = std::nan("");
      stats.val_ece = std::nan("");
    }
    history.push_back(stats);
  }
  return {std::move(model), std::move(history)};
}

PredictionSet evaluate(const MlpModel& model, const Dataset& ds) {
  PredictionSet preds;
  for (std::size_t i = 0; i < ds.size(); ++i) {
    preds.add(forward(model, ds.features[i]), ds.labels[i]);
  }
  return preds;
}

void save_checkpoint(const MlpModel& model, const std::string& config_hash,
                     const std::string& path) {
  std::string out;
  out += kCheckpointMagic;
  out += '\n';
  out += "config_hash ";
  out += config_hash.empty() ? "none" : config_hash;
  out += '\n';
  out += "layer_dims";
  for (int d : model.layer_dims) {
    out += ' ';
    out += std::to_string(d);
  }
  out += '\n';

  char buf[64];
  const auto append_params = [&](const char* tag, std::size_t l,
                                 const std::vector<double>& values) {
    out += tag;
    out += std::to_string(l);
    for (double v : values) {
      out += ' ';
      const auto res =
          std::to_chars(buf, buf + sizeof(buf), v, std::chars_format::general, 17);
      out.append(buf, res.ptr);
    }
    out += '\n';
  };
  for (std::size_t l = 0; l < model.num_layers(); ++l) {
    append_params("W", l, model.weights[l]);
    append_params("b", l, model.biases[l]);
  }

  std::ofstream file(path, std::ios::binary);
  if (!file) throw IoError("cannot open " + path + " for writing");
  file.write(out.data(), static_cast<std::streamsize>(out.size()));
  if (!file) throw IoError("failed writing " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream file(path, std::ios::binary);
  if (!file) throw IoError("cannot open " + path + " for reading");

  std::string line;
  std::size_t line_no = 0;
  const auto next_line = [&]() -> std::string& {
    if (!std::getline(file, line)) {
      throw ParseError(path, line_no + 1, "unexpected end of file");
    }
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    return line;
  };

  if (next_line() != kCheckpointMagic) {
    throw ParseError(path, line_no, "not a recognized checkpoint file");
  }

  Checkpoint ckpt;
  {
    std::istringstream ss(next_line());
    std::string key;
    ss >> key >> ckpt.config_hash;
    if (key != "config_hash" || ckpt.config_hash.empty()) {
      throw ParseError(path, line_no, "expected 'config_hash <value>'");
    }
  }
  {
    std::istringstream ss(next_line());
    std::string key;
    ss >> key;
    if (key != "layer_dims") throw ParseError(path, line_no, "expected 'layer_dims ...'");
    int d = 0;
    while (ss >> d) ckpt.model.layer_dims.push_back(d);
  }
  check_dims(ckpt.model.layer_dims);

  const auto parse_params = [&](const std::string& expected_tag,
                                std::size_t count) -> std::vector<double> {
    std::istringstream ss(next_line());
    std::string tag;
    ss >> tag;
    if (tag != expected_tag) {
      throw ParseError(path, line_no, "expected '" + expected_tag + "', got '" + tag + "'");
    }
    std::vector<double> values;
    values.reserve(count);
    std::string token;
    while (ss >> token) {
      double v = 0.0;
      const auto res = std::from_chars(token.data(), token.data() + token.size(), v);
      if (res.ec != std::errc() || res.ptr != token.data() + token.size() ||
          !std::isfinite(v)) {
        throw ParseError(path, line_no, "bad parameter value '" + token + "'");
      }
      values.push_back(v);
    }
    if (values.size() != count) {
      throw ParseError(path, line_no,
                       expected_tag + " needs " + std::to_string(count) + " values, got " +
                           std::to_string(values.size()));
    }
    return values;
  };

  const std::size_t layers = ckpt.model.layer_dims.size() - 1;
  for (std::size_t l = 0; l < layers; ++l) {
    const auto in = static_cast<std::size_t>(ckpt.model.layer_dims[l]);
    const auto out = static_cast<std::size_t>(ckpt.model.layer_dims[l + 1]);
    ckpt.model.weights.push_back(parse_params("W" + std::to_string(l), in * out));
    ckpt.model.biases.push_back(parse_params("b" + std::to_string(l), out));
  }
  return ckpt;
}

}  // namespace calib
