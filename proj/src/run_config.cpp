#include "calib/run_config.hpp"

#include <cinttypes>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <initializer_list>

namespace calib {

namespace {

using nlohmann::json;

void reject_unknown_keys(const json& obj, const std::string& where,
                         std::initializer_list<const char*> allowed) {
  for (const auto& item : obj.items()) {
    bool known = false;
    for (const char* key : allowed) {
      if (item.key() == key) {
        known = true;
        break;
      }
    }
    if (!known) {
      throw ConfigError("unknown key '" + item.key() + "' in " + where);
    }
  }
}

const json& require_object(const json& obj, const std::string& where,
                           const char* key) {
  if (!obj.contains(key)) {
    throw ConfigError(where + " requires '" + std::string(key) + "'");
  }
  const json& child = obj.at(key);
  if (!child.is_object()) {
    throw ConfigError(where + "." + key + " must be an object");
  }
  return child;
}

double get_double(const json& obj, const std::string& where, const char* key,
                  double fallback) {
  if (!obj.contains(key)) return fallback;
  const json& v = obj.at(key);
  if (!v.is_number()) {
    throw ConfigError(where + "." + key + " must be a number");
  }
  return v.get<double>();
}

int get_int(const json& obj, const std::string& where, const char* key,
            int fallback) {
  if (!obj.contains(key)) return fallback;
  const json& v = obj.at(key);
  if (!v.is_number_integer()) {
    throw ConfigError(where + "." + key + " must be an integer");
  }
  return v.get<int>();
}

std::uint64_t get_seed(const json& obj, const std::string& where, const char* key,
                       std::uint64_t fallback) {
  if (!obj.contains(key)) return fallback;
  const json& v = obj.at(key);
  if (!v.is_number_integer() || (v.is_number_integer() && !v.is_number_unsigned() &&
                                 v.get<std::int64_t>() < 0)) {
    throw ConfigError(where + "." + key + " must be a non-negative integer");
  }
  return v.get<std::uint64_t>();
}

bool get_bool(const json& obj, const std::string& where, const char* key,
              bool fallback) {
  if (!obj.contains(key)) return fallback;
  const json& v = obj.at(key);
  if (!v.is_boolean()) {
    throw ConfigError(where + "." + key + " must be a boolean");
  }
  return v.get<bool>();
}

std::string get_string(const json& obj, const std::string& where, const char* key) {
  if (!obj.contains(key) || !obj.at(key).is_string()) {
    throw ConfigError(where + " requires string '" + std::string(key) + "'");
  }
  return obj.at(key).get<std::string>();
}

BlobSpec parse_blobs(const json& obj) {
  reject_unknown_keys(obj, "data.blobs",
                      {"k", "d", "n_per_class", "center_scale", "noise_sigma", "seed"});
  BlobSpec spec;
  spec.k = get_int(obj, "data.blobs", "k", spec.k);
  spec.d = get_int(obj, "data.blobs", "d", spec.d);
  spec.n_per_class = get_int(obj, "data.blobs", "n_per_class", spec.n_per_class);
  spec.center_scale = get_double(obj, "data.blobs", "center_scale", spec.center_scale);
  spec.noise_sigma = get_double(obj, "data.blobs", "noise_sigma", spec.noise_sigma);
  spec.seed = get_seed(obj, "data.blobs", "seed", spec.seed);
  spec.validate();
  return spec;
}

SplitSpec parse_split(const json& obj) {
  reject_unknown_keys(obj, "data.split", {"train", "val", "test", "seed"});
  SplitSpec split;
  split.train = get_double(obj, "data.split", "train", split.train);
  split.val = get_double(obj, "data.split", "val", split.val);
  split.test = get_double(obj, "data.split", "test", split.test);
  split.seed = get_seed(obj, "data.split", "seed", split.seed);
  return split;
}

LossSpec parse_loss(const json& obj) {
  reject_unknown_keys(obj, "train.loss",
                      {"kind", "alpha", "gamma", "gamma_low", "gamma_high",
                       "threshold", "ecp_weight", "margin", "lambda"});
  LossSpec spec;
  spec.kind = loss_kind_from_name(get_string(obj, "train.loss", "kind"));
  spec.alpha = get_double(obj, "train.loss", "alpha", spec.alpha);
  spec.gamma = get_double(obj, "train.loss", "gamma", spec.gamma);
  spec.gamma_low = get_double(obj, "train.loss", "gamma_low", spec.gamma_low);
  spec.gamma_high = get_double(obj, "train.loss", "gamma_high", spec.gamma_high);
  spec.threshold = get_double(obj, "train.loss", "threshold", spec.threshold);
  spec.ecp_weight = get_double(obj, "train.loss", "ecp_weight", spec.ecp_weight);
  spec.margin = get_double(obj, "train.loss", "margin", spec.margin);
  spec.lambda = get_double(obj, "train.loss", "lambda", spec.lambda);
  spec.validate();
  return spec;
}

TrainConfig parse_train(const json& obj) {
  reject_unknown_keys(obj, "train",
                      {"loss", "hidden_dims", "epochs", "batch_size", "momentum",
                       "seed", "shuffle", "lr_schedule"});
  TrainConfig cfg;
  if (obj.contains("loss")) {
    const json& loss = obj.at("loss");
    if (!loss.is_object()) throw ConfigError("train.loss must be an object");
    cfg.loss = parse_loss(loss);
  }
  if (obj.contains("hidden_dims")) {
    const json& dims = obj.at("hidden_dims");
    if (!dims.is_array()) throw ConfigError("train.hidden_dims must be an array");
    cfg.hidden_dims.clear();
    for (const json& v : dims) {
      if (!v.is_number_integer()) {
        throw ConfigError("train.hidden_dims entries must be integers");
      }
      cfg.hidden_dims.push_back(v.get<int>());
    }
  }
  cfg.epochs = get_int(obj, "train", "epochs", cfg.epochs);
  cfg.batch_size = get_int(obj, "train", "batch_size", cfg.batch_size);
  cfg.momentum = get_double(obj, "train", "momentum", cfg.momentum);
  cfg.seed = get_seed(obj, "train", "seed", cfg.seed);
  cfg.shuffle = get_bool(obj, "train", "shuffle", cfg.shuffle);
  if (obj.contains("lr_schedule")) {
    const json& sched = obj.at("lr_schedule");
    if (!sched.is_array() || sched.empty()) {
      throw ConfigError("train.lr_schedule must be a non-empty array");
    }
    cfg.lr_schedule.clear();
    for (const json& stepv : sched) {
      if (!stepv.is_object()) {
        throw ConfigError("train.lr_schedule entries must be objects");
      }
      reject_unknown_keys(stepv, "train.lr_schedule[]", {"epoch", "lr"});
      LrStep step;
      step.epoch_start = get_int(stepv, "train.lr_schedule[]", "epoch", -1);
      step.lr = get_double(stepv, "train.lr_schedule[]", "lr", 0.0);
      cfg.lr_schedule.push_back(step);
    }
  }
  cfg.validate();
  return cfg;
}

}  // namespace

RunConfig parse_run_config(const json& doc) {
  if (!doc.is_object()) throw ConfigError("config root must be a JSON object");
  reject_unknown_keys(doc, "config", {"output_dir", "data", "train", "metrics"});

  RunConfig cfg;
  if (doc.contains("output_dir")) {
    cfg.output_dir = get_string(doc, "config", "output_dir");
  }

  const json& data = require_object(doc, "config", "data");
  reject_unknown_keys(data, "data", {"blobs", "split", "paths"});
  const bool has_blobs = data.contains("blobs");
  const bool has_paths = data.contains("paths");
  if (has_blobs == has_paths) {
    throw ConfigError("data requires exactly one of 'blobs' or 'paths'");
  }
  cfg.use_blobs = has_blobs;
  if (has_blobs) {
    cfg.blobs = parse_blobs(require_object(data, "data", "blobs"));
    if (data.contains("split")) {
      cfg.split = parse_split(require_object(data, "data", "split"));
    }
  } else {
    if (data.contains("split")) {
      throw ConfigError("data.split only applies to generated blobs");
    }
    const json& paths = require_object(data, "data", "paths");
    reject_unknown_keys(paths, "data.paths", {"train", "val", "test"});
    cfg.paths.train = get_string(paths, "data.paths", "train");
    cfg.paths.val = get_string(paths, "data.paths", "val");
    cfg.paths.test = get_string(paths, "data.paths", "test");
  }

  if (doc.contains("train")) {
    cfg.train = parse_train(require_object(doc, "config", "train"));
  }
  if (doc.contains("metrics")) {
    const json& metrics = require_object(doc, "config", "metrics");
    reject_unknown_keys(metrics, "metrics", {"ece_bins", "reliability_bins"});
    cfg.metrics.ece_bins = get_int(metrics, "metrics", "ece_bins", cfg.metrics.ece_bins);
    cfg.metrics.reliability_bins =
        get_int(metrics, "metrics", "reliability_bins", cfg.metrics.reliability_bins);
    if (cfg.metrics.ece_bins < 1 || cfg.metrics.reliability_bins < 1) {
      throw ConfigError("metrics bin counts must be >= 1");
    }
  }
  return cfg;
}

RunConfig load_run_config(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path + " for reading");
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError("invalid JSON in " + path + ": " + e.what());
  }
  return parse_run_config(doc);
}

json run_config_to_json(const RunConfig& cfg) {
  json doc;
  doc["output_dir"] = cfg.output_dir;
  if (cfg.use_blobs) {
    doc["data"]["blobs"] = {
        {"k", cfg.blobs.k},
        {"d", cfg.blobs.d},
        {"n_per_class", cfg.blobs.n_per_class},
        {"center_scale", cfg.blobs.center_scale},
        {"noise_sigma", cfg.blobs.noise_sigma},
        {"seed", cfg.blobs.seed},
    };
    doc["data"]["split"] = {
        {"train", cfg.split.train},
        {"val", cfg.split.val},
        {"test", cfg.split.test},
        {"seed", cfg.split.seed},
    };
  } else {
    doc["data"]["paths"] = {
        {"train", cfg.paths.train},
        {"val", cfg.paths.val},
        {"test", cfg.paths.test},
    };
  }
  doc["train"]["loss"] = {
      {"kind", loss_kind_name(cfg.train.loss.kind)},
      {"alpha", cfg.train.loss.alpha},
      {"gamma", cfg.train.loss.gamma},
      {"gamma_low", cfg.train.loss.gamma_low},
      {"gamma_high", cfg.train.loss.gamma_high},
      {"threshold", cfg.train.loss.threshold},
      {"ecp_weight", cfg.train.loss.ecp_weight},
      {"margin", cfg.train.loss.margin},
      {"lambda", cfg.train.loss.lambda},
  };
  doc["train"]["hidden_dims"] = cfg.train.hidden_dims;
  doc["train"]["epochs"] = cfg.train.epochs;
  doc["train"]["batch_size"] = cfg.train.batch_size;
  doc["train"]["momentum"] = cfg.train.momentum;
  doc["train"]["seed"] = cfg.train.seed;
  doc["train"]["shuffle"] = cfg.train.shuffle;
  doc["train"]["lr_schedule"] = json::array();
  for (const LrStep& step : cfg.train.lr_schedule) {
    doc["train"]["lr_schedule"].push_back({{"epoch", step.epoch_start}, {"lr", step.lr}});
  }
  doc["metrics"] = {
      {"ece_bins", cfg.metrics.ece_bins},
      {"reliability_bins", cfg.metrics.reliability_bins},
  };
  return doc;
}

std::string config_hash(const json& doc) {
  // The hash identifies what was computed, not where it was written, so the
  // output directory is excluded before hashing.
  json canonical = doc;
  canonical.erase("output_dir");
  const std::string dump = canonical.dump();
  std::uint64_t hash = 14695981039346656037ULL;
  for (unsigned char c : dump) {
    hash ^= c;
    hash *= 1099511628211ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016" PRIx64, hash);
  return buf;
}

LossKind loss_kind_from_name(const std::string& name) {
  if (name == "cross_entropy") return LossKind::kCrossEntropy;
  if (name == "label_smoothing") return LossKind::kLabelSmoothing;
  if (name == "focal") return LossKind::kFocal;
  if (name == "scheduled_focal") return LossKind::kScheduledFocal;
  if (name == "entropy_penalty") return LossKind::kEntropyPenalty;
  if (name == "margin_smoothing") return LossKind::kMarginSmoothing;
  throw ConfigError("unknown loss kind '" + name +
                    "' (expected cross_entropy, label_smoothing, focal, "
                    "scheduled_focal, entropy_penalty, or margin_smoothing)");
}

std::string loss_kind_name(LossKind kind) {
  switch (kind) {
    case LossKind::kCrossEntropy: return "cross_entropy";
    case LossKind::kLabelSmoothing: return "label_smoothing";
    case LossKind::kFocal: return "focal";
    case LossKind::kScheduledFocal: return "scheduled_focal";
    case LossKind::kEntropyPenalty: return "entropy_penalty";
    case LossKind::kMarginSmoothing: return "margin_smoothing";
  }
  throw ConfigError("unknown loss kind enum value");
}

}  // namespace calib
