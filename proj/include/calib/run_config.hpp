#pragma once

#include <string>

#include <nlohmann/json.hpp>

#include "calib/dataset.hpp"
#include "calib/mlp.hpp"

namespace calib {

/// Bin counts used when reporting metrics.
struct MetricOptions {
  int ece_bins = 15;
  int reliability_bins = 25;
};

/// Pre-split dataset files, an alternative to generating blobs.
struct DataPaths {
  std::string train;
  std::string val;
  std::string test;
};

/// How to cut a generated dataset into train/val/test.
struct SplitSpec {
  double train = 0.6;
  double val = 0.2;
  double test = 0.2;
  std::uint64_t seed = 1;
};

/// One experiment, fully specified: where the data comes from (generated
/// blobs + split, or three CSV paths), how to train, how to report, and
/// where outputs go. Parsed strictly from JSON — unknown keys are rejected
/// so a typo cannot silently fall back to a default.
struct RunConfig {
  std::string output_dir;
  bool use_blobs = true;
  BlobSpec blobs;
  SplitSpec split;
  DataPaths paths;
  TrainConfig train;
  MetricOptions metrics;
};

/// Strict schema validation; throws ConfigError naming the offending key.
RunConfig parse_run_config(const nlohmann::json& doc);

RunConfig load_run_config(const std::string& path);

/// Canonical JSON echo of a config (keys sorted by nlohmann), used for
/// manifests and config hashing. parse(to_json(cfg)) == cfg.
nlohmann::json run_config_to_json(const RunConfig& cfg);

/// FNV-1a 64-bit hash of a canonical JSON dump, as 16 hex digits. Stored in
/// checkpoints so a model can be matched to the config that produced it.
std::string config_hash(const nlohmann::json& doc);

LossKind loss_kind_from_name(const std::string& name);
std::string loss_kind_name(LossKind kind);

}  // namespace calib
