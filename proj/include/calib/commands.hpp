#pragma once

#include <array>
#include <string>
#include <vector>

#include "calib/run_config.hpp"
#include "calib/verify.hpp"

namespace calib {

/// Loads the three datasets a config describes: generated blobs put through
/// the configured split, or the three CSV paths. Order: train, val, test.
std::array<Dataset, 3> resolve_data(const RunConfig& cfg);

/// Writes train.csv, val.csv, test.csv and manifest.json into
/// cfg.output_dir. Deterministic: identical configs produce byte-identical
/// files.
int cmd_gen_data(const RunConfig& cfg);

/// Trains per the config and writes checkpoint.txt, history.csv,
/// val_predictions.csv, test_predictions.csv, and metrics.json into
/// cfg.output_dir.
int cmd_train(const RunConfig& cfg);

struct EvalArgs {
  std::string predictions_path;
  int ece_bins = 15;
  int reliability_bins = 25;
  std::string report_out;       // optional JSON report path
  std::string reliability_out;  // optional CSV table path
};

/// Prints accuracy/ECE/AECE (two-decimal percentages) and NLL for a
/// prediction CSV; optionally writes the JSON report and the reliability
/// table (columns bin_lo, bin_hi, count, accuracy, mean_confidence).
int cmd_eval(const EvalArgs& args);

struct CalibrateArgs {
  std::string val_path;
  std::string test_path;
  double t_min = 0.1;
  double t_max = 5.0;
  double resolution = 0.1;
  std::string report_out;  // optional JSON report path
};

/// Fits a temperature on the validation predictions, applies it to the test
/// predictions, and reports pre/post metrics plus the grid searched.
int cmd_calibrate(const CalibrateArgs& args);

/// Runs the randomized theory suite and prints one line per property.
/// Returns 0 when everything passes, 4 otherwise.
int cmd_verify(const VerifyOptions& options);

struct SweepArgs {
  std::vector<double> margins = {0, 2, 4, 6, 8, 10};
  std::vector<double> weights = {0.05, 0.1, 0.2, 0.3};
};

/// Trains one margin-penalty model per margin (shared seed and data) and
/// writes margin_sweep.csv; then compares label smoothing against the
/// zero-margin penalty at matched weights (plus a cross-entropy baseline
/// row) into weight_sweep.csv.
int cmd_sweep_margin(const RunConfig& cfg, const SweepArgs& args);

}  // namespace calib
