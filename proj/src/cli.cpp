#include "calib/cli.hpp"

#include <cstdio>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "calib/commands.hpp"

namespace calib {

namespace {

// Flags that override fields of a loaded run config.
struct TrainOverrides {
  std::string out;
  std::string loss_kind;
  bool has_seed = false;
  std::uint64_t seed = 0;
  bool has_epochs = false;
  int epochs = 0;
  bool has_alpha = false;
  double alpha = 0.0;
  bool has_gamma = false;
  double gamma = 0.0;
  bool has_margin = false;
  double margin = 0.0;
  bool has_lambda = false;
  double lambda = 0.0;

  void apply(RunConfig& cfg) const {
    if (!out.empty()) cfg.output_dir = out;
    if (!loss_kind.empty()) cfg.train.loss.kind = loss_kind_from_name(loss_kind);
    if (has_seed) cfg.train.seed = seed;
    if (has_epochs) cfg.train.epochs = epochs;
    if (has_alpha) cfg.train.loss.alpha = alpha;
    if (has_gamma) cfg.train.loss.gamma = gamma;
    if (has_margin) cfg.train.loss.margin = margin;
    if (has_lambda) cfg.train.loss.lambda = lambda;
    cfg.train.validate();
  }
};

}  // namespace

int run_cli(int argc, const char* const* argv) {
  CLI::App app{"calibration-aware training, evaluation, and temperature scaling"};
  app.require_subcommand(1);

  // gen-data ---------------------------------------------------------------
  auto* gen = app.add_subcommand("gen-data", "generate blob datasets and a manifest");
  std::string gen_config;
  std::string gen_out;
  bool gen_has_seed = false;
  std::uint64_t gen_seed = 0;
  gen->add_option("--config", gen_config, "run config JSON")->required();
  gen->add_option("--out", gen_out, "override output_dir");
  gen->add_option("--seed", gen_seed, "override the generator seed")
      ->each([&](const std::string&) { gen_has_seed = true; });

  // train ------------------------------------------------------------------
  auto* tr = app.add_subcommand("train", "train a classifier and score the test set");
  std::string train_config;
  TrainOverrides overrides;
  tr->add_option("--config", train_config, "run config JSON")->required();
  tr->add_option("--out", overrides.out, "override output_dir");
  tr->add_option("--loss", overrides.loss_kind,
                 "override loss kind (cross_entropy, label_smoothing, focal, "
                 "scheduled_focal, entropy_penalty, margin_smoothing)");
  tr->add_option("--seed", overrides.seed, "override training seed")
      ->each([&](const std::string&) { overrides.has_seed = true; });
  tr->add_option("--epochs", overrides.epochs, "override epoch count")
      ->each([&](const std::string&) { overrides.has_epochs = true; });
  tr->add_option("--alpha", overrides.alpha, "override smoothing mass")
      ->each([&](const std::string&) { overrides.has_alpha = true; });
  tr->add_option("--gamma", overrides.gamma, "override focal exponent")
      ->each([&](const std::string&) { overrides.has_gamma = true; });
  tr->add_option("--margin", overrides.margin, "override logit-distance margin")
      ->each([&](const std::string&) { overrides.has_margin = true; });
  tr->add_option("--lambda", overrides.lambda, "override margin penalty weight")
      ->each([&](const std::string&) { overrides.has_lambda = true; });

  // eval -------------------------------------------------------------------
  auto* ev = app.add_subcommand("eval", "metrics for a prediction CSV");
  EvalArgs eval_args;
  ev->add_option("predictions", eval_args.predictions_path, "prediction CSV")->required();
  ev->add_option("--bins", eval_args.ece_bins, "equal-width bins for ECE/AECE");
  ev->add_option("--diagram-bins", eval_args.reliability_bins,
                 "bins for the reliability table");
  ev->add_option("--report-out", eval_args.report_out, "write the JSON report here");
  ev->add_option("--reliability-out", eval_args.reliability_out,
                 "write the reliability table CSV here");

  // calibrate ----------------------------------------------------------------
  auto* cal = app.add_subcommand("calibrate",
                                 "fit a temperature on validation predictions");
  CalibrateArgs cal_args;
  cal->add_option("--val", cal_args.val_path, "validation prediction CSV")->required();
  cal->add_option("--test", cal_args.test_path, "test prediction CSV")->required();
  cal->add_option("--t-min", cal_args.t_min, "grid lower bound");
  cal->add_option("--t-max", cal_args.t_max, "grid upper bound");
  cal->add_option("--resolution", cal_args.resolution, "grid step");
  cal->add_option("--report-out", cal_args.report_out, "write the JSON report here");

  // verify -------------------------------------------------------------------
  auto* ver = app.add_subcommand("verify", "run the randomized theory checks");
  VerifyOptions verify_options;
  ver->add_option("--seed", verify_options.seed, "suite seed");
  ver->add_option("--inject-gradient-fault", verify_options.inject_gradient_fault)
      ->group("");  // test hook, hidden from --help

  // sweep-margin ---------------------------------------------------------------
  auto* sw = app.add_subcommand("sweep-margin",
                                "train across margins and matched weights");
  std::string sweep_config;
  std::string sweep_out;
  SweepArgs sweep_args;
  sw->add_option("--config", sweep_config, "run config JSON")->required();
  sw->add_option("--out", sweep_out, "override output_dir");
  sw->add_option("--margins", sweep_args.margins, "margins to train")
      ->delimiter(',');
  sw->add_option("--weights", sweep_args.weights,
                 "weights for the smoothing comparison")
      ->delimiter(',');

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (gen->parsed()) {
      RunConfig cfg = load_run_config(gen_config);
      if (!gen_out.empty()) cfg.output_dir = gen_out;
      if (gen_has_seed) cfg.blobs.seed = gen_seed;
      return cmd_gen_data(cfg);
    }
    if (tr->parsed()) {
      RunConfig cfg = load_run_config(train_config);
      overrides.apply(cfg);
      return cmd_train(cfg);
    }
    if (ev->parsed()) return cmd_eval(eval_args);
    if (cal->parsed()) return cmd_calibrate(cal_args);
    if (ver->parsed()) return cmd_verify(verify_options);
    if (sw->parsed()) {
      RunConfig cfg = load_run_config(sweep_config);
      if (!sweep_out.empty()) cfg.output_dir = sweep_out;
      return cmd_sweep_margin(cfg, sweep_args);
    }
    std::fprintf(stderr, "no subcommand selected\n");
    return 2;
  } catch (const ConfigError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return 2;
  } catch (const UsageError& e) {
    std::fprintf(stderr, "usage error: %s\n", e.what());
    return 2;
  } catch (const ParseError& e) {
    std::fprintf(stderr, "data error: %s\n", e.what());
    return 3;
  } catch (const IoError& e) {
    std::fprintf(stderr, "data error: %s\n", e.what());
    return 3;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
}

}  // namespace calib
