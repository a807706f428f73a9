#include "calib/commands.hpp"

#include <charconv>
#include <cstdio>
#include <filesystem>
#include <fstream>

#include "calib/metrics.hpp"
#include "calib/temperature.hpp"

namespace calib {

namespace {

namespace fs = std::filesystem;

// Shortest decimal form that parses back to the same double: exact like the
// 17-digit data files, but keeps grid values such as 0.05 readable.
void append_double(std::string& out, double value) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), value);
  out.append(buf, res.ptr);
}

std::string percent(double fraction) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.2f", fraction * 100.0);
  return buf;
}

void write_file(const std::string& path, const std::string& contents) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open " + path + " for writing");
  out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
  if (!out) throw IoError("failed writing " + path);
}

void write_json(const std::string& path, const nlohmann::json& doc) {
  write_file(path, doc.dump(2) + "\n");
}

std::string output_dir_of(const RunConfig& cfg) {
  if (cfg.output_dir.empty()) {
    throw ConfigError("config needs a non-empty output_dir");
  }
  fs::create_directories(cfg.output_dir);
  return cfg.output_dir;
}

std::string join(const std::string& dir, const char* name) {
  return (fs::path(dir) / name).string();
}

std::string reliability_csv(const std::vector<BinStats>& bins) {
  std::string out = "bin_lo,bin_hi,count,accuracy,mean_confidence\n";
  for (const BinStats& b : bins) {
    append_double(out, b.lo);
    out += ',';
    append_double(out, b.hi);
    out += ',';
    out += std::to_string(b.count);
    out += ',';
    append_double(out, b.accuracy);
    out += ',';
    append_double(out, b.mean_confidence);
    out += '\n';
  }
  return out;
}

nlohmann::json metrics_json(const PredictionSet& preds, int ece_bins) {
  const double acc = accuracy(preds);
  const double e = ece(preds, ece_bins);
  const double n = nll(preds);
  nlohmann::json report{
      {"samples", preds.size()},
      {"accuracy", acc},
      {"accuracy_percent", percent(acc)},
      {"ece", e},
      {"ece_percent", percent(e)},
      {"aece", nullptr},
      {"aece_percent", nullptr},
      {"nll", n},
      {"ece_bins", ece_bins},
  };
  // Adaptive bins need at least one sample each; below that the statistic
  // does not exist, so the report carries null rather than a made-up number.
  if (preds.size() >= static_cast<std::size_t>(ece_bins)) {
    const double ae = aece(preds, ece_bins);
    report["aece"] = ae;
    report["aece_percent"] = percent(ae);
  }
  return report;
}

}  // namespace

std::array<Dataset, 3> resolve_data(const RunConfig& cfg) {
  if (cfg.use_blobs) {
    const Dataset all = gen_blobs(cfg.blobs);
    return split_dataset(all, cfg.split.train, cfg.split.val, cfg.split.test,
                         cfg.split.seed);
  }
  return {load_dataset_csv(cfg.paths.train), load_dataset_csv(cfg.paths.val),
          load_dataset_csv(cfg.paths.test)};
}

int cmd_gen_data(const RunConfig& cfg) {
  if (!cfg.use_blobs) {
    throw ConfigError("gen-data needs a config with data.blobs");
  }
  const std::string dir = output_dir_of(cfg);
  const auto parts = resolve_data(cfg);
  save_dataset_csv(parts[0], join(dir, "train.csv"));
  save_dataset_csv(parts[1], join(dir, "val.csv"));
  save_dataset_csv(parts[2], join(dir, "test.csv"));

  const nlohmann::json echo = run_config_to_json(cfg);
  nlohmann::json manifest{
      {"blobs", echo.at("data").at("blobs")},
      {"split", echo.at("data").at("split")},
      {"sizes",
       {{"train", parts[0].size()}, {"val", parts[1].size()}, {"test", parts[2].size()}}},
      {"files", {{"train", "train.csv"}, {"val", "val.csv"}, {"test", "test.csv"}}},
  };
  write_json(join(dir, "manifest.json"), manifest);

  std::printf("wrote %zu train / %zu val / %zu test samples to %s\n",
              parts[0].size(), parts[1].size(), parts[2].size(), dir.c_str());
  return 0;
}

int cmd_train(const RunConfig& cfg) {
  const std::string dir = output_dir_of(cfg);
  const auto parts = resolve_data(cfg);
  const auto [model, history] = train(cfg.train, parts[0], parts[1]);

  const std::string hash = config_hash(run_config_to_json(cfg));
  save_checkpoint(model, hash, join(dir, "checkpoint.txt"));

  std::string hist_csv = "epoch,train_loss,val_loss,val_acc,val_ece\n";
  for (std::size_t e = 0; e < history.size(); ++e) {
    hist_csv += std::to_string(e);
    hist_csv += ',';
    append_double(hist_csv, history[e].train_loss);
    hist_csv += ',';
    append_double(hist_csv, history[e].val_loss);
    hist_csv += ',';
    append_double(hist_csv, history[e].val_accuracy);
    hist_csv += ',';
    append_double(hist_csv, history[e].val_ece);
    hist_csv += '\n';
  }
  write_file(join(dir, "history.csv"), hist_csv);

  const PredictionSet val_preds = evaluate(model, parts[1]);
  const PredictionSet test_preds = evaluate(model, parts[2]);
  save_predictions_csv(val_preds, join(dir, "val_predictions.csv"));
  save_predictions_csv(test_preds, join(dir, "test_predictions.csv"));

  nlohmann::json report = metrics_json(test_preds, cfg.metrics.ece_bins);
  report["config_hash"] = hash;
  write_json(join(dir, "metrics.json"), report);

  std::printf("trained %s for %d epochs; test acc %s%%, ece %s%%\n",
              loss_kind_name(cfg.train.loss.kind).c_str(), cfg.train.epochs,
              percent(accuracy(test_preds)).c_str(),
              percent(ece(test_preds, cfg.metrics.ece_bins)).c_str());
  return 0;
}

int cmd_eval(const EvalArgs& args) {
  const PredictionSet preds = load_predictions_csv(args.predictions_path);
  const nlohmann::json report = metrics_json(preds, args.ece_bins);

  std::printf("samples   %zu\n", preds.size());
  std::printf("accuracy  %s%%\n", report.at("accuracy_percent").get<std::string>().c_str());
  std::printf("ece       %s%%\n", report.at("ece_percent").get<std::string>().c_str());
  if (report.at("aece_percent").is_null()) {
    std::printf("aece      n/a (fewer samples than bins)\n");
  } else {
    std::printf("aece      %s%%\n", report.at("aece_percent").get<std::string>().c_str());
  }
  std::printf("nll       %.6f\n", report.at("nll").get<double>());

  if (!args.report_out.empty()) write_json(args.report_out, report);
  if (!args.reliability_out.empty()) {
    write_file(args.reliability_out,
               reliability_csv(reliability_table(preds, args.reliability_bins)));
  }
  return 0;
}

int cmd_calibrate(const CalibrateArgs& args) {
  const PredictionSet val = load_predictions_csv(args.val_path);
  const PredictionSet test = load_predictions_csv(args.test_path);

  const TemperatureFit fit =
      fit_temperature(val, args.t_min, args.t_max, args.resolution);
  const PredictionSet test_scaled = apply_temperature(test, fit.t_star);

  const nlohmann::json report{
      {"t_star", fit.t_star},
      {"grid", {{"min", fit.grid_min}, {"max", fit.grid_max}, {"resolution", fit.grid_resolution}}},
      {"val",
       {{"nll_pre", fit.nll_pre},
        {"nll_post", fit.nll_post},
        {"ece_pre", fit.ece_pre},
        {"ece_post", fit.ece_post},
        {"ece_pre_percent", percent(fit.ece_pre)},
        {"ece_post_percent", percent(fit.ece_post)}}},
      {"test",
       {{"ece_pre", ece(test)},
        {"ece_post", ece(test_scaled)},
        {"ece_pre_percent", percent(ece(test))},
        {"ece_post_percent", percent(ece(test_scaled))},
        {"nll_pre", nll(test)},
        {"nll_post", nll(test_scaled)},
        {"accuracy", accuracy(test_scaled)}}},
  };

  std::printf("t_star    %.6f (grid %.3f..%.3f step %.3f)\n", fit.t_star,
              fit.grid_min, fit.grid_max, fit.grid_resolution);
  std::printf("val nll   %.6f -> %.6f\n", fit.nll_pre, fit.nll_post);
  std::printf("val ece   %s%% -> %s%%\n", percent(fit.ece_pre).c_str(),
              percent(fit.ece_post).c_str());
  std::printf("test ece  %s%% -> %s%%\n", percent(ece(test)).c_str(),
              percent(ece(test_scaled)).c_str());
  std::printf("test acc  %s%% (argmax unchanged)\n",
              percent(accuracy(test_scaled)).c_str());

  if (!args.report_out.empty()) write_json(args.report_out, report);
  return 0;
}

int cmd_verify(const VerifyOptions& options) {
  const std::vector<PropertyResult> results = run_theory_suite(options);
  std::size_t passed = 0;
  for (const PropertyResult& r : results) {
    std::printf("%s  %-26s checked=%-7zu %s\n", r.passed() ? "PASS" : "FAIL",
                r.name.c_str(), r.checked, r.note.c_str());
    if (r.passed()) passed += 1;
  }
  std::printf("verification: %zu/%zu properties passed\n", passed, results.size());
  return passed == results.size() ? 0 : 4;
}

int cmd_sweep_margin(const RunConfig& cfg, const SweepArgs& args) {
  const std::string dir = output_dir_of(cfg);
  const auto parts = resolve_data(cfg);

  const auto run_with = [&](const LossSpec& loss) {
    TrainConfig tc = cfg.train;
    tc.loss = loss;
    const auto [model, history] = train(tc, parts[0], parts[1]);
    (void)history;
    const PredictionSet preds = evaluate(model, parts[2]);
    return std::pair<double, double>(accuracy(preds), ece(preds, cfg.metrics.ece_bins));
  };

  std::string margin_csv = "margin,accuracy,ece\n";
  for (const double m : args.margins) {
    LossSpec loss;
    loss.kind = LossKind::kMarginSmoothing;
    loss.margin = m;
    loss.lambda = cfg.train.loss.lambda;
    const auto [acc, e] = run_with(loss);
    append_double(margin_csv, m);
    margin_csv += ',';
    append_double(margin_csv, acc);
    margin_csv += ',';
    append_double(margin_csv, e);
    margin_csv += '\n';
    std::printf("margin %-4g acc %s%%  ece %s%%\n", m, percent(acc).c_str(),
                percent(e).c_str());
  }
  write_file(join(dir, "margin_sweep.csv"), margin_csv);

  std::string weight_csv = "weight,method,accuracy,ece\n";
  {
    LossSpec ce;
    ce.kind = LossKind::kCrossEntropy;
    const auto [acc, e] = run_with(ce);
    weight_csv += "0,cross_entropy,";
    append_double(weight_csv, acc);
    weight_csv += ',';
    append_double(weight_csv, e);
    weight_csv += '\n';
    std::printf("baseline cross_entropy acc %s%%  ece %s%%\n", percent(acc).c_str(),
                percent(e).c_str());
  }
  for (const double w : args.weights) {
    LossSpec ls;
    ls.kind = LossKind::kLabelSmoothing;
    ls.alpha = w;
    const auto [ls_acc, ls_ece] = run_with(ls);
    append_double(weight_csv, w);
    weight_csv += ",label_smoothing,";
    append_double(weight_csv, ls_acc);
    weight_csv += ',';
    append_double(weight_csv, ls_ece);
    weight_csv += '\n';

    LossSpec zero_margin;
    zero_margin.kind = LossKind::kMarginSmoothing;
    zero_margin.margin = 0.0;
    zero_margin.lambda = w;
    const auto [zm_acc, zm_ece] = run_with(zero_margin);
    append_double(weight_csv, w);
    weight_csv += ",margin_smoothing_m0,";
    append_double(weight_csv, zm_acc);
    weight_csv += ',';
    append_double(weight_csv, zm_ece);
    weight_csv += '\n';

    std::printf("weight %-5g label_smoothing ece %s%%  zero-margin ece %s%%\n", w,
                percent(ls_ece).c_str(), percent(zm_ece).c_str());
  }
  write_file(join(dir, "weight_sweep.csv"), weight_csv);
  return 0;
}

}  // namespace calib
