#include "calib/verify.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <limits>

#include "calib/losses.hpp"
#include "calib/mlp.hpp"
#include "calib/numerics.hpp"
#include "calib/rng.hpp"

namespace calib {

namespace {

constexpr double kSlackTol = 1e-9;
constexpr double kGradTol = 1e-5;
constexpr double kFdStep = 1e-5;
constexpr double kKinkMargin = 1e-3;
// Logit entries are zero-mean Gaussian with variance 3.
const double kLogitSigma = std::sqrt(3.0);

std::vector<double> random_logits(Xoshiro256pp& rng, std::size_t k) {
  std::vector<double> l(k);
  for (double& x : l) x = kLogitSigma * rng.normal();
  return l;
}

std::string format_note(const char* fmt, double value) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), fmt, value);
  return buf;
}

// |a - b| measured against max(1, |a|, |b|): absolute near zero, relative
// for large entries.
double guarded_rel_err(double a, double b) {
  return std::abs(a - b) / std::max({1.0, std::abs(a), std::abs(b)});
}

PropertyResult check_sandwich(Xoshiro256pp& rng, std::size_t samples) {
  PropertyResult res;
  res.name = "kl-distance-sandwich";
  double worst = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < samples; ++i) {
    const std::size_t k = 2 + rng.below(99);
    const LogitVector l(random_logits(rng, k));
    const BoundReport report = check_kl_distance_bounds(l, kSlackTol);
    if (!report.lower_ok || !report.upper_ok) res.failures += 1;
    worst = std::min({worst, report.slack_lower, report.slack_upper});
    res.checked += 1;
  }
  res.worst = worst;
  res.note = format_note("min slack %.3e", worst);
  return res;
}

PropertyResult check_decomposition(Xoshiro256pp& rng, std::size_t samples) {
  PropertyResult res;
  res.name = "smoothing-decomposition";
  constexpr std::array<double, 3> alphas = {0.05, 0.1, 0.3};
  double worst = 0.0;
  for (std::size_t i = 0; i < samples; ++i) {
    const std::size_t k = 2 + rng.below(49);
    const LogitVector l(random_logits(rng, k));
    const int y = static_cast<int>(rng.below(k));
    const double alpha = alphas[i % alphas.size()];

    const double ls = label_smoothing(l, y, alpha).value;
    const double ce = cross_entropy(l, y).value;
    const double decomposed = (1.0 - alpha) * ce +
                              alpha * kl_uniform_to(softmax(l)) +
                              alpha * std::log(static_cast<double>(k));
    const double dev = std::abs(ls - decomposed);
    if (dev > kSlackTol) res.failures += 1;
    worst = std::max(worst, dev);
    res.checked += 1;
  }
  res.worst = worst;
  res.note = format_note("max deviation %.3e", worst);
  return res;
}

PropertyResult check_focal_bound(Xoshiro256pp& rng, std::size_t samples) {
  PropertyResult res;
  res.name = "focal-entropy-bound";
  constexpr std::array<double, 4> gammas = {1.0, 2.0, 3.0, 5.0};
  double worst = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < samples; ++i) {
    const std::size_t k = 2 + rng.below(49);
    const LogitVector l(random_logits(rng, k));
    const int y = static_cast<int>(rng.below(k));
    const double gamma = gammas[i % gammas.size()];

    const double fl = focal(l, y, gamma).value;
    const double floor_value =
        cross_entropy(l, y).value - gamma * entropy(softmax(l));
    const double slack = fl - floor_value;
    if (slack < -kSlackTol) res.failures += 1;
    worst = std::min(worst, slack);
    res.checked += 1;
  }
  res.worst = worst;
  res.note = format_note("min slack %.3e", worst);
  return res;
}

// Per-point loss settings for the gradient suites, cycled by point index.
LossSpec spec_for_point(LossKind kind, std::size_t i) {
  constexpr std::array<double, 3> alphas = {0.05, 0.1, 0.3};
  constexpr std::array<double, 4> gammas = {1.0, 2.0, 3.0, 5.0};
  constexpr std::array<double, 3> weights = {0.05, 0.1, 0.3};
  constexpr std::array<double, 4> margins = {0.0, 2.0, 6.0, 10.0};
  LossSpec spec;
  spec.kind = kind;
  spec.alpha = alphas[i % alphas.size()];
  spec.gamma = gammas[i % gammas.size()];
  spec.ecp_weight = weights[i % weights.size()];
  spec.margin = margins[i % margins.size()];
  spec.lambda = 0.1;
  return spec;
}

// True when the point sits too close to a non-differentiable spot for a
// finite-difference probe: a near-tie for the winning logit, a hinge whose
// distance is within kKinkMargin of the margin, or a scheduled-focal
// ground-truth probability near the gamma switch.
bool near_kink(const LogitVector& l, int label, const LossSpec& spec) {
  if (spec.kind == LossKind::kMarginSmoothing) {
    const DistanceVector d = logit_distances(l);
    double runner_up = std::numeric_limits<double>::infinity();
    for (double gap : d.values) {
      if (gap > 0.0) runner_up = std::min(runner_up, gap);
    }
    if (runner_up < kKinkMargin) return true;  // winner nearly tied
    for (double gap : d.values) {
      if (gap > 0.0 && std::abs(gap - spec.margin) < kKinkMargin) return true;
    }
  }
  if (spec.kind == LossKind::kScheduledFocal) {
    const ProbVector s = softmax(l);
    if (std::abs(s[static_cast<std::size_t>(label)] - spec.threshold) < kKinkMargin) {
      return true;
    }
  }
  return false;
}

const char* loss_name(LossKind kind) {
  switch (kind) {
    case LossKind::kCrossEntropy: return "cross_entropy";
    case LossKind::kLabelSmoothing: return "label_smoothing";
    case LossKind::kFocal: return "focal";
    case LossKind::kScheduledFocal: return "scheduled_focal";
    case LossKind::kEntropyPenalty: return "entropy_penalty";
    case LossKind::kMarginSmoothing: return "margin_smoothing";
  }
  return "unknown";
}

constexpr std::array<LossKind, 6> kAllLosses = {
    LossKind::kCrossEntropy,   LossKind::kLabelSmoothing,
    LossKind::kFocal,          LossKind::kScheduledFocal,
    LossKind::kEntropyPenalty, LossKind::kMarginSmoothing,
};

PropertyResult check_logit_gradients(Xoshiro256pp& rng, LossKind kind,
                                     std::size_t points, double fault) {
  PropertyResult res;
  res.name = std::string("gradient-") + loss_name(kind);
  double worst = 0.0;
  std::size_t attempts = 0;
  const std::size_t max_attempts = 1000 * points;
  while (res.checked < points && attempts < max_attempts) {
    ++attempts;
    const std::size_t k = 2 + rng.below(49);
    std::vector<double> raw = random_logits(rng, k);
    const int y = static_cast<int>(rng.below(k));
    const LossSpec spec = spec_for_point(kind, res.checked);
    const LogitVector l(raw);
    if (near_kink(l, y, spec)) continue;

    LossOutput out = evaluate_loss(spec, l, y);
    if (fault != 0.0 && kind == LossKind::kCrossEntropy) out.grad[0] += fault;

    double point_worst = 0.0;
    for (std::size_t j = 0; j < k; ++j) {
      const double saved = raw[j];
      raw[j] = saved + kFdStep;
      const double up = evaluate_loss(spec, LogitVector(raw), y).value;
      raw[j] = saved - kFdStep;
      const double down = evaluate_loss(spec, LogitVector(raw), y).value;
      raw[j] = saved;
      const double fd = (up - down) / (2.0 * kFdStep);
      point_worst = std::max(point_worst, guarded_rel_err(out.grad[j], fd));
    }
    if (point_worst > kGradTol) res.failures += 1;
    worst = std::max(worst, point_worst);
    res.checked += 1;
  }
  res.worst = worst;
  res.note = format_note("max rel err %.3e", worst);
  return res;
}

PropertyResult check_mlp_gradients(Xoshiro256pp& rng, std::size_t points_per_loss) {
  PropertyResult res;
  res.name = "mlp-parameter-gradients";
  const std::vector<int> dims = {5, 8, 4};
  MlpModel model = init_mlp(dims, derive_seed(2026, 77));
  double worst = 0.0;

  for (const LossKind kind : kAllLosses) {
    std::size_t accepted = 0;
    std::size_t attempts = 0;
    const std::size_t max_attempts = 1000 * points_per_loss;
    while (accepted < points_per_loss && attempts < max_attempts) {
      ++attempts;
      std::vector<double> x(5);
      for (double& v : x) v = rng.normal();
      const int y = static_cast<int>(rng.below(4));
      const LossSpec spec = spec_for_point(kind, accepted);

      // Reject inputs that land near a rectifier kink in the hidden layer
      // or near a loss-level kink at the logits.
      bool skip = false;
      for (std::size_t r = 0; r < 8 && !skip; ++r) {
        double z = model.biases[0][r];
        for (std::size_t c = 0; c < 5; ++c) z += model.weights[0][r * 5 + c] * x[c];
        if (std::abs(z) < kKinkMargin) skip = true;
      }
      if (skip) continue;
      const LogitVector logits = forward(model, x);
      if (near_kink(logits, y, spec)) continue;

      const auto [value, grads] = backward(model, x, y, spec);
      (void)value;

      double point_worst = 0.0;
      const auto probe = [&](std::vector<double>& param, std::size_t idx,
                             double analytic) {
        const double saved = param[idx];
        param[idx] = saved + kFdStep;
        const double up = evaluate_loss(spec, forward(model, x), y).value;
        param[idx] = saved - kFdStep;
        const double down = evaluate_loss(spec, forward(model, x), y).value;
        param[idx] = saved;
        const double fd = (up - down) / (2.0 * kFdStep);
        point_worst = std::max(point_worst, guarded_rel_err(analytic, fd));
      };
      for (std::size_t l = 0; l < model.num_layers(); ++l) {
        for (std::size_t i = 0; i < model.weights[l].size(); ++i) {
          probe(model.weights[l], i, grads.weights[l][i]);
        }
        for (std::size_t i = 0; i < model.biases[l].size(); ++i) {
          probe(model.biases[l], i, grads.biases[l][i]);
        }
      }
      if (point_worst > kGradTol) res.failures += 1;
      worst = std::max(worst, point_worst);
      res.checked += 1;
      accepted += 1;
    }
  }
  res.worst = worst;
  res.note = format_note("max rel err %.3e", worst);
  return res;
}

}  // namespace

std::vector<PropertyResult> run_theory_suite(const VerifyOptions& options) {
  std::vector<PropertyResult> results;
  {
    Xoshiro256pp rng(derive_seed(options.seed, 1));
    results.push_back(check_sandwich(rng, options.sandwich_samples));
  }
  {
    Xoshiro256pp rng(derive_seed(options.seed, 2));
    results.push_back(check_decomposition(rng, options.decomposition_samples));
  }
  {
    Xoshiro256pp rng(derive_seed(options.seed, 3));
    results.push_back(check_focal_bound(rng, options.focal_bound_samples));
  }
  for (std::size_t i = 0; i < kAllLosses.size(); ++i) {
    Xoshiro256pp rng(derive_seed(options.seed, 10 + i));
    results.push_back(check_logit_gradients(rng, kAllLosses[i],
                                            options.gradient_points,
                                            options.inject_gradient_fault));
  }
  {
    Xoshiro256pp rng(derive_seed(options.seed, 20));
    results.push_back(check_mlp_gradients(rng, options.mlp_points));
  }
  return results;
}

}  // namespace calib
