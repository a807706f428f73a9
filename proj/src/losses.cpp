#include "calib/losses.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace calib {

namespace {

void check_label(const LogitVector& l, int label) {
  if (label < 0 || static_cast<std::size_t>(label) >= l.size()) {
    throw UsageError("label " + std::to_string(label) + " out of range for K=" +
                     std::to_string(l.size()));
  }
}

struct SoftmaxEval {
  double lse;
  std::vector<double> probs;
};

SoftmaxEval eval_softmax(const LogitVector& l) {
  const auto v = l.values();
  const double m = *std::max_element(v.begin(), v.end());
  SoftmaxEval e;
  e.probs.resize(v.size());
  double sum = 0.0;
  for (std::size_t k = 0; k < v.size(); ++k) {
    e.probs[k] = std::exp(v[k] - m);
    sum += e.probs[k];
  }
  for (double& p : e.probs) p /= sum;
  e.lse = m + std::log(sum);
  return e;
}

}  // namespace

void LossSpec::validate() const {
  switch (kind) {
    case LossKind::kCrossEntropy:
      break;
    case LossKind::kLabelSmoothing:
      if (!(alpha >= 0.0 && alpha < 1.0)) {
        throw ConfigError("label smoothing alpha must be in [0, 1)");
      }
      break;
    case LossKind::kFocal:
      if (!(gamma >= 0.0)) throw ConfigError("focal gamma must be >= 0");
      break;
    case LossKind::kScheduledFocal:
      if (!(gamma_low >= 0.0) || !(gamma_high >= 0.0)) {
        throw ConfigError("scheduled focal gammas must be >= 0");
      }
      if (!(threshold > 0.0 && threshold < 1.0)) {
        throw ConfigError("scheduled focal threshold must be in (0, 1)");
      }
      break;
    case LossKind::kEntropyPenalty:
      if (!(ecp_weight >= 0.0)) throw ConfigError("entropy penalty weight must be >= 0");
      break;
    case LossKind::kMarginSmoothing:
      if (!(margin >= 0.0)) throw ConfigError("margin must be >= 0");
      if (!(lambda >= 0.0)) throw ConfigError("margin penalty lambda must be >= 0");
      break;
  }
}

LossOutput cross_entropy(const LogitVector& l, int label) {
  check_label(l, label);
  const auto sm = eval_softmax(l);
  LossOutput out;
  out.value = sm.lse - l[static_cast<std::size_t>(label)];
  out.grad = sm.probs;
  out.grad[static_cast<std::size_t>(label)] -= 1.0;
  return out;
}

LossOutput label_smoothing(const LogitVector& l, int label, double alpha) {
  check_label(l, label);
  if (!(alpha >= 0.0 && alpha < 1.0)) {
    throw ConfigError("label smoothing alpha must be in [0, 1)");
  }
  const auto sm = eval_softmax(l);
  const std::size_t k_count = l.size();
  const double uniform_mass = alpha / static_cast<double>(k_count);

  LossOutput out;
  out.grad.resize(k_count);
  for (std::size_t k = 0; k < k_count; ++k) {
    const double target =
        uniform_mass + (k == static_cast<std::size_t>(label) ? 1.0 - alpha : 0.0);
    out.value += target * (sm.lse - l[k]);
    out.grad[k] = sm.probs[k] - target;
  }
  return out;
}

LossOutput focal(const LogitVector& l, int label, double gamma) {
  check_label(l, label);
  if (!(gamma >= 0.0)) throw ConfigError("focal gamma must be >= 0");
  const auto sm = eval_softmax(l);
  const std::size_t y = static_cast<std::size_t>(label);
  const double p = sm.probs[y];
  const double log_p = l[y] - sm.lse;

  // 1 - p accumulated from the other classes; near p = 1 the direct
  // subtraction would cancel catastrophically.
  double miss = 0.0;
  for (std::size_t k = 0; k < sm.probs.size(); ++k) {
    if (k != y) miss += sm.probs[k];
  }

  LossOutput out;
  out.grad.assign(l.size(), 0.0);
  if (gamma > 0.0 && miss == 0.0) {
    // Fully confident and correct: loss and gradient both vanish.
    out.value = 0.0;
    return out;
  }

  const double modulation = std::pow(miss, gamma);
  out.value = modulation * -log_p;

  // d/dp [-(1-p)^g log p] = g (1-p)^(g-1) log p - (1-p)^g / p, then chain
  // through ds_y/dl_k = s_y (delta_ky - s_k). The guarded form below keeps
  // gamma = 0 exactly equal to cross-entropy.
  double coeff = -modulation;
  if (gamma > 0.0) {
    coeff += gamma * std::pow(miss, gamma - 1.0) * p * log_p;
  }
  for (std::size_t k = 0; k < l.size(); ++k) {
    const double indicator = (k == y) ? 1.0 : 0.0;
    out.grad[k] = coeff * (indicator - sm.probs[k]);
  }
  return out;
}

LossOutput scheduled_focal(const LogitVector& l, int label, double gamma_low,
                           double gamma_high, double threshold) {
  check_label(l, label);
  if (!(threshold > 0.0 && threshold < 1.0)) {
    throw ConfigError("scheduled focal threshold must be in (0, 1)");
  }
  const auto sm = eval_softmax(l);
  const double p = sm.probs[static_cast<std::size_t>(label)];
  return focal(l, label, p < threshold ? gamma_high : gamma_low);
}

LossOutput entropy_penalty(const LogitVector& l, int label, double weight) {
  check_label(l, label);
  if (!(weight >= 0.0)) throw ConfigError("entropy penalty weight must be >= 0");
  const auto sm = eval_softmax(l);
  const std::size_t y = static_cast<std::size_t>(label);

  double h = 0.0;
  for (double p : sm.probs) {
    if (p > 0.0) h -= p * std::log(p);
  }

  LossOutput out;
  out.value = (sm.lse - l[y]) - weight * h;
  out.grad.resize(l.size());
  // dH/dl_k = -s_k (log s_k + H), so the penalty contributes
  // +weight * s_k (log s_k + H) on top of the cross-entropy gradient.
  for (std::size_t k = 0; k < l.size(); ++k) {
    const double log_p = l[k] - sm.lse;
    out.grad[k] = sm.probs[k] - (k == y ? 1.0 : 0.0) +
                  weight * sm.probs[k] * (log_p + h);
  }
  return out;
}

LossOutput margin_smoothing(const LogitVector& l, int label, double margin,
                            double lambda) {
  check_label(l, label);
  if (!(margin >= 0.0)) throw ConfigError("margin must be >= 0");
  if (!(lambda >= 0.0)) throw ConfigError("margin penalty lambda must be >= 0");

  LossOutput out = cross_entropy(l, label);

  const auto v = l.values();
  const std::size_t winner = static_cast<std::size_t>(
      std::max_element(v.begin(), v.end()) - v.begin());  // lowest argmax index
  const double top = v[winner];

  double hinge_sum = 0.0;
  for (std::size_t k = 0; k < v.size(); ++k) {
    const double gap = top - v[k];
    if (gap > margin) {
      hinge_sum += gap - margin;
      out.grad[k] -= lambda;
      out.grad[winner] += lambda;
    }
  }
  out.value += lambda * hinge_sum;
  return out;
}

LossOutput evaluate_loss(const LossSpec& spec, const LogitVector& l, int label) {
  spec.validate();
  switch (spec.kind) {
    case LossKind::kCrossEntropy:
      return cross_entropy(l, label);
    case LossKind::kLabelSmoothing:
      return label_smoothing(l, label, spec.alpha);
    case LossKind::kFocal:
      return focal(l, label, spec.gamma);
    case LossKind::kScheduledFocal:
      return scheduled_focal(l, label, spec.gamma_low, spec.gamma_high,
                             spec.threshold);
    case LossKind::kEntropyPenalty:
      return entropy_penalty(l, label, spec.ecp_weight);
    case LossKind::kMarginSmoothing:
      return margin_smoothing(l, label, spec.margin, spec.lambda);
  }
  throw ConfigError("unknown loss kind");
}

BatchLossOutput batch_loss(const LossSpec& spec,
                           std::span<const LogitVector> logits,
                           std::span<const int> labels) {
  if (logits.empty()) throw UsageError("batch_loss: empty batch");
  if (logits.size() != labels.size()) {
    throw UsageError("batch_loss: " + std::to_string(logits.size()) +
                     " logit vectors vs " + std::to_string(labels.size()) +
                     " labels");
  }
  const double inv_n = 1.0 / static_cast<double>(logits.size());
  BatchLossOutput out;
  out.sample_grads.reserve(logits.size());
  for (std::size_t i = 0; i < logits.size(); ++i) {
    LossOutput per = evaluate_loss(spec, logits[i], labels[i]);
    out.value += per.value;
    for (double& g : per.grad) g *= inv_n;
    out.sample_grads.push_back(std::move(per.grad));
  }
  out.value *= inv_n;
  return out;
}

}  // namespace calib
