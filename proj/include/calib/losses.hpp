#pragma once

#include <span>
#include <vector>

#include "calib/numerics.hpp"

namespace calib {

enum class LossKind {
  kCrossEntropy,
  kLabelSmoothing,
  kFocal,
  kScheduledFocal,
  kEntropyPenalty,
  kMarginSmoothing,
};

/// Hyperparameters for all supported training objectives. Only the fields
/// relevant to `kind` are read; the defaults are the standard settings
/// (alpha 0.05, gamma 3, scheduled gammas 5/3 switching at 0.2, entropy
/// penalty weight 0.1, margin penalty weight 0.1).
struct LossSpec {
  LossKind kind = LossKind::kCrossEntropy;
  double alpha = 0.05;      // label smoothing mass moved to the uniform prior
  double gamma = 3.0;       // focal exponent
  double gamma_low = 3.0;   // scheduled focal, confident branch
  double gamma_high = 5.0;  // scheduled focal, low-confidence branch
  double threshold = 0.2;   // scheduled focal switch point on s_y
  double ecp_weight = 0.1;  // entropy penalty weight
  double margin = 6.0;      // margin allowed on logit distances
  double lambda = 0.1;      // margin penalty weight

  /// Throws ConfigError when the fields used by `kind` are out of range.
  void validate() const;
};

/// Scalar loss value plus its gradient with respect to the logits.
struct LossOutput {
  double value = 0.0;
  std::vector<double> grad;
};

/// Standard cross-entropy: -log softmax(l)[y]; grad = softmax(l) - onehot(y).
LossOutput cross_entropy(const LogitVector& l, int label);

/// Cross-entropy against smoothed targets (1-alpha)*onehot + alpha/K.
LossOutput label_smoothing(const LogitVector& l, int label, double alpha);

/// Focal loss -(1 - s_y)^gamma log s_y with the analytic logit gradient.
LossOutput focal(const LogitVector& l, int label, double gamma);

/// Focal loss with a sample-dependent exponent: gamma_high when the
/// ground-truth probability falls below `threshold`, gamma_low otherwise.
/// The branch is treated as constant in the backward pass.
LossOutput scheduled_focal(const LogitVector& l, int label, double gamma_low,
                           double gamma_high, double threshold);

/// Cross-entropy minus `weight` times the prediction entropy.
LossOutput entropy_penalty(const LogitVector& l, int label, double weight);

/// Cross-entropy plus lambda * sum_k max(0, max_j l_j - l_k - margin): a
/// hinge on logit distances that only pushes back on classes whose gap to
/// the winner exceeds the margin. The winner is the lowest argmax index and
/// the hinge is inactive at exactly d_k = margin.
LossOutput margin_smoothing(const LogitVector& l, int label, double margin,
                            double lambda);

/// Dispatch on spec.kind. Validates the spec.
LossOutput evaluate_loss(const LossSpec& spec, const LogitVector& l, int label);

/// Mean loss over a batch; gradients are returned per sample, already scaled
/// by 1/N so they are the gradient of the mean. Reduction is in sample order.
struct BatchLossOutput {
  double value = 0.0;
  std::vector<std::vector<double>> sample_grads;
};

BatchLossOutput batch_loss(const LossSpec& spec,
                           std::span<const LogitVector> logits,
                           std::span<const int> labels);

}  // namespace calib
