#pragma once

#include <cstddef>
#include <vector>

#include "calib/numerics.hpp"

namespace calib {

/// One scored sample: the model's logits plus the true label. Confidence and
/// the predicted class are derived, not stored.
struct PredictionRecord {
  LogitVector logits;
  int label;

  /// Lowest-index argmax of the logits.
  int predicted() const;

  /// Max softmax probability; always in [1/K, 1].
  double confidence() const;
};

/// Ordered collection of predictions with a uniform class count. `add`
/// rejects records whose K or label disagree with the set.
class PredictionSet {
 public:
  void add(LogitVector logits, int label);

  bool empty() const noexcept { return records_.empty(); }
  std::size_t size() const noexcept { return records_.size(); }
  std::size_t k() const noexcept { return k_; }  // 0 while empty
  const PredictionRecord& operator[](std::size_t i) const { return records_[i]; }
  const std::vector<PredictionRecord>& records() const noexcept { return records_; }

 private:
  std::vector<PredictionRecord> records_;
  std::size_t k_ = 0;
};

/// Per-bin aggregate for calibration statistics. `accuracy` and
/// `mean_confidence` are meaningful only when count > 0 (they are stored as
/// 0 for empty bins, which contribute nothing anywhere).
struct BinStats {
  double lo = 0.0;
  double hi = 0.0;
  std::size_t count = 0;
  double accuracy = 0.0;
  double mean_confidence = 0.0;
};

/// Equal-width confidence binning. Bin i (0-based) covers (i/M, (i+1)/M],
/// except bin 0 which is closed below at 0. Returns all M bins, empty ones
/// included, so the result doubles as a reliability table.
std::vector<BinStats> bin_equal_width(const PredictionSet& preds, int m_bins);

/// Equal-count binning: samples are stable-sorted by confidence (original
/// order breaks ties) and split into M contiguous groups, the first N mod M
/// of size ceil(N/M) and the rest of size floor(N/M). lo/hi are each group's
/// min/max confidence. Requires N >= M.
std::vector<BinStats> bin_adaptive(const PredictionSet& preds, int m_bins);

/// Expected calibration error: sum over non-empty equal-width bins of
/// (count/N) * |accuracy - mean confidence|. A fraction in [0, 1]; the CLI
/// layer is responsible for percent formatting.
double ece(const PredictionSet& preds, int m_bins = 15);

/// Same weighted statistic over the adaptive (equal-count) bins.
double aece(const PredictionSet& preds, int m_bins = 15);

/// Fraction of records whose predicted class equals the label.
double accuracy(const PredictionSet& preds);

/// Mean negative log-likelihood of the true labels. Non-negative.
double nll(const PredictionSet& preds);

/// Equal-width bin table (default 25 bins) for accuracy-vs-confidence
/// plotting; empty bins appear with count 0.
std::vector<BinStats> reliability_table(const PredictionSet& preds, int m_bins = 25);

}  // namespace calib
