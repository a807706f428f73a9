#include "calib/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

namespace calib {

int PredictionRecord::predicted() const {
  const auto v = logits.values();
  return static_cast<int>(std::max_element(v.begin(), v.end()) - v.begin());
}

double PredictionRecord::confidence() const {
  const ProbVector s = softmax(logits);
  const auto v = s.values();
  return *std::max_element(v.begin(), v.end());
}

void PredictionSet::add(LogitVector logits, int label) {
  if (k_ == 0) {
    k_ = logits.size();
  } else if (logits.size() != k_) {
    throw UsageError("prediction has " + std::to_string(logits.size()) +
                     " classes, set has " + std::to_string(k_));
  }
  if (label < 0 || static_cast<std::size_t>(label) >= k_) {
    throw UsageError("label " + std::to_string(label) + " out of range for K=" +
                     std::to_string(k_));
  }
  records_.push_back(PredictionRecord{std::move(logits), label});
}

namespace {

void require_nonempty(const PredictionSet& preds, const char* op) {
  if (preds.empty()) {
    throw UsageError(std::string(op) + ": empty prediction set");
  }
}

void require_bins(int m_bins) {
  if (m_bins < 1) {
    throw UsageError("bin count must be >= 1, got " + std::to_string(m_bins));
  }
}

// (count/N) * |accuracy - mean confidence| summed over non-empty bins, in
// bin order. The brute-force test oracle mirrors this exact expression, so
// agreement is bit-exact, not approximate.
double weighted_gap(const std::vector<BinStats>& bins, std::size_t n) {
  double total = 0.0;
  for (const BinStats& b : bins) {
    if (b.count == 0) continue;
    total += (static_cast<double>(b.count) / static_cast<double>(n)) *
             std::abs(b.accuracy - b.mean_confidence);
  }
  return total;
}

}  // namespace

std::vector<BinStats> bin_equal_width(const PredictionSet& preds, int m_bins) {
  require_nonempty(preds, "bin_equal_width");
  require_bins(m_bins);

  const std::size_t m = static_cast<std::size_t>(m_bins);
  // Upper boundaries: boundary[i] = (i+1)/M, with boundary[M-1] = 1.
  std::vector<double> boundary(m);
  for (std::size_t i = 0; i < m; ++i) {
    boundary[i] = static_cast<double>(i + 1) / static_cast<double>(m);
  }

  std::vector<BinStats> bins(m);
  std::vector<std::size_t> hits(m, 0);
  std::vector<double> conf_sum(m, 0.0);
  for (std::size_t i = 0; i < m; ++i) {
    bins[i].lo = static_cast<double>(i) / static_cast<double>(m);
    bins[i].hi = boundary[i];
  }

  for (const PredictionRecord& r : preds.records()) {
    const double c = r.confidence();
    // First bin whose upper boundary is >= c; confidence never exceeds 1.
    const std::size_t idx = static_cast<std::size_t>(
        std::lower_bound(boundary.begin(), boundary.end(), c) - boundary.begin());
    bins[idx].count += 1;
    conf_sum[idx] += c;
    if (r.predicted() == r.label) hits[idx] += 1;
  }

  for (std::size_t i = 0; i < m; ++i) {
    if (bins[i].count == 0) continue;
    bins[i].accuracy =
        static_cast<double>(hits[i]) / static_cast<double>(bins[i].count);
    bins[i].mean_confidence = conf_sum[i] / static_cast<double>(bins[i].count);
  }
  return bins;
}

std::vector<BinStats> bin_adaptive(const PredictionSet& preds, int m_bins) {
  require_nonempty(preds, "bin_adaptive");
  require_bins(m_bins);
  const std::size_t n = preds.size();
  const std::size_t m = static_cast<std::size_t>(m_bins);
  if (n < m) {
    throw UsageError("bin_adaptive: " + std::to_string(n) + " samples cannot fill " +
                     std::to_string(m) + " bins");
  }

  std::vector<double> conf(n);
  for (std::size_t i = 0; i < n; ++i) conf[i] = preds[i].confidence();

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return conf[a] < conf[b]; });

  const std::size_t base = n / m;
  const std::size_t remainder = n % m;

  std::vector<BinStats> bins(m);
  std::size_t pos = 0;
  for (std::size_t g = 0; g < m; ++g) {
    const std::size_t size = base + (g < remainder ? 1 : 0);
    BinStats& b = bins[g];
    b.count = size;
    b.lo = conf[order[pos]];
    b.hi = conf[order[pos + size - 1]];
    std::size_t hit = 0;
    double conf_sum = 0.0;
    for (std::size_t j = pos; j < pos + size; ++j) {
      const PredictionRecord& r = preds[order[j]];
      conf_sum += conf[order[j]];
      if (r.predicted() == r.label) hit += 1;
    }
    b.accuracy = static_cast<double>(hit) / static_cast<double>(size);
    b.mean_confidence = conf_sum / static_cast<double>(size);
    pos += size;
  }
  return bins;
}

double ece(const PredictionSet& preds, int m_bins) {
  return weighted_gap(bin_equal_width(preds, m_bins), preds.size());
}

double aece(const PredictionSet& preds, int m_bins) {
  return weighted_gap(bin_adaptive(preds, m_bins), preds.size());
}

double accuracy(const PredictionSet& preds) {
  require_nonempty(preds, "accuracy");
  std::size_t hits = 0;
  for (const PredictionRecord& r : preds.records()) {
    if (r.predicted() == r.label) hits += 1;
  }
  return static_cast<double>(hits) / static_cast<double>(preds.size());
}

double nll(const PredictionSet& preds) {
  require_nonempty(preds, "nll");
  double total = 0.0;
  for (const PredictionRecord& r : preds.records()) {
    total += logsumexp(r.logits) - r.logits[static_cast<std::size_t>(r.label)];
  }
  return total / static_cast<double>(preds.size());
}

std::vector<BinStats> reliability_table(const PredictionSet& preds, int m_bins) {
  return bin_equal_width(preds, m_bins);
}

}  // namespace calib
