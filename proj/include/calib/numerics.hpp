#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "calib/errors.hpp"

namespace calib {

/// Raw pre-softmax activations for one sample. At least two classes, all
/// entries finite; construction enforces both.
class LogitVector {
 public:
  explicit LogitVector(std::vector<double> values);

  std::size_t size() const noexcept { return values_.size(); }
  double operator[](std::size_t k) const noexcept { return values_[k]; }
  std::span<const double> values() const noexcept { return values_; }

 private:
  std::vector<double> values_;
};

/// Point on the probability simplex: entries in [0, 1] summing to 1 within
/// 1e-9. Softmax of finite logits always satisfies this.
class ProbVector {
 public:
  explicit ProbVector(std::vector<double> values);

  std::size_t size() const noexcept { return values_.size(); }
  double operator[](std::size_t k) const noexcept { return values_[k]; }
  std::span<const double> values() const noexcept { return values_; }

 private:
  std::vector<double> values_;
};

/// Per-class gaps to the winning logit: d_k = max_j l_j - l_k. Every entry is
/// non-negative and the winner's own entry is exactly zero.
struct DistanceVector {
  std::vector<double> values;
};

/// Result of checking that the mean logit distance is sandwiched between
/// KL(u||s) and KL(u||s) + log K.
struct BoundReport {
  double mean_distance = 0.0;
  double kl_uniform = 0.0;
  bool lower_ok = false;
  bool upper_ok = false;
  double slack_lower = 0.0;  // mean_distance - kl_uniform
  double slack_upper = 0.0;  // kl_uniform + log K - mean_distance
};

/// log(sum_k exp(l_k)) via the max-shift trick; never overflows for finite
/// input and satisfies max(l) <= result <= max(l) + log K.
double logsumexp(const LogitVector& l);

ProbVector softmax(const LogitVector& l);

/// l_k - logsumexp(l); exponentiates to softmax(l), all entries <= 0.
std::vector<double> log_softmax(const LogitVector& l);

/// Shannon entropy -sum s_k log s_k with 0 log 0 := 0. In [0, log K].
double entropy(const ProbVector& s);

/// KL(uniform || s) = -log K - (1/K) sum_k log s_k. Requires strictly
/// positive entries; an exact zero would make the divergence infinite and
/// signals caller misuse, so it raises DomainError.
double kl_uniform_to(const ProbVector& s);

/// KL(s || uniform) = log K - H(s). Zero entries are fine (0 log 0 := 0).
double kl_to_uniform(const ProbVector& s);

/// The vector of gaps between the winning logit and every class.
DistanceVector logit_distances(const LogitVector& l);

/// Verifies, for one logit vector, the sandwich
///   KL(u||softmax(l)) <= mean_k d_k(l) <= KL(u||softmax(l)) + log K,
/// reporting both slacks. Flags are true when the slack is >= -tolerance.
BoundReport check_kl_distance_bounds(const LogitVector& l, double tolerance);

}  // namespace calib
