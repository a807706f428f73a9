#include "calib/numerics.hpp"

#include <algorithm>
#include <cmath>

namespace calib {

namespace {

bool all_finite(std::span<const double> v) {
  return std::all_of(v.begin(), v.end(),
                     [](double x) { return std::isfinite(x); });
}

}  // namespace

LogitVector::LogitVector(std::vector<double> values) : values_(std::move(values)) {
  if (values_.size() < 2) {
    throw DomainError("logit vector needs at least 2 classes, got " +
                      std::to_string(values_.size()));
  }
  if (!all_finite(values_)) {
    throw DomainError("logit vector contains non-finite entries");
  }
}

ProbVector::ProbVector(std::vector<double> values) : values_(std::move(values)) {
  if (values_.size() < 2) {
    throw DomainError("probability vector needs at least 2 classes");
  }
  double sum = 0.0;
  for (double p : values_) {
    if (!(p >= 0.0 && p <= 1.0)) {
      throw DomainError("probability entry outside [0, 1]");
    }
    sum += p;
  }
  if (std::abs(sum - 1.0) > 1e-9) {
    throw DomainError("probabilities sum to " + std::to_string(sum) +
                     ", not 1 within 1e-9");
  }
}

double logsumexp(const LogitVector& l) {
  const auto v = l.values();
  const double m = *std::max_element(v.begin(), v.end());
  double sum = 0.0;
  for (double x : v) sum += std::exp(x - m);
  return m + std::log(sum);
}

ProbVector softmax(const LogitVector& l) {
  const auto v = l.values();
  const double m = *std::max_element(v.begin(), v.end());
  std::vector<double> out(v.size());
  double sum = 0.0;
  for (std::size_t k = 0; k < v.size(); ++k) {
    out[k] = std::exp(v[k] - m);
    sum += out[k];
  }
  for (double& p : out) p /= sum;
  return ProbVector(std::move(out));
}

std::vector<double> log_softmax(const LogitVector& l) {
  const double lse = logsumexp(l);
  std::vector<double> out(l.size());
  for (std::size_t k = 0; k < l.size(); ++k) out[k] = l[k] - lse;
  return out;
}

double entropy(const ProbVector& s) {
  double h = 0.0;
  for (double p : s.values()) {
    if (p > 0.0) h -= p * std::log(p);
  }
  return h < 0.0 ? 0.0 : h;  // clamp fp noise at the one-hot corner
}

double kl_uniform_to(const ProbVector& s) {
  const auto v = s.values();
  double mean_log = 0.0;
  for (double p : v) {
    if (p == 0.0) {
      throw DomainError("KL(u||s) is infinite for a zero probability entry");
    }
    mean_log += std::log(p);
  }
  mean_log /= static_cast<double>(v.size());
  const double kl = -std::log(static_cast<double>(v.size())) - mean_log;
  return kl < 0.0 ? 0.0 : kl;  // clamp fp noise near the uniform point
}

double kl_to_uniform(const ProbVector& s) {
  const double kl = std::log(static_cast<double>(s.size())) - entropy(s);
  return kl < 0.0 ? 0.0 : kl;
}

DistanceVector logit_distances(const LogitVector& l) {
  const auto v = l.values();
  const double m = *std::max_element(v.begin(), v.end());
  DistanceVector d;
  d.values.resize(v.size());
  for (std::size_t k = 0; k < v.size(); ++k) d.values[k] = m - v[k];
  return d;
}

BoundReport check_kl_distance_bounds(const LogitVector& l, double tolerance) {
  if (tolerance < 0.0) throw UsageError("tolerance must be >= 0");
  const auto d = logit_distances(l);
  double mean_d = 0.0;
  for (double x : d.values) mean_d += x;
  mean_d /= static_cast<double>(d.values.size());

  BoundReport report;
  report.mean_distance = mean_d;
  report.kl_uniform = kl_uniform_to(softmax(l));
  report.slack_lower = report.mean_distance - report.kl_uniform;
  report.slack_upper =
      report.kl_uniform + std::log(static_cast<double>(l.size())) - report.mean_distance;
  report.lower_ok = report.slack_lower >= -tolerance;
  report.upper_ok = report.slack_upper >= -tolerance;
  return report;
}

}  // namespace calib
