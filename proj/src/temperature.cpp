#include "calib/temperature.hpp"

#include <cmath>
#include <string>
#include <vector>

namespace calib {

LogitVector scale_logits(const LogitVector& l, double t) {
  if (!(t > 0.0)) {
    throw DomainError("temperature must be > 0, got " + std::to_string(t));
  }
  std::vector<double> scaled(l.size());
  for (std::size_t k = 0; k < l.size(); ++k) scaled[k] = l[k] / t;
  return LogitVector(std::move(scaled));
}

PredictionSet apply_temperature(const PredictionSet& preds, double t) {
  if (!(t > 0.0)) {
    throw DomainError("temperature must be > 0, got " + std::to_string(t));
  }
  PredictionSet out;
  for (const PredictionRecord& r : preds.records()) {
    out.add(scale_logits(r.logits, t), r.label);
  }
  return out;
}

TemperatureFit fit_temperature(const PredictionSet& val, double t_min,
                               double t_max, double resolution) {
  if (val.empty()) throw UsageError("fit_temperature: empty validation set");
  if (!(t_min > 0.0) || !(t_min <= 1.0) || !(t_max >= 1.0)) {
    throw UsageError("temperature grid must satisfy 0 < t_min <= 1 <= t_max");
  }
  if (!(resolution > 0.0)) {
    throw UsageError("grid resolution must be > 0");
  }

  // t_min + k*resolution for every step that fits below t_max (with a hair
  // of slop so 4.9/0.1 still counts as 49 steps), plus 1.0 itself so the
  // identity temperature is always a candidate.
  std::vector<double> grid;
  const auto steps =
      static_cast<std::size_t>(std::floor((t_max - t_min) / resolution + 1e-9));
  for (std::size_t k = 0; k <= steps; ++k) {
    grid.push_back(t_min + static_cast<double>(k) * resolution);
  }
  grid.push_back(1.0);

  double best_t = 1.0;
  double best_nll = nll(apply_temperature(val, 1.0));
  const double nll_at_one = best_nll;
  for (const double t : grid) {
    const double candidate = nll(apply_temperature(val, t));
    const bool better = candidate < best_nll;
    const bool tie = candidate == best_nll;
    const bool closer_to_one = std::abs(t - 1.0) < std::abs(best_t - 1.0);
    const bool as_close = std::abs(t - 1.0) == std::abs(best_t - 1.0);
    if (better || (tie && (closer_to_one || (as_close && t < best_t)))) {
      best_t = t;
      best_nll = candidate;
    }
  }

  TemperatureFit fit;
  fit.t_star = best_t;
  fit.nll_pre = nll_at_one;
  fit.nll_post = best_nll;
  fit.ece_pre = ece(val);
  fit.ece_post = ece(apply_temperature(val, best_t));
  fit.grid_min = t_min;
  fit.grid_max = t_max;
  fit.grid_resolution = resolution;
  return fit;
}

}  // namespace calib
