#pragma once

#include "calib/metrics.hpp"

namespace calib {

/// Result of a grid-search temperature fit on a validation set. The grid
/// bounds and step are recorded so a fit report is auditable.
struct TemperatureFit {
  double t_star = 1.0;
  double nll_pre = 0.0;
  double nll_post = 0.0;
  double ece_pre = 0.0;
  double ece_post = 0.0;
  double grid_min = 0.0;
  double grid_max = 0.0;
  double grid_resolution = 0.0;
};

/// Divides every logit by T. Argmax (and therefore accuracy) is unchanged
/// for any T > 0; T = 1 returns the input bit-for-bit.
LogitVector scale_logits(const LogitVector& l, double t);

/// scale_logits applied to every record; labels are untouched.
PredictionSet apply_temperature(const PredictionSet& preds, double t);

/// Minimizes validation NLL over the grid {t_min + k*resolution} U {1.0}.
/// Ties go to the temperature closest to 1, then to the smaller one. Because
/// 1.0 is always evaluated, nll_post can never exceed nll_pre. ECE (15 bins)
/// is reported on the same set before and after scaling.
TemperatureFit fit_temperature(const PredictionSet& val, double t_min = 0.1,
                               double t_max = 5.0, double resolution = 0.1);

}  // namespace calib
