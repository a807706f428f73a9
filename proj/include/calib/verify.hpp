#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace calib {

/// Sample counts and seed for the randomized property suite. The defaults
/// are the full counts the project's acceptance gate uses; tests shrink them
/// for speed.
struct VerifyOptions {
  std::uint64_t seed = 2026;
  std::size_t sandwich_samples = 100000;
  std::size_t decomposition_samples = 10000;
  std::size_t focal_bound_samples = 10000;
  std::size_t gradient_points = 120;  // accepted points per loss kind
  std::size_t mlp_points = 20;        // accepted points per loss kind

  /// Test hook: added to one analytic gradient entry before comparison so a
  /// deliberately broken gradient is seen to fail. 0 disables.
  double inject_gradient_fault = 0.0;
};

/// Outcome of one randomized property check.
struct PropertyResult {
  std::string name;
  std::size_t checked = 0;
  std::size_t failures = 0;
  /// Most adverse margin observed: minimum slack for inequality properties,
  /// maximum deviation/relative error for identities and gradient checks.
  double worst = 0.0;
  std::string note;

  bool passed() const { return failures == 0; }
};

/// Runs every property: the KL/mean-distance sandwich, the label-smoothing
/// decomposition identity, the focal-vs-entropy lower bound, per-loss logit
/// gradient checks against central finite differences, and end-to-end MLP
/// parameter gradient checks. Deterministic per seed.
std::vector<PropertyResult> run_theory_suite(const VerifyOptions& options);

}  // namespace calib
