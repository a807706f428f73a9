#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "calib/metrics.hpp"

namespace calib {

/// In-memory feature/label table. `features` is N rows of `d` values each;
/// labels live in [0, k). Loaders and generators guarantee the invariants;
/// the struct itself is plain data.
struct Dataset {
  std::vector<std::vector<double>> features;
  std::vector<int> labels;
  int k = 0;
  int d = 0;

  std::size_t size() const noexcept { return features.size(); }
};

/// Recipe for a synthetic Gaussian-blob classification set: K class means on
/// a sphere of radius center_scale, isotropic noise of spread noise_sigma
/// around each mean, exactly n_per_class samples per class. The
/// noise_sigma / center_scale ratio controls class overlap and therefore how
/// hard the problem is.
struct BlobSpec {
  int k = 10;
  int d = 20;
  int n_per_class = 500;
  double center_scale = 1.0;
  double noise_sigma = 1.0;
  std::uint64_t seed = 1;

  void validate() const;
};

/// The K class means gen_blobs uses for this spec (unit directions scaled by
/// center_scale, drawn from the spec's seed). Exposed so tools can compute
/// exact class posteriors for a known generator.
std::vector<std::vector<double>> blob_class_means(const BlobSpec& spec);

/// Samples the blob mixture: deterministic per seed, class-balanced, ordered
/// class-major (all of class 0 first).
Dataset gen_blobs(const BlobSpec& spec);

/// Seeded permutation followed by contiguous slicing into train/val/test.
/// Fractions must be positive and sum to 1 within 1e-9; sizes are floor(N*f)
/// with the remainder going to train. Rejects any empty slice.
std::array<Dataset, 3> split_dataset(const Dataset& ds, double f_train,
                                     double f_val, double f_test,
                                     std::uint64_t seed);

/// CSV with header `f0,...,f{d-1},label`. LF line endings, '.' decimal
/// separator, 17 significant digits — doubles survive the round trip
/// bit-exactly. Save rejects empty datasets; load reports malformed input as
/// ParseError with a 1-based line number.
void save_dataset_csv(const Dataset& ds, const std::string& path);
Dataset load_dataset_csv(const std::string& path);

/// Same format for scored predictions, header `l0,...,l{K-1},label`; K is
/// inferred from the header on load.
void save_predictions_csv(const PredictionSet& preds, const std::string& path);
PredictionSet load_predictions_csv(const std::string& path);

}  // namespace calib
