#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <vector>

#include "calib/losses.hpp"
#include "calib/metrics.hpp"
#include "calib/rng.hpp"
#include "oracle_utils.hpp"

using namespace calib;

namespace {

// Two-class logits whose softmax peak is exactly the requested confidence,
// with the peak on `winner`.
LogitVector conf_logits(double confidence, int winner = 0) {
  const double gap = std::log(confidence / (1.0 - confidence));
  if (winner == 0) return LogitVector({gap, 0.0});
  return LogitVector({0.0, gap});
}

// A record that is correct iff `correct`, with the given confidence.
void add_sample(PredictionSet& set, double confidence, bool correct) {
  set.add(conf_logits(confidence), correct ? 0 : 1);
}

PredictionSet random_set(Xoshiro256pp& rng, std::size_t n, std::size_t k) {
  PredictionSet set;
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<double> v(k);
    for (double& x : v) x = rng.normal(0.0, 2.0);
    set.add(LogitVector(std::move(v)), static_cast<int>(rng.below(k)));
  }
  return set;
}

}  // namespace

TEST_CASE("prediction record basics") {
  SUBCASE("argmax ties resolve to the lowest index") {
    const PredictionRecord r{LogitVector({1.0, 1.0, 0.0}), 0};
    CHECK(r.predicted() == 0);
    const PredictionRecord r2{LogitVector({0.0, 2.0, 2.0}), 0};
    CHECK(r2.predicted() == 1);
  }
  SUBCASE("confidence lives in [1/K, 1]") {
    Xoshiro256pp rng(83);
    for (int rep = 0; rep < 500; ++rep) {
      const std::size_t k = 2 + rng.below(19);
      std::vector<double> v(k);
      for (double& x : v) x = rng.normal(0.0, 3.0);
      const PredictionRecord r{LogitVector(std::move(v)), 0};
      CHECK(r.confidence() >= 1.0 / static_cast<double>(k) - 1e-15);
      CHECK(r.confidence() <= 1.0);
    }
    const PredictionRecord uniform{LogitVector({0.0, 0.0, 0.0, 0.0}), 0};
    CHECK(uniform.confidence() == doctest::Approx(0.25).epsilon(1e-15));
  }
  SUBCASE("set rejects inconsistent records") {
    PredictionSet set;
    CHECK(set.k() == 0);
    set.add(LogitVector({0.0, 1.0, 2.0}), 2);
    CHECK(set.k() == 3);
    CHECK_THROWS_AS(set.add(LogitVector({0.0, 1.0}), 0), UsageError);
    CHECK_THROWS_AS(set.add(LogitVector({0.0, 1.0, 2.0}), 3), UsageError);
    CHECK_THROWS_AS(set.add(LogitVector({0.0, 1.0, 2.0}), -1), UsageError);
    CHECK(set.size() == 1);
  }
}

TEST_CASE("equal-width binning") {
  SUBCASE("fully confident samples land in the last bin") {
    PredictionSet set;
    for (int i = 0; i < 7; ++i) set.add(LogitVector({1000.0, 0.0}), 0);
    const auto bins = bin_equal_width(set, 15);
    REQUIRE(bins.size() == 15);
    for (int i = 0; i < 14; ++i) CHECK(bins[static_cast<std::size_t>(i)].count == 0);
    CHECK(bins[14].count == 7);
    CHECK(bins[14].accuracy == 1.0);
    CHECK(bins[14].mean_confidence == 1.0);
  }
  SUBCASE("boundary semantics: bin 0 closed below, others half-open") {
    // K=2 confidences cannot go below 0.5, so use 20-class records to reach
    // the low-confidence bins.
    PredictionSet wide;
    std::vector<double> v(20, 0.0);
    wide.add(LogitVector(v), 0);  // confidence exactly 0.05 -> bin 0 of M=10
    std::vector<double> v2(20, 0.0);
    v2[3] = 1.2;  // peaked enough to reach ~0.15
    wide.add(LogitVector(v2), 3);
    const double c2 = wide[1].confidence();
    REQUIRE(c2 > 0.1);
    REQUIRE(c2 <= 0.2);
    const auto bins = bin_equal_width(wide, 10);
    REQUIRE(bins.size() == 10);
    CHECK(bins[0].count == 1);
    CHECK(bins[1].count == 1);
    for (std::size_t i = 2; i < 10; ++i) CHECK(bins[i].count == 0);
    CHECK(bins[0].lo == 0.0);
    CHECK(bins[0].hi == doctest::Approx(0.1).epsilon(1e-15));
  }
  SUBCASE("a value exactly on a boundary joins the lower bin") {
    PredictionSet set;
    add_sample(set, 0.6, true);  // exactly 0.6 with M=10 -> bin 5 covers (0.5,0.6]
    REQUIRE(set[0].confidence() == doctest::Approx(0.6).epsilon(1e-15));
    const auto bins = bin_equal_width(set, 10);
    // The computed confidence may land a hair above or below the boundary
    // double; accept whichever bin actually contains it.
    const double c = set[0].confidence();
    std::size_t populated = 99;
    for (std::size_t i = 0; i < bins.size(); ++i) {
      if (bins[i].count == 1) populated = i;
    }
    REQUIRE(populated != 99);
    if (c <= bins[5].hi) CHECK(populated == 5);
    else CHECK(populated == 6);
  }
  SUBCASE("single bin swallows everything") {
    Xoshiro256pp rng(89);
    const PredictionSet set = random_set(rng, 50, 4);
    const auto bins = bin_equal_width(set, 1);
    REQUIRE(bins.size() == 1);
    CHECK(bins[0].count == 50);
    CHECK(bins[0].lo == 0.0);
    CHECK(bins[0].hi == 1.0);
  }
  SUBCASE("counts always sum to N") {
    Xoshiro256pp rng(97);
    for (int rep = 0; rep < 50; ++rep) {
      const std::size_t n = 1 + rng.below(300);
      const PredictionSet set = random_set(rng, n, 2 + rng.below(10));
      for (int m : {1, 2, 10, 15, 25}) {
        const auto bins = bin_equal_width(set, m);
        std::size_t total = 0;
        for (const auto& b : bins) total += b.count;
        CHECK(total == n);
      }
    }
  }
  SUBCASE("contract errors") {
    PredictionSet empty;
    CHECK_THROWS_AS(bin_equal_width(empty, 10), UsageError);
    PredictionSet set;
    add_sample(set, 0.7, true);
    CHECK_THROWS_AS(bin_equal_width(set, 0), UsageError);
    CHECK_THROWS_AS(bin_equal_width(set, -3), UsageError);
  }
}

TEST_CASE("adaptive binning") {
  SUBCASE("N equal to M gives singleton bins") {
    Xoshiro256pp rng(101);
    const PredictionSet set = random_set(rng, 8, 3);
    const auto bins = bin_adaptive(set, 8);
    REQUIRE(bins.size() == 8);
    for (const auto& b : bins) {
      CHECK(b.count == 1);
      CHECK(b.lo == b.hi);
      CHECK(b.mean_confidence == b.lo);
    }
    // Groups are ordered by confidence.
    for (std::size_t i = 1; i < bins.size(); ++i) CHECK(bins[i - 1].hi <= bins[i].lo);
  }
  SUBCASE("ten samples in four bins split 3-3-2-2") {
    Xoshiro256pp rng(103);
    const PredictionSet set = random_set(rng, 10, 5);
    const auto bins = bin_adaptive(set, 4);
    REQUIRE(bins.size() == 4);
    CHECK(bins[0].count == 3);
    CHECK(bins[1].count == 3);
    CHECK(bins[2].count == 2);
    CHECK(bins[3].count == 2);
  }
  SUBCASE("tied confidences keep original order") {
    PredictionSet set;
    // All identical confidence; correctness pattern distinguishes order.
    add_sample(set, 0.8, true);
    add_sample(set, 0.8, true);
    add_sample(set, 0.8, false);
    add_sample(set, 0.8, false);
    const auto bins = bin_adaptive(set, 2);
    REQUIRE(bins.size() == 2);
    CHECK(bins[0].count == 2);
    CHECK(bins[1].count == 2);
    // Stable sort keeps the two correct records in the first group.
    CHECK(bins[0].accuracy == 1.0);
    CHECK(bins[1].accuracy == 0.0);
  }
  SUBCASE("fewer samples than bins is a usage error") {
    Xoshiro256pp rng(107);
    const PredictionSet set = random_set(rng, 3, 2);
    CHECK_THROWS_AS(bin_adaptive(set, 4), UsageError);
    PredictionSet empty;
    CHECK_THROWS_AS(bin_adaptive(empty, 1), UsageError);
  }
  SUBCASE("counts sum to N and groups tile the sorted order") {
    Xoshiro256pp rng(109);
    for (int rep = 0; rep < 50; ++rep) {
      const std::size_t n = 20 + rng.below(200);
      const PredictionSet set = random_set(rng, n, 2 + rng.below(8));
      const auto bins = bin_adaptive(set, 15);
      std::size_t total = 0;
      for (const auto& b : bins) total += b.count;
      CHECK(total == n);
      for (std::size_t i = 1; i < bins.size(); ++i) {
        CHECK(bins[i - 1].hi <= bins[i].lo);
      }
    }
  }
}

TEST_CASE("expected calibration error") {
  SUBCASE("perfectly confident and correct scores zero") {
    PredictionSet set;
    for (int i = 0; i < 5; ++i) set.add(LogitVector({900.0, 0.0}), 0);
    CHECK(ece(set) == 0.0);
  }
  SUBCASE("four-sample worked example") {
    // Confidence 0.9 for all four records, three of them correct: one
    // populated bin with accuracy 0.75 and mean confidence 0.9.
    PredictionSet set;
    add_sample(set, 0.9, true);
    add_sample(set, 0.9, true);
    add_sample(set, 0.9, true);
    add_sample(set, 0.9, false);
    CHECK(std::abs(ece(set, 15) - 0.15) <= 1e-12);
  }
  SUBCASE("balanced miscalibration cancels only within bins") {
    // Two bins, each internally calibrated: ECE 0.
    PredictionSet set;
    add_sample(set, 0.75, true);
    add_sample(set, 0.75, true);
    add_sample(set, 0.75, true);
    add_sample(set, 0.75, false);
    const double gap = std::abs(ece(set, 15) - 0.0);
    CHECK(gap == doctest::Approx(0.0).epsilon(1e-12));
  }
  SUBCASE("stays within [0, 1]") {
    Xoshiro256pp rng(113);
    for (int rep = 0; rep < 100; ++rep) {
      const PredictionSet set = random_set(rng, 5 + rng.below(100), 2 + rng.below(5));
      const double e = ece(set, 15);
      CHECK(e >= 0.0);
      CHECK(e <= 1.0);
    }
  }
}

TEST_CASE("adaptive expected calibration error") {
  SUBCASE("identical records reduce to a single gap") {
    PredictionSet set;
    for (int i = 0; i < 6; ++i) add_sample(set, 0.8, true);
    // Every group has accuracy 1 and confidence 0.8 regardless of M.
    for (int m : {1, 2, 3, 6}) {
      CHECK(std::abs(aece(set, m) - 0.2) <= 1e-12);
    }
  }
  SUBCASE("four-sample worked example with one effective level") {
    PredictionSet set;
    add_sample(set, 0.9, true);
    add_sample(set, 0.9, true);
    add_sample(set, 0.9, true);
    add_sample(set, 0.9, false);
    // All records share one confidence level, so a single adaptive bin
    // reproduces the equal-width answer.
    CHECK(std::abs(aece(set, 1) - 0.15) <= 1e-12);
  }
  SUBCASE("singleton bins give the mean per-sample gap") {
    PredictionSet set;
    add_sample(set, 0.9, true);
    add_sample(set, 0.7, false);
    add_sample(set, 0.6, true);
    const double expect = (std::abs(1.0 - 0.9) + std::abs(0.0 - 0.7) +
                           std::abs(1.0 - 0.6)) /
                          3.0;
    CHECK(std::abs(aece(set, 3) - expect) <= 1e-12);
  }
}

TEST_CASE("library binning matches brute-force oracles exactly") {
  Xoshiro256pp rng(127);
  for (int rep = 0; rep < 300; ++rep) {
    const std::size_t n = 20 + rng.below(400);
    const std::size_t k = 2 + rng.below(19);
    const PredictionSet set = random_set(rng, n, k);
    const int m = 1 + static_cast<int>(rng.below(20));
    if (n >= static_cast<std::size_t>(m)) {
      CHECK(aece(set, m) == testutil::brute_force_aece(set, m));
    }
    CHECK(ece(set, m) == testutil::brute_force_ece(set, m));
  }
}

TEST_CASE("accuracy") {
  PredictionSet set;
  add_sample(set, 0.9, true);
  add_sample(set, 0.8, true);
  add_sample(set, 0.7, true);
  add_sample(set, 0.9, false);
  CHECK(accuracy(set) == 0.75);

  PredictionSet right;
  add_sample(right, 0.6, true);
  CHECK(accuracy(right) == 1.0);

  PredictionSet wrong;
  add_sample(wrong, 0.6, false);
  add_sample(wrong, 0.9, false);
  CHECK(accuracy(wrong) == 0.0);

  PredictionSet empty;
  CHECK_THROWS_AS(accuracy(empty), UsageError);
}

TEST_CASE("negative log-likelihood") {
  SUBCASE("uniform logits cost log K") {
    PredictionSet set;
    set.add(LogitVector({0.0, 0.0, 0.0, 0.0, 0.0}), 3);
    set.add(LogitVector({2.0, 2.0, 2.0, 2.0, 2.0}), 0);
    CHECK(nll(set) == doctest::Approx(std::log(5.0)).epsilon(1e-14));
  }
  SUBCASE("single record equals its cross entropy") {
    PredictionSet set;
    set.add(LogitVector({10.0, 0.0}), 0);
    CHECK(nll(set) ==
          doctest::Approx(4.539889921686464676949e-5).epsilon(1e-12));
    CHECK(nll(set) == doctest::Approx(cross_entropy(LogitVector({10.0, 0.0}), 0).value)
                          .epsilon(1e-15));
  }
  SUBCASE("two records average") {
    PredictionSet set;
    set.add(LogitVector({1.0, 0.0}), 0);
    set.add(LogitVector({0.0, 3.0}), 0);
    const double a = cross_entropy(LogitVector({1.0, 0.0}), 0).value;
    const double b = cross_entropy(LogitVector({0.0, 3.0}), 0).value;
    CHECK(nll(set) == doctest::Approx((a + b) / 2.0).epsilon(1e-15));
  }
  SUBCASE("empty set rejected") {
    PredictionSet empty;
    CHECK_THROWS_AS(nll(empty), UsageError);
  }
}

TEST_CASE("reliability table") {
  SUBCASE("default table has 25 rows including empty bins") {
    Xoshiro256pp rng(131);
    const PredictionSet set = random_set(rng, 40, 6);
    const auto table = reliability_table(set);
    CHECK(table.size() == 25);
    std::size_t total = 0;
    for (const auto& b : table) total += b.count;
    CHECK(total == 40);
  }
  SUBCASE("all-confident all-correct populates one perfect row") {
    PredictionSet set;
    for (int i = 0; i < 4; ++i) set.add(LogitVector({800.0, 0.0}), 0);
    const auto table = reliability_table(set);
    REQUIRE(table.size() == 25);
    CHECK(table[24].count == 4);
    CHECK(table[24].accuracy == 1.0);
    CHECK(table[24].mean_confidence == 1.0);
    for (std::size_t i = 0; i < 24; ++i) {
      CHECK(table[i].count == 0);
      CHECK(table[i].accuracy == 0.0);
      CHECK(table[i].mean_confidence == 0.0);
    }
  }
  SUBCASE("agrees with equal-width binning at the same resolution") {
    Xoshiro256pp rng(137);
    const PredictionSet set = random_set(rng, 200, 4);
    const auto a = reliability_table(set, 12);
    const auto b = bin_equal_width(set, 12);
    REQUIRE(a.size() == b.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
      CHECK(a[i].count == b[i].count);
      CHECK(a[i].accuracy == b[i].accuracy);
      CHECK(a[i].mean_confidence == b[i].mean_confidence);
      CHECK(a[i].lo == b[i].lo);
      CHECK(a[i].hi == b[i].hi);
    }
  }
  SUBCASE("populated bins of calibrated data sit near the diagonal") {
    // Construct a set that is exactly calibrated within each bin.
    PredictionSet set;
    for (int i = 0; i < 8; ++i) add_sample(set, 0.75, i < 6);   // acc .75
    for (int i = 0; i < 10; ++i) add_sample(set, 0.9, i < 9);   // acc .9
    const auto table = reliability_table(set, 10);
    for (const auto& b : table) {
      if (b.count == 0) continue;
      CHECK(std::abs(b.accuracy - b.mean_confidence) <= 1e-9);
    }
    CHECK(std::abs(ece(set, 10)) <= 1e-12);
  }
}
