#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <set>

#include "zoomrds/catalog.hpp"
#include "zoomrds/zooming.hpp"

using namespace zoomrds;

namespace {

ZoomingConfig exponential_cfg(double rate, double margin, double delta = 0.1) {
  ZoomingConfig cfg;
  cfg.contraction = ZoomingContraction::exponential(rate);
  cfg.pliss_margin = margin;
  cfg.delta = delta;
  return cfg;
}

// Times j in 1..n with sum_{i=m}^{j-1} (l_i - margin) >= 0 for every m < j.
std::set<int> brute_force_pliss(const OrbitRecord& rec, double margin) {
  std::set<int> out;
  const int n = static_cast<int>(rec.length());
  for (int j = 1; j <= n; ++j) {
    bool ok = true;
    for (int m = 0; m < j && ok; ++m) {
      double s = 0.0;
      for (int i = m; i < j; ++i) {
        if (!rec.log_derivs[i]) {
          ok = false;
          break;
        }
        s += *rec.log_derivs[i] - margin;
      }
      if (s < 0.0) ok = false;
    }
    if (ok) out.insert(j);
  }
  return out;
}

}  // namespace

TEST(DetectTimes, DoublingDetectsEveryTime) {
  const auto sys = catalog::doubling();
  const auto word = sample_word(sys.base(), 50, 1);
  const auto rec = iterate(sys, 0.3141, word, nullptr, {kRoundoffRefresh, 1});
  const auto rep = detect_times(sys, rec, exponential_cfg(std::log(2.0), 0.5));
  EXPECT_EQ(rep.times.size(), 50u);
  EXPECT_EQ(rep.frequency, 1.0);
  EXPECT_EQ(frequency(rep), 1.0);
  EXPECT_EQ(rep.times.front(), 1);
  EXPECT_EQ(rep.times.back(), 50);
}

TEST(DetectTimes, RandomDoublingTriplingDetectsEveryTime) {
  const auto sys = catalog::random_doubling_tripling();
  const auto word = sample_word(sys.base(), 50, 2);
  const auto rec = iterate(sys, 0.77, word, nullptr, {kRoundoffRefresh, 2});
  const auto rep = detect_times(sys, rec, exponential_cfg(std::log(2.0), 0.5));
  EXPECT_EQ(rep.frequency, 1.0);
}

TEST(DetectTimes, QuadraticMatchesBruteForceWindowScan) {
  const auto sys = catalog::quadratic(2.0);
  const auto word = sample_word(sys.base(), 200, 0);
  const auto rec = iterate(sys, 0.01, word, nullptr, {kRoundoffRefresh, 5});
  const auto cfg = exponential_cfg(std::log(2.0), 0.5 * std::log(2.0), 0.05);
  const auto rep = detect_times(sys, rec, cfg);
  const auto oracle = brute_force_pliss(rec, cfg.margin());
  std::set<int> expected;
  for (int j : oracle)
    if (pull_back(sys, rec, j, cfg.delta).ok) expected.insert(j);
  EXPECT_EQ(std::set<int>(rep.candidates.begin(), rep.candidates.end()), expected);
  EXPECT_TRUE(std::includes(rep.candidates.begin(), rep.candidates.end(), rep.times.begin(),
                            rep.times.end()));
  EXPECT_EQ(rep.candidates.size(), rep.times.size() + static_cast<std::size_t>(rep.uncertified));
  EXPECT_GT(rep.frequency, 0.0);
  EXPECT_LT(rep.frequency, 1.0);
}

TEST(DetectTimes, ShortOrbitGivesEmptyReport) {
  const auto sys = catalog::doubling();
  OrbitRecord rec;
  rec.points = {0.3};
  const auto rep = detect_times(sys, rec, exponential_cfg(std::log(2.0), 0.5));
  EXPECT_TRUE(rep.times.empty());
  EXPECT_EQ(rep.frequency, 0.0);
}

TEST(DetectTimes, AbsentDerivativeDisqualifiesLaterWindows) {
  const auto sys = catalog::quadratic(2.0);
  const auto rec = iterate(sys, 0.5, std::vector<int>(20, 0));
  const auto rep = detect_times(sys, rec, exponential_cfg(std::log(2.0), 0.3, 0.05));
  EXPECT_TRUE(rep.times.empty());
}

TEST(DetectTimes, ConfigValidation) {
  const auto sys = catalog::doubling();
  const auto rec = iterate(sys, 0.3, std::vector<int>(5, 0));
  auto cfg = exponential_cfg(std::log(2.0), 0.8);
  EXPECT_THROW(detect_times(sys, rec, cfg), DomainError);
  cfg = exponential_cfg(std::log(2.0), 0.3, 0.6);
  EXPECT_THROW(detect_times(sys, rec, cfg), DomainError);
  cfg = exponential_cfg(std::log(2.0), 0.3);
  cfg.grid = 4;
  EXPECT_THROW(detect_times(sys, rec, cfg), DomainError);
}

TEST(VerifyTime, DoublingHalvesLengths) {
  const auto sys = catalog::doubling();
  const auto rec = iterate(sys, 0.3, std::vector<int>(5, 0));
  const auto v = verify_time(sys, rec, 3, exponential_cfg(std::log(2.0), 0.5));
  EXPECT_TRUE(v.passed);
  EXPECT_LE(v.worst_ratio, 1.0 + 1e-12);
  EXPECT_NEAR(v.preball.second - v.preball.first, 0.2 / 8.0, 1e-15);
}

TEST(VerifyTime, FoldInsideChainFailsConditionOne) {
  const auto sys = catalog::tent(1.5);  // left branch image is [0, 0.75]
  const auto rec = iterate(sys, 0.49, std::vector<int>(3, 0));
  const auto v = verify_time(sys, rec, 1, exponential_cfg(0.3, 0.1, 0.1));
  EXPECT_FALSE(v.passed);
  EXPECT_TRUE(v.condition_i_failed);
}

TEST(VerifyTime, ExplicitCriticalPointInsideChainFailsConditionOne) {
  const auto f = FiberMap::piecewise({Piece{0.0, 0.5, Piece::Shape::affine, 2.0, 0.0, 0.0},
                                      Piece{0.5, 1.0, Piece::Shape::affine, 2.0, -1.0, 0.0}},
                                     {0.3});
  const RandomSystem sys(BaseProcess::bernoulli({1.0}), {f}, PhaseSpace::interval);
  const auto rec = iterate(sys, 0.29, std::vector<int>(2, 0));
  const auto v = verify_time(sys, rec, 1, exponential_cfg(0.5, 0.2, 0.1));
  EXPECT_TRUE(v.condition_i_failed);
}

TEST(VerifyTime, NeutralProductPassesUnderRootDecay) {
  const auto sys = catalog::neutral_product();
  ZoomingConfig cfg;
  cfg.contraction = ZoomingContraction::root_decay();
  cfg.delta = 0.01;
  cfg.grid = 64;
  const auto word = sample_word(sys.base(), 60, 31);
  const auto rec = iterate(sys, 0.003, word, nullptr, {kRoundoffRefresh, 31});
  const auto v = verify_time(sys, rec, 40, cfg);
  EXPECT_TRUE(v.passed) << v.message << " worst=" << v.worst_ratio;
  const auto rep = detect_times(sys, rec, cfg);
  EXPECT_EQ(rep.method, "direct");
  EXPECT_GT(rep.frequency, 0.9);
}

TEST(VerifyTime, NeutralBranchIsTooSlowForExponentialContraction) {
  // orbit lingering near the neutral point: long pre-balls cannot shrink exponentially
  const auto sys = catalog::neutral_product();
  const auto rec = iterate(sys, 1e-4, std::vector<int>(40, 0));
  const auto v = verify_time(sys, rec, 30, exponential_cfg(0.5, 0.2, 0.01));
  EXPECT_FALSE(v.passed);
  EXPECT_FALSE(v.condition_i_failed);
  EXPECT_GT(v.worst_ratio, 1.0);
}

TEST(Properties, PlissTimesPassVerificationAtMargin) {
  for (const auto& sys : {catalog::doubling(), catalog::random_doubling_tripling()}) {
    const auto cfg = exponential_cfg(std::log(2.0), 0.5 * std::log(2.0));
    EnsembleSettings settings;
    settings.points = 20;
    settings.length = 60;
    const auto entries = classify_ensemble(sys, cfg, settings, 9);
    for (const auto& e : entries) {
      EXPECT_EQ(e.pliss_failures, 0);
      EXPECT_LE(e.pliss_worst_ratio, 1.0 + 1e-6);
      EXPECT_EQ(e.pliss_checked, 60);
    }
  }
}

TEST(Properties, PlissTimesPassVerificationOnQuadraticEnsemble) {
  const auto sys = catalog::quadratic(2.0);
  const auto cfg = exponential_cfg(std::log(2.0), 0.5 * std::log(2.0), 0.05);
  EnsembleSettings settings;
  settings.points = 30;
  settings.length = 120;
  const auto entries = classify_ensemble(sys, cfg, settings, 10);
  int checked = 0, failures = 0;
  for (const auto& e : entries) {
    checked += e.pliss_checked;
    failures += e.pliss_failures;
  }
  EXPECT_GT(checked, 0);
  EXPECT_EQ(failures, 0);
}

TEST(Properties, ShrinkingDeltaNeverRemovesTimes) {
  const auto sys = catalog::quadratic(2.0);
  const auto word = sample_word(sys.base(), 150, 0);
  const auto rec = iterate(sys, 0.2, word, nullptr, {kRoundoffRefresh, 8});
  std::set<int> previous;
  bool first = true;
  for (double delta : {0.2, 0.1, 0.05, 0.01}) {
    const auto rep = detect_times(sys, rec, exponential_cfg(std::log(2.0), 0.35, delta));
    const std::set<int> now(rep.times.begin(), rep.times.end());
    if (!first) { EXPECT_TRUE(std::includes(now.begin(), now.end(), previous.begin(), previous.end())); }
    previous = now;
    first = false;
  }
}

TEST(Properties, ShrinkingDeltaNeverRemovesDirectTimes) {
  const auto sys = catalog::neutral_product();
  ZoomingConfig cfg;
  cfg.contraction = ZoomingContraction::root_decay();
  cfg.grid = 16;
  const auto rec = iterate(sys, 0.002, sample_word(sys.base(), 40, 3), nullptr, {kRoundoffRefresh, 3});
  std::set<int> previous;
  bool first = true;
  for (double delta : {0.05, 0.02, 0.01, 0.005}) {
    cfg.delta = delta;
    const auto rep = detect_times(sys, rec, cfg);
    const std::set<int> now(rep.times.begin(), rep.times.end());
    if (!first) { EXPECT_TRUE(std::includes(now.begin(), now.end(), previous.begin(), previous.end())); }
    previous = now;
    first = false;
  }
}

TEST(Properties, FrequencyInvariantUnderSymbolRelabeling) {
  const auto sys = catalog::coupled_quadratic(1.95, 0.02, {-1.0, 1.0}, {0.3, 0.7});
  const auto swapped = catalog::coupled_quadratic(1.95, 0.02, {1.0, -1.0}, {0.7, 0.3});
  const auto word = sample_word(sys.base(), 200, 4);
  std::vector<int> relabeled(word.size());
  std::transform(word.begin(), word.end(), relabeled.begin(), [](int s) { return 1 - s; });
  const auto cfg = exponential_cfg(std::log(2.0), 0.3, 0.05);
  const auto a = detect_times(sys, iterate(sys, 0.21, word), cfg);
  const auto b = detect_times(swapped, iterate(swapped, 0.21, relabeled), cfg);
  EXPECT_EQ(a.frequency, b.frequency);
  EXPECT_EQ(a.times, b.times);
}

TEST(Properties, PassingVerdictsRespectSlack) {
  const auto sys = catalog::neutral_product();
  ZoomingConfig cfg;
  cfg.contraction = ZoomingContraction::root_decay();
  cfg.delta = 0.01;
  cfg.grid = 16;
  const auto rec = iterate(sys, 0.01, sample_word(sys.base(), 50, 6), nullptr, {kRoundoffRefresh, 6});
  for (int j = 1; j <= 50; ++j) {
    const auto v = verify_time(sys, rec, j, cfg);
    if (v.passed) { EXPECT_LE(v.worst_ratio, 1.0 + 1e-6); }
    EXPECT_EQ(v.near_miss, v.passed && v.worst_ratio > 1.0);
  }
}

TEST(Classify, DoublingIsZoomingLike) {
  const auto sys = catalog::doubling();
  EXPECT_EQ(classify_point(sys, 0.42, std::vector<int>(100, 0), exponential_cfg(std::log(2.0), 0.3), 0.1),
            ZoomingFlag::zooming_like);
}

TEST(Classify, AttractedOrbitIsNonZoomingLike) {
  const auto sys = catalog::split_attractor();
  EXPECT_EQ(classify_point(sys, 0.9, std::vector<int>(100, 0), exponential_cfg(std::log(2.0), 0.3), 0.1),
            ZoomingFlag::non_zooming_like);
  EXPECT_THROW(classify_point(sys, 0.9, std::vector<int>(10, 0), exponential_cfg(0.5, 0.2), 1.0),
               DomainError);
}

TEST(Classify, QuadraticEnsembleMostlyZoomingLike) {
  const auto sys = catalog::quadratic(2.0);
  EnsembleSettings settings;
  settings.points = 100;
  settings.length = 200;
  settings.threshold = 0.05;
  settings.verify_pliss = false;
  const auto entries = classify_ensemble(sys, exponential_cfg(std::log(2.0), 0.5 * std::log(2.0), 0.05),
                                         settings, 2024);
  const auto count = std::count_if(entries.begin(), entries.end(),
                                   [](const auto& e) { return e.flag == ZoomingFlag::zooming_like; });
  RecordProperty("zooming_like", static_cast<int>(count));
  EXPECT_GE(count, 90);
}

TEST(Classify, EnsembleIndependentOfWorkers) {
  const auto sys = catalog::quadratic(2.0);
  EnsembleSettings settings;
  settings.points = 12;
  settings.length = 80;
  const auto cfg = exponential_cfg(std::log(2.0), 0.35, 0.05);
  const auto one = classify_ensemble(sys, cfg, settings, 5);
  settings.workers = 4;
  const auto four = classify_ensemble(sys, cfg, settings, 5);
  for (std::size_t i = 0; i < one.size(); ++i) {
    EXPECT_EQ(one[i].x0, four[i].x0);
    EXPECT_EQ(one[i].frequency, four[i].frequency);
  }
}

TEST(SlowApproach, Conventions) {
  const auto sys = catalog::quadratic(2.0);
  const auto rec = iterate(sys, 0.2, std::vector<int>(50, 0), nullptr, {kRoundoffRefresh, 1});
  EXPECT_EQ(slow_approach_statistic(rec, {}, 1.0), 0.0);
  EXPECT_NEAR(slow_approach_statistic(rec, {}, 0.1), -std::log(0.1), 1e-12);
}

TEST(SlowApproach, FarFromCriticalSetIsTruncated) {
  const auto sys = catalog::doubling(PhaseSpace::interval);
  // 0 is fixed and 0.1 from 1/2 stays away: constant orbit
  OrbitRecord rec;
  rec.word = std::vector<int>(10, 0);
  rec.points = std::vector<double>(11, 0.2);
  const std::vector<double> c{0.5};
  EXPECT_NEAR(slow_approach_statistic(rec, c, 0.1), 2.302585092994046, 1e-12);
}

TEST(SlowApproach, CoupledQuadraticEnsembleIsFinite) {
  const auto sys = catalog::coupled_quadratic(1.9, 0.05, {-1.0, 1.0}, {0.5, 0.5});
  std::vector<double> stats;
  for (int k = 0; k < 10; ++k) {
    const auto word = sample_word(sys.base(), 10000, 77, k);
    const auto rec = iterate(sys, 0.1 + 0.07 * k, word, nullptr, {kRoundoffRefresh, static_cast<std::uint64_t>(k)});
    stats.push_back(slow_approach_statistic(rec, sys.critical_points(), 1e-3));
  }
  std::sort(stats.begin(), stats.end());
  const double median = 0.5 * (stats[4] + stats[5]);
  RecordProperty("median", std::to_string(median));
  EXPECT_TRUE(std::isfinite(median));
  EXPECT_GE(median, -std::log(1e-3));
}

TEST(Expansivity, DoublingPairSeparatesAtSeven) {
  const auto sys = catalog::doubling();
  const std::vector<int> word(200, 0);
  const auto t = separation_time(sys, 0.3, 0.3 + std::ldexp(1.0, -10), word, 0.1);
  ASSERT_TRUE(t.has_value());
  EXPECT_EQ(*t, 7);
  EXPECT_FALSE(separation_time(sys, 0.3, 0.3, word, 0.1).has_value());
}

TEST(Expansivity, RandomDoublingTriplingAllSeparate) {
  const auto sys = catalog::random_doubling_tripling();
  const auto rep = expansivity_check(sys, 1000, 0.1, 200, 123, std::ldexp(1.0, -10));
  EXPECT_EQ(rep.separated + rep.degenerate, 1000u);
  EXPECT_EQ(rep.fraction, 1.0);
  EXPECT_LE(rep.max_time, 200);
}

TEST(Expansivity, AttractingBranchDoesNotSeparate) {
  const auto sys = catalog::split_attractor();
  const std::vector<int> word(200, 0);
  EXPECT_FALSE(separation_time(sys, 0.8, 0.8 + 1e-3, word, 0.1).has_value());
}
