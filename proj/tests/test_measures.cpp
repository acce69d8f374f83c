#include <gtest/gtest.h>

#include <cmath>
#include <memory>

#include "zoomrds/catalog.hpp"
#include "zoomrds/measures.hpp"

using namespace zoomrds;

TEST(Measures, DiracAtFixedPoint) {
  const auto sys = catalog::split_attractor();
  const auto m = make_dirac(sys, catalog::kSplitAttractorFixedPoint);
  EXPECT_EQ(m.atom_count(), 1u);
  EXPECT_NEAR(birkhoff_integral(m, Potential::coordinate()), 2.0 / 3.0, 1e-15);
  EXPECT_THROW(make_dirac(sys, 0.3), PreconditionError);
}

TEST(Measures, DiracEntropyIsZero) {
  const auto sys = catalog::doubling();
  const auto m = make_dirac(sys, 0.0);
  EXPECT_NEAR(entropy_estimate(m, sys, 32, 10, 5, 1).value, 0.0, 1e-12);
}

TEST(Measures, PeriodicOrbitsOfDoubling) {
  const auto orbits = linear_periodic_orbits(2, 6);
  ASSERT_EQ(orbits.size(), 6u);
  EXPECT_EQ(orbits[0], std::make_pair(0.0, 1));
  EXPECT_NEAR(orbits[1].first, 1.0 / 3.0, 1e-15);
  EXPECT_EQ(orbits[1].second, 2);
  const auto sys = catalog::doubling();
  for (const auto& [x0, p] : orbits) {
    const auto m = make_periodic(sys, std::vector<int>(static_cast<std::size_t>(p), 0), x0);
    EXPECT_EQ(m.atom_count(), static_cast<std::size_t>(p));
    EXPECT_NEAR(entropy_estimate(m, sys, 64, 12, 1, 0).value, 0.0, 1e-12);
  }
  EXPECT_THROW(make_periodic(sys, {0, 0}, 0.3), PreconditionError);
}

TEST(Measures, PeriodicIntegralIsOrbitAverage) {
  const auto sys = catalog::doubling();
  const auto m = make_periodic(sys, {0, 0}, 1.0 / 3.0);
  EXPECT_NEAR(birkhoff_integral(m, Potential::coordinate()), 0.5, 1e-12);
}

TEST(Measures, EmpiricalDoublingMeanIsHalf) {
  const auto sys = catalog::doubling();
  const auto rec = iterate(sys, 0.1234567, std::vector<int>(100000, 0), nullptr, IterateOptions{kRoundoffRefresh, 7});
  const auto m = make_empirical(sys, rec, 100);
  EXPECT_NEAR(birkhoff_integral(m, Potential::coordinate()), 0.5, 0.01);
}

TEST(Measures, IntegralIsLinearAndMonotone) {
  const auto sys = catalog::random_doubling_tripling();
  auto model = std::make_shared<const UlamModel>(build_ulam(sys, 32));
  std::vector<double> uniform(32, 1.0 / 32);
  const auto candidates = {make_ulam(model, uniform), make_dirac(sys, 0.0),
                           make_empirical(sys, iterate(sys, 0.2, sample_word(sys.base(), 500, 3, 0), nullptr,
                                                       IterateOptions{kRoundoffRefresh, 3}),
                                          10)};
  const auto f = Potential::coordinate(), g = Potential::bump(0.4, 0.2, 1.0, PhaseSpace::circle);
  for (const auto& m : candidates) {
    const double a = birkhoff_integral(m, f), b = birkhoff_integral(m, g);
    EXPECT_NEAR(birkhoff_integral(m, f.scaled(2.5)), 2.5 * a, 1e-12);
    EXPECT_NEAR(birkhoff_integral(m, f.shifted(-1.0)), a - 1.0, 1e-12);
    EXPECT_LE(b, birkhoff_integral(m, g.shifted(0.1)));
  }
}

TEST(Measures, UlamIntegralOfPerSymbolPotential) {
  const auto sys = catalog::random_doubling_tripling(0.25);
  auto model = std::make_shared<const UlamModel>(build_ulam(sys, 16));
  const auto m = make_ulam(model, std::vector<double>(16, 1.0 / 16));
  EXPECT_NEAR(birkhoff_integral(m, Potential::per_symbol({1.0, 5.0})), 0.25 + 0.75 * 5.0, 1e-12);
}

TEST(Entropy, UniformDepthOneIsLogN) {
  const auto sys = catalog::doubling();
  auto model = std::make_shared<const UlamModel>(build_ulam(sys, 32));
  const auto m = make_ulam(model, std::vector<double>(32, 1.0 / 32));
  const auto est = entropy_estimate(m, sys, 32, 6, 1, 0);
  EXPECT_NEAR(est.depth_entropy[0], std::log(32.0), 1e-12);
}

TEST(Entropy, DoublingTwoCellsIsLogTwo) {
  const auto sys = catalog::doubling();
  auto model = std::make_shared<const UlamModel>(build_ulam(sys, 2));
  const auto m = make_ulam(model, {0.5, 0.5});
  const auto est = entropy_estimate(m, sys, 2, 12, 1, 0);
  EXPECT_NEAR(est.value, std::log(2.0), 1e-12);
  for (int n = 0; n < 12; ++n) EXPECT_NEAR(est.depth_entropy[n], (n + 1) * std::log(2.0), 1e-10);
}

TEST(Entropy, UlamUniformCandidateNearLogTwo) {
  const auto sys = catalog::doubling();
  auto model = std::make_shared<const UlamModel>(build_ulam(sys, 64));
  const auto m = make_ulam(model, std::vector<double>(64, 1.0 / 64), Potential::null());
  EXPECT_NEAR(entropy_estimate(m, sys, 64, 12, 1, 0).value, std::log(2.0), 0.05);
}

TEST(Entropy, EmpiricalDoublingNearLogTwo) {
  const auto sys = catalog::doubling();
  const auto rec = iterate(sys, 0.3141592, std::vector<int>(200000, 0), nullptr, IterateOptions{kRoundoffRefresh, 5});
  const auto m = make_empirical(sys, rec, 100);
  EXPECT_NEAR(entropy_estimate(m, sys, 2, 8, 1, 0).value, std::log(2.0), 0.05);
}

TEST(Entropy, RandomFiberUlamEntropy) {
  const auto sys = catalog::random_doubling_tripling();
  auto model = std::make_shared<const UlamModel>(build_ulam(sys, 36));
  const auto m = make_ulam(model, std::vector<double>(36, 1.0 / 36));
  const auto est = entropy_estimate(m, sys, 36, 12, 40, 4);
  EXPECT_NEAR(est.value, 0.5 * (std::log(2.0) + std::log(3.0)), 0.05);
  EXPECT_EQ(est.samples, 40u);
}

TEST(Entropy, UlamRejectsForeignPartition) {
  const auto sys = catalog::doubling();
  auto model = std::make_shared<const UlamModel>(build_ulam(sys, 16));
  const auto m = make_ulam(model, std::vector<double>(16, 1.0 / 16));
  EXPECT_THROW(entropy_estimate(m, sys, 32, 6, 1, 0), DomainError);
}

TEST(Entropy, PartitionDiameterCheck) {
  EXPECT_NO_THROW(validate_partition(10, 0.1));
  EXPECT_THROW(validate_partition(9, 0.1), DomainError);
}

TEST(Entropy, CellWeightsConserveMass) {
  const auto sys = catalog::doubling();
  auto model = std::make_shared<const UlamModel>(build_ulam(sys, 24));
  std::vector<double> w(24);
  for (int i = 0; i < 24; ++i) w[i] = (i + 1) / 300.0;
  const auto m = make_ulam(model, w);
  for (int cells : {7, 24, 50}) {
    const auto cw = cell_weights(m, cells);
    double total = 0.0;
    for (double v : cw) total += v;
    EXPECT_NEAR(total, 1.0, 1e-12);
  }
}
