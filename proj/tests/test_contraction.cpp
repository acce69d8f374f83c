#include <gtest/gtest.h>

#include <cmath>

#include "zoomrds/contraction.hpp"

using namespace zoomrds;

TEST(Evaluate, ExponentialHalvesAtLog2) {
  const auto c = ZoomingContraction::exponential(std::log(2.0));
  EXPECT_NEAR(evaluate(c, 1, 0.5), 0.25, 1e-15);
}

TEST(Evaluate, RootDecayMatchesDirectSubstitution) {
  const auto c = ZoomingContraction::root_decay();
  // (1 / (1 + 2 * sqrt(0.25)))^2 * 0.25
  const double oracle = std::pow(1.0 / (1.0 + 2.0 * std::sqrt(0.25)), 2) * 0.25;
  EXPECT_NEAR(evaluate(c, 2, 0.25), oracle, 1e-15);
  EXPECT_NEAR(evaluate(c, 2, 0.25), 0.0625, 1e-15);
}

TEST(Evaluate, ZeroArgumentGivesZero) {
  for (const auto& c : {ZoomingContraction::exponential(0.3), ZoomingContraction::power_law(2, 1),
                        ZoomingContraction::geometric(0.5), ZoomingContraction::root_decay()})
    EXPECT_EQ(evaluate(c, 3, 0.0), 0.0);
}

TEST(Evaluate, RangeErrors) {
  const auto c = ZoomingContraction::exponential(0.5, 10);
  EXPECT_THROW(evaluate(c, 0, 0.1), HorizonError);
  EXPECT_THROW(evaluate(c, 11, 0.1), HorizonError);
  EXPECT_THROW(evaluate(c, 1, -0.1), DomainError);
  EXPECT_NO_THROW(evaluate(c, 10, 0.1));
}

TEST(Evaluate, InvalidParametersRejected) {
  EXPECT_THROW(ZoomingContraction::exponential(0.0), DomainError);
  EXPECT_THROW(ZoomingContraction::geometric(1.0), DomainError);
  EXPECT_THROW(ZoomingContraction::power_law(2.0, 0.0), DomainError);
  EXPECT_THROW(ZoomingContraction::root_decay(-1.0), DomainError);
  EXPECT_THROW(ZoomingContraction::exponential(1.0, 0), DomainError);
}

TEST(Axioms, ExponentialPasses) {
  for (double rate : {0.1, 0.5, std::log(2.0)}) {
    const auto rep = check_axioms(ZoomingContraction::exponential(rate), 10000, 7);
    EXPECT_TRUE(rep.all_passed()) << rate;
  }
}

TEST(Axioms, HarmonicFailsSummabilityOnly) {
  const auto rep = check_axioms(ZoomingContraction::power_law(1.0, 1.0), 10000, 7);
  EXPECT_TRUE(rep.axioms[0].passed);
  EXPECT_TRUE(rep.axioms[1].passed);
  EXPECT_TRUE(rep.axioms[2].passed);
  EXPECT_FALSE(rep.axioms[3].passed);
  EXPECT_FALSE(rep.axioms[3].counterexample.empty());
}

TEST(Axioms, InverseSquareCoefficientsAreSupermultiplicative) {
  // a_n = (n+1)^-2 satisfies a_m a_n <= a_{m+n} iff (m+1)^2 (n+1)^2 >= (m+n+1)^2
  for (long m = 0; m <= 100; ++m)
    for (long n = 0; n <= 100; ++n)
      ASSERT_GE((m + 1) * (m + 1) * (n + 1) * (n + 1), (m + n + 1) * (m + n + 1)) << m << "," << n;
  const auto rep = check_axioms(ZoomingContraction::power_law(2.0, 1.0), 10000, 11);
  EXPECT_TRUE(rep.all_passed());
}

TEST(Axioms, RootDecayPasses) {
  const auto rep = check_axioms(ZoomingContraction::root_decay(), 10000, 3);
  for (const auto& a : rep.axioms) EXPECT_TRUE(a.passed) << a.name << ": " << a.counterexample;
}

TEST(Axioms, SeedDeterministic) {
  const auto c = ZoomingContraction::power_law(1.0, 1.0);
  const auto a = check_axioms(c, 500, 42), b = check_axioms(c, 500, 42);
  for (int k = 0; k < 4; ++k) {
    EXPECT_EQ(a.axioms[k].passed, b.axioms[k].passed);
    EXPECT_EQ(a.axioms[k].counterexample, b.axioms[k].counterexample);
    EXPECT_EQ(a.axioms[k].observed, b.axioms[k].observed);
  }
}

TEST(Axioms, GeometricLipschitzPasses) {
  EXPECT_TRUE(check_axioms(ZoomingContraction::geometric(0.9), 2000, 5).all_passed());
}

TEST(Properties, ExponentialCompositionIsExact) {
  const auto c = ZoomingContraction::exponential(0.37);
  Rng rng(99);
  for (int k = 0; k < 2000; ++k) {
    const int m = 1 + static_cast<int>(rng.below(400)), n = 1 + static_cast<int>(rng.below(400));
    const double r = 2.0 * rng.uniform_open0();
    const double lhs = evaluate(c, m + n, r), rhs = evaluate(c, m, evaluate(c, n, r));
    EXPECT_NEAR(lhs, rhs, 1e-12);
  }
}

TEST(Properties, RootDecayCompositionIsExact) {
  const auto c = ZoomingContraction::root_decay(1.0);
  Rng rng(5);
  for (int k = 0; k < 2000; ++k) {
    const int m = 1 + static_cast<int>(rng.below(400)), n = 1 + static_cast<int>(rng.below(400));
    const double r = rng.uniform_open0();
    EXPECT_NEAR(evaluate(c, m + n, r), evaluate(c, m, evaluate(c, n, r)), 1e-12);
  }
}

TEST(Properties, SubIdentityAndMonotoneOnSamples) {
  Rng rng(8);
  for (const auto& c : {ZoomingContraction::exponential(0.2), ZoomingContraction::power_law(2, 1),
                        ZoomingContraction::root_decay()}) {
    for (int k = 0; k < 1000; ++k) {
      const int n = 1 + static_cast<int>(rng.below(1000));
      const double r = rng.uniform_open0(), s = r + 0.5 * rng.uniform_open0();
      EXPECT_LT(evaluate(c, n, r), r);
      EXPECT_LT(evaluate(c, n, r), evaluate(c, n, s));
    }
  }
}
