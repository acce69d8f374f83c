#pragma once

#include <array>
#include <cfloat>
#include <cmath>
#include <cstdint>
#include <sstream>
#include <string>
#include <variant>

#include "zoomrds/errors.hpp"
#include "zoomrds/random.hpp"

namespace zoomrds {

// alpha_n(r) = exp(-rate * n) * r
struct Exponential {
  double rate;
};

// a_n = (n + offset)^(-exponent)
struct PowerLaw {
  double exponent;
  double offset;
};

// a_n = ratio^n
struct Geometric {
  double ratio;
};

// alpha_n(r) = a_n * r
struct Lipschitz {
  std::variant<PowerLaw, Geometric> rule;
};

// alpha_n(r) = r / (1 + scale * n * sqrt(r))^2, the contraction of inverse
// branches at a neutral fixed point. Composition is exact:
// 1/sqrt(alpha_n(r)) = 1/sqrt(r) + scale * n.
struct RootDecay {
  double scale = 1.0;
};

using ContractionKind = std::variant<Exponential, Lipschitz, RootDecay>;

class ZoomingContraction {
 public:
  ZoomingContraction(ContractionKind kind, int horizon) : kind_(kind), horizon_(horizon) {
    if (horizon_ < 1) throw DomainError("contraction horizon must be positive");
    std::visit(
        [](const auto& k) {
          using K = std::decay_t<decltype(k)>;
          if constexpr (std::is_same_v<K, Exponential>) {
            if (!(k.rate > 0.0)) throw DomainError("exponential rate must be positive");
          } else if constexpr (std::is_same_v<K, RootDecay>) {
            if (!(k.scale > 0.0)) throw DomainError("root-decay scale must be positive");
          } else {
            std::visit(
                [](const auto& r) {
                  using R = std::decay_t<decltype(r)>;
                  if constexpr (std::is_same_v<R, PowerLaw>) {
                    if (!(r.exponent > 0.0) || !(r.offset > 0.0))
                      throw DomainError("power-law coefficients need exponent > 0 and offset > 0");
                  } else {
                    if (!(r.ratio >= 0.0 && r.ratio < 1.0))
                      throw DomainError("geometric ratio must lie in [0, 1)");
                  }
                },
                k.rule);
          }
        },
        kind_);
  }

  static ZoomingContraction exponential(double rate, int horizon = 1000) {
    return {Exponential{rate}, horizon};
  }
  static ZoomingContraction power_law(double exponent, double offset, int horizon = 1000) {
    return {Lipschitz{PowerLaw{exponent, offset}}, horizon};
  }
  static ZoomingContraction geometric(double ratio, int horizon = 1000) {
    return {Lipschitz{Geometric{ratio}}, horizon};
  }
  static ZoomingContraction root_decay(double scale = 1.0, int horizon = 1000) {
    return {RootDecay{scale}, horizon};
  }

  const ContractionKind& kind() const { return kind_; }
  int horizon() const { return horizon_; }

  bool is_exponential() const { return std::holds_alternative<Exponential>(kind_); }

  // alpha_n(r) = c_n * r for some c_n.
  bool linear_in_r() const { return !std::holds_alternative<RootDecay>(kind_); }

  // Rate of an exponential family; throws for other kinds.
  double rate() const {
    if (auto e = std::get_if<Exponential>(&kind_)) return e->rate;
    throw DomainError("contraction is not exponential");
  }

  std::string name() const {
    std::ostringstream os;
    os.precision(17);
    std::visit(
        [&](const auto& k) {
          using K = std::decay_t<decltype(k)>;
          if constexpr (std::is_same_v<K, Exponential>) {
            os << "exponential(rate=" << k.rate << ")";
          } else if constexpr (std::is_same_v<K, RootDecay>) {
            os << "root-decay(scale=" << k.scale << ")";
          } else {
            std::visit(
                [&](const auto& r) {
                  using R = std::decay_t<decltype(r)>;
                  if constexpr (std::is_same_v<R, PowerLaw>)
                    os << "lipschitz-power(exponent=" << r.exponent << ", offset=" << r.offset << ")";
                  else
                    os << "lipschitz-geometric(ratio=" << r.ratio << ")";
                },
                k.rule);
          }
        },
        kind_);
    return os.str();
  }

  // alpha_n(r) without range checks.
  double raw(int n, double r) const {
    if (r == 0.0) return 0.0;
    return std::visit(
        [&](const auto& k) -> double {
          using K = std::decay_t<decltype(k)>;
          if constexpr (std::is_same_v<K, Exponential>) {
            return std::exp(-k.rate * n) * r;
          } else if constexpr (std::is_same_v<K, RootDecay>) {
            const double denom = 1.0 + k.scale * n * std::sqrt(r);
            return r / (denom * denom);
          } else {
            const double a = std::visit(
                [&](const auto& rule) -> double {
                  using R = std::decay_t<decltype(rule)>;
                  if constexpr (std::is_same_v<R, PowerLaw>)
                    return std::pow(n + rule.offset, -rule.exponent);
                  else
                    return std::pow(rule.ratio, n);
                },
                k.rule);
            return a * r;
          }
        },
        kind_);
  }

 private:
  ContractionKind kind_;
  int horizon_;
};

inline double evaluate(const ZoomingContraction& c, int n, double r) {
  if (n < 1 || n > c.horizon())
    throw HorizonError("contraction index " + std::to_string(n) + " outside [1, " +
                       std::to_string(c.horizon()) + "]");
  if (!(r >= 0.0)) throw DomainError("contraction argument must be nonnegative");
  return c.raw(n, r);
}

struct AxiomResult {
  std::string name;
  bool passed = true;
  std::string counterexample;  // empty when passed
  double observed = 0.0;       // worst observed margin or tail
};

struct AxiomReport {
  std::array<AxiomResult, 4> axioms;
  bool all_passed() const {
    for (const auto& a : axioms)
      if (!a.passed) return false;
    return true;
  }
};

struct AxiomSettings {
  double composition_slack = 1e-12;
  double r_max = 2.0;        // sup of r sampled for axioms 1-3
  int r_grid = 64;           // grid points in (0, 1) for the summability axiom
  double tail_bound = 1e-2;  // max allowed sum of alpha_n(r) over n in (N/2, N]
};

// Samples (m, n, r, s) from a seeded generator and tests the four axioms:
// sub-identity, strict monotonicity, composition, uniform summability.
// Summability is judged on a grid plus sampled r in (0, 1), by requiring the
// partial-sum tail over the upper half of the horizon to stay below a bound.
inline AxiomReport check_axioms(const ZoomingContraction& c, int samples, std::uint64_t seed,
                                const AxiomSettings& settings = {}) {
  if (samples < 1) throw DomainError("check_axioms needs at least one sample");
  AxiomReport report;
  report.axioms[0].name = "sub-identity";
  report.axioms[1].name = "monotonicity";
  report.axioms[2].name = "composition";
  report.axioms[3].name = "summability";

  auto fail = [](AxiomResult& a, const std::string& what) {
    if (a.passed) {
      a.passed = false;
      a.counterexample = what;
    }
  };
  auto fmt = [](auto... parts) {
    std::ostringstream os;
    os.precision(17);
    ((os << parts), ...);
    return os.str();
  };

  const int horizon = c.horizon();
  Rng rng(seed);
  std::vector<double> sampled_unit_r;
  double worst_identity = -INFINITY;
  double worst_composition = -INFINITY;
  for (int k = 0; k < samples; ++k) {
    const int n = 1 + static_cast<int>(rng.below(static_cast<std::uint64_t>(horizon)));
    const double r = settings.r_max * rng.uniform_open0();
    const double s = settings.r_max * rng.uniform_open0();
    if (k < 4 * settings.r_grid) sampled_unit_r.push_back(rng.uniform_open0() * (1.0 - 1e-12));

    const double ar = evaluate(c, n, r);
    worst_identity = std::max(worst_identity, ar - r);
    if (!(ar < r)) fail(report.axioms[0], fmt("n=", n, " r=", r, " alpha=", ar));

    const double lo = std::min(r, s), hi = std::max(r, s);
    if (lo < hi) {
      const double alo = evaluate(c, n, lo), ahi = evaluate(c, n, hi);
      // Below the normal range a strict inequality is not representable.
      if (!(alo < ahi) && ahi >= DBL_MIN)
        fail(report.axioms[1], fmt("n=", n, " r=", lo, " s=", hi, " alpha(r)=", alo,
                                   " alpha(s)=", ahi));
    }

    if (horizon >= 2) {
      const int total = 2 + static_cast<int>(rng.below(static_cast<std::uint64_t>(horizon - 1)));
      const int m = 1 + static_cast<int>(rng.below(static_cast<std::uint64_t>(total - 1)));
      const int nn = total - m;
      const double lhs = evaluate(c, m, evaluate(c, nn, r));
      const double rhs = evaluate(c, total, r);
      worst_composition = std::max(worst_composition, lhs - rhs);
      if (lhs > rhs + settings.composition_slack)
        fail(report.axioms[2], fmt("m=", m, " n=", nn, " r=", r, " lhs=", lhs, " rhs=", rhs));
    }
  }
  report.axioms[0].observed = worst_identity;
  report.axioms[1].observed = 0.0;
  report.axioms[2].observed = worst_composition;

  std::vector<double> rs;
  for (int k = 1; k <= settings.r_grid; ++k)
    rs.push_back(static_cast<double>(k) / (settings.r_grid + 1));
  rs.insert(rs.end(), sampled_unit_r.begin(), sampled_unit_r.end());
  double worst_tail = 0.0;
  for (double r : rs) {
    CompensatedSum tail;
    for (int n = horizon / 2 + 1; n <= horizon; ++n) tail.add(c.raw(n, r));
    if (tail.value() > worst_tail) {
      worst_tail = tail.value();
      if (worst_tail > settings.tail_bound)
        fail(report.axioms[3], fmt("r=", r, " tail sum over (", horizon / 2, ", ", horizon,
                                   "] = ", worst_tail, " > ", settings.tail_bound));
    }
  }
  report.axioms[3].observed = worst_tail;
  return report;
}

}  // namespace zoomrds
