#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <memory>
#include <string>
#include <vector>

#include "zoomrds/errors.hpp"
#include "zoomrds/measures.hpp"
#include "zoomrds/potential.hpp"
#include "zoomrds/random.hpp"
#include "zoomrds/ulam.hpp"

namespace zoomrds {

struct CocycleEstimate {
  double value = 0.0;
  double standard_error = 0.0;
  std::vector<double> per_word;
  int length = 0;
  int warmup = 0;
};

inline constexpr int kCocycleWarmup = 64;

inline bool random_base(const UlamModel& m, const BaseProcess& base) {
  return m.alphabet() > 1 && base.explicit_word.empty();
}

// Lyapunov exponent of the weighted cocycle u -> u L_{w_t}: the mean over
// words of (1/n) sum_t log |u_t L_{w_t}|_1, after `warmup` discarded steps.
inline CocycleEstimate cocycle_pressure(const UlamModel& model, const BaseProcess& base, const Potential& phi,
                                        std::size_t words, int n, std::uint64_t seed,
                                        std::size_t workers = 1, int warmup = kCocycleWarmup) {
  if (n < 10) throw DomainError("cocycle length must be at least 10");
  if (words < 1) throw DomainError("cocycle needs at least one word");
  const auto weights = potential_weights(model, phi);
  const std::size_t runs = random_base(model, base) ? words : 1;
  const auto total = static_cast<std::size_t>(warmup + n);
  auto per = parallel_map(runs, workers, [&](std::size_t k) {
    const auto word = sample_word(base, total, seed, k);
    std::vector<double> u(static_cast<std::size_t>(model.cells), 1.0 / model.cells), next(u.size());
    CompensatedSum logs;
    for (std::size_t t = 0; t < total; ++t) {
      const auto s = static_cast<std::size_t>(word[t]);
      model.coverage[s].left_multiply(u, weights[s], next);
      const double lg = normalize_sum(next);
      if (!std::isfinite(lg)) return -std::numeric_limits<double>::infinity();
      if (t >= static_cast<std::size_t>(warmup)) logs.add(lg);
      u.swap(next);
    }
    return logs.value() / n;
  });
  CocycleEstimate est;
  est.length = n;
  est.warmup = warmup;
  if (runs == 1) per.assign(words, per[0]);
  est.per_word = per;
  for (double v : per)
    if (!std::isfinite(v)) {
      est.value = -std::numeric_limits<double>::infinity();
      return est;
    }
  const auto me = mean_and_error(per);
  est.value = me.mean;
  est.standard_error = me.standard_error;
  return est;
}

inline double total_variation(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += std::abs(a[i] - b[i]);
  return 0.5 * s;
}

// TV distance between w and its image under one averaged Ulam step sum_s p_s w A_s.
inline double stationarity_defect(const UlamModel& model, std::span<const double> w) {
  std::vector<double> pushed(w.size(), 0.0), tmp(w.size());
  for (std::size_t s = 0; s < model.alphabet(); ++s) {
    if (model.probabilities[s] <= 0.0) continue;
    model.transition[s].left_multiply(w, {}, tmp);
    for (std::size_t i = 0; i < w.size(); ++i) pushed[i] += model.probabilities[s] * tmp[i];
  }
  return total_variation(w, pushed);
}

// Power iteration of the averaged transition w -> sum_s p_s w A_s from the
// uniform vector, stopped when a step moves less than `tol` in TV.
inline std::vector<double> stationary_weights(const UlamModel& model, int max_steps = 10000, double tol = 1e-13) {
  std::vector<double> w(static_cast<std::size_t>(model.cells), 1.0 / model.cells), next(w.size()), tmp(w.size());
  for (int step = 0; step < max_steps; ++step) {
    std::fill(next.begin(), next.end(), 0.0);
    for (std::size_t s = 0; s < model.alphabet(); ++s) {
      if (model.probabilities[s] <= 0.0) continue;
      model.transition[s].left_multiply(w, {}, tmp);
      for (std::size_t i = 0; i < w.size(); ++i) next[i] += model.probabilities[s] * tmp[i];
    }
    normalize_sum(next);
    const double moved = total_variation(w, next);
    w.swap(next);
    if (moved < tol) break;
  }
  return w;
}

struct EquilibriumResult {
  MeasureCandidate candidate;
  double convergence_tv = 0.0;  // TV between lookahead n and n/2 estimates
  std::vector<std::string> warnings;
};

inline constexpr double kEquilibriumConvergenceTolerance = 1e-3;

namespace detail {

inline std::vector<double> conditional_density(const UlamModel& model,
                                               const std::vector<std::vector<double>>& weights,
                                               std::span<const int> past, std::span<const int> future) {
  std::vector<double> u(static_cast<std::size_t>(model.cells), 1.0 / model.cells);
  push_forward(model, weights, past, u);
  const auto h = pull_back_densities(model, weights, future);
  std::vector<double> mu(u.size());
  for (std::size_t i = 0; i < mu.size(); ++i) mu[i] = u[i] * h[0][i];
  if (!std::isfinite(normalize_sum(mu))) throw DomainError("equilibrium density vanished");
  return mu;
}

}  // namespace detail

// For each word, the density at time 0 is u ⊙ h with u the normalized forward
// product over n past symbols and h the normalized backward product over n
// future symbols; the candidate averages these over words. In the
// deterministic case this is the left/right eigenvector (Gibbs/Parry) product.
inline EquilibriumResult equilibrium_candidate(std::shared_ptr<const UlamModel> model, const BaseProcess& base,
                                               const Potential& phi, std::size_t words, int n,
                                               std::uint64_t seed, std::size_t workers = 1) {
  if (n < 10) throw DomainError("equilibrium lookahead must be at least 10");
  if (words < 1) throw DomainError("equilibrium needs at least one word");
  const UlamModel& m = *model;
  const auto weights = potential_weights(m, phi);
  const std::size_t runs = random_base(m, base) ? words : 1;
  const auto N = static_cast<std::size_t>(n), half = N / 2;
  struct Pair {
    std::vector<double> full, halved;
  };
  const auto per = parallel_map(runs, workers, [&](std::size_t k) {
    const auto word = sample_word(base, 2 * N, seed, k);
    const std::span<const int> all(word);
    Pair p;
    p.full = detail::conditional_density(m, weights, all.subspan(0, N), all.subspan(N, N));
    p.halved = detail::conditional_density(m, weights, all.subspan(N - half, half), all.subspan(N, half));
    return p;
  });
  std::vector<double> avg(static_cast<std::size_t>(m.cells), 0.0), avg_half(avg.size(), 0.0);
  for (const auto& p : per)
    for (std::size_t i = 0; i < avg.size(); ++i) {
      avg[i] += p.full[i] / static_cast<double>(runs);
      avg_half[i] += p.halved[i] / static_cast<double>(runs);
    }
  normalize_sum(avg);
  normalize_sum(avg_half);
  EquilibriumResult res;
  res.convergence_tv = total_variation(avg, avg_half);
  if (res.convergence_tv > kEquilibriumConvergenceTolerance)
    res.warnings.push_back("equilibrium density not converged: TV(n, n/2) = " + std::to_string(res.convergence_tv));
  res.candidate = make_ulam(std::move(model), std::move(avg), phi, n);
  res.candidate.label = "ulam-equilibrium(" + phi.describe() + ")";
  return res;
}

}  // namespace zoomrds
