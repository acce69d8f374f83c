#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <map>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "zoomrds/errors.hpp"
#include "zoomrds/measures.hpp"
#include "zoomrds/potential.hpp"
#include "zoomrds/random.hpp"
#include "zoomrds/system.hpp"

namespace zoomrds {

inline constexpr double kNegInf = -std::numeric_limits<double>::infinity();
inline constexpr double kPosInf = std::numeric_limits<double>::infinity();

inline double log_sum_exp(std::span<const double> v) {
  if (v.empty()) return kNegInf;
  const double m = *std::max_element(v.begin(), v.end());
  if (!std::isfinite(m)) return m;
  CompensatedSum s;
  for (double x : v) s.add(std::exp(x - m));
  return m + std::log(s.value());
}

namespace detail {

// Square grid of buckets of side >= eps over (x, y) in [0,1]^2 with
// most-recent-first linked lists; two points within eps in both coordinates
// lie in neighboring buckets.
class BucketGrid {
 public:
  BucketGrid(double eps, PhaseSpace phase)
      : side_(std::max(1, static_cast<int>(std::floor(1.0 / eps)))), phase_(phase),
        head_(static_cast<std::size_t>(side_) * side_, -1) {}

  int cell(double x) const { return std::clamp(static_cast<int>(std::floor(x * side_)), 0, side_ - 1); }

  void insert(int id, double x, double y) {
    const std::size_t b = bucket(cell(x), cell(y));
    if (next_.size() <= static_cast<std::size_t>(id)) next_.resize(static_cast<std::size_t>(id) + 1, -1);
    next_[id] = head_[b];
    head_[b] = id;
  }

  // Calls fn(id) for every stored id near (x, y) until fn returns false.
  template <class Fn>
  void visit(double x, double y, Fn fn) const {
    const auto xs = neighbors(cell(x)), ys = neighbors(cell(y));
    for (int a : xs) {
      if (a < 0) continue;
      for (int b : ys) {
        if (b < 0) continue;
        for (int id = head_[bucket(a, b)]; id >= 0; id = next_[id])
          if (!fn(id)) return;
      }
    }
  }

 private:
  std::size_t bucket(int a, int b) const { return static_cast<std::size_t>(a) * side_ + b; }

  std::array<int, 3> neighbors(int c) const {
    std::array<int, 3> out{c - 1, c, c + 1};
    for (int& v : out) {
      if (phase_ == PhaseSpace::circle)
        v = (v + side_) % side_;
      else if (v < 0 || v >= side_)
        v = -1;
    }
    if (out[0] == out[1]) out[0] = -1;
    if (out[2] == out[1] || out[2] == out[0]) out[2] = -1;
    return out;
  }

  int side_;
  PhaseSpace phase_;
  std::vector<int> head_;
  std::vector<int> next_;
};

}  // namespace detail

struct SeparatedResult {
  double value = 0.0;  // log sum over the selected set of exp(S_n phi)
  std::size_t selected = 0;
};

// Greedy maximal (w, n, eps)-separated set among the grid points (k + 1/2)/M,
// visited by descending S_n phi with ties broken by grid index.
inline SeparatedResult separated_pressure(const RandomSystem& sys, const Potential& phi, int n, double eps,
                                          std::span<const int> word, std::size_t grid) {
  if (n < 1) throw DomainError("separated sets need n >= 1");
  if (word.size() < static_cast<std::size_t>(n)) throw DomainError("word shorter than n");
  if (!(eps > 0.0)) throw DomainError("eps must be positive");
  if (!(eps > 4.0 / static_cast<double>(grid)))
    throw ResolutionError("grid spacing 1/" + std::to_string(grid) + " too coarse for eps = " + std::to_string(eps));
  const auto nu = static_cast<std::size_t>(n);
  auto point = [&](std::size_t k) { return (static_cast<double>(k) + 0.5) / static_cast<double>(grid); };
  auto orbit_of = [&](const Potential& f, double x, std::span<double> out) {
    double s = 0.0;
    for (std::size_t j = 0; j < nu; ++j) {
      out[j] = x;
      s += f(word[j], x);
      if (j + 1 < nu) x = sys.apply(word[j], x);
    }
    return s;
  };

  std::vector<std::uint32_t> order;
  std::vector<double> sums;
  std::vector<double> buf(nu);
  const bool flat = phi.point_independent();
  if (!flat) {
    // ordered without the constant part so that phi + c visits points identically
    const Potential shape = phi.shifted(-phi.offset());
    sums.resize(grid);
    for (std::size_t k = 0; k < grid; ++k) sums[k] = orbit_of(shape, point(k), buf);
    order.resize(grid);
    std::iota(order.begin(), order.end(), 0u);
    std::stable_sort(order.begin(), order.end(), [&](std::uint32_t a, std::uint32_t b) { return sums[a] > sums[b]; });
  }

  detail::BucketGrid buckets(eps, sys.phase());
  std::vector<double> orbits;  // selected orbits, n per point
  std::vector<double> selected_sums;
  for (std::size_t r = 0; r < grid; ++r) {
    const std::size_t k = flat ? r : order[r];
    const double s = orbit_of(phi, point(k), buf);
    bool separated = true;
    buckets.visit(buf[0], buf[nu - 1], [&](int id) {
      const double* y = orbits.data() + static_cast<std::size_t>(id) * nu;
      for (std::size_t j = 0; j < nu; ++j)
        if (sys.distance(buf[j], y[j]) > eps) return true;
      separated = false;
      return false;
    });
    if (!separated) continue;
    const int id = static_cast<int>(selected_sums.size());
    orbits.insert(orbits.end(), buf.begin(), buf.end());
    selected_sums.push_back(s);
    buckets.insert(id, buf[0], buf[nu - 1]);
  }
  return SeparatedResult{log_sum_exp(selected_sums), selected_sums.size()};
}

struct PressureSettings {
  std::vector<double> eps{0.0625, 0.03125, 0.015625, 0.0078125, 0.00390625};
  std::vector<int> n{4, 6, 8, 10, 12};
  std::size_t words = 50;
  std::size_t grid = std::size_t{1} << 23;
  std::size_t workers = 1;

  void validate() const {
    if (eps.empty() || n.empty()) throw DomainError("pressure schedules must be non-empty");
    for (std::size_t i = 1; i < eps.size(); ++i)
      if (!(eps[i] < eps[i - 1])) throw DomainError("eps schedule must decrease");
    for (std::size_t i = 1; i < n.size(); ++i)
      if (!(n[i] > n[i - 1])) throw DomainError("n schedule must increase");
    if (n.front() < 1) throw DomainError("n schedule must be positive");
    if (words < 1) throw DomainError("pressure needs at least one base word");
  }
};

struct PressureCell {
  int n = 0;
  double eps = 0.0;
  double mean = 0.0;            // mean over words of (1/n) log P(w, n, eps)
  double standard_error = 0.0;
  double mean_selected = 0.0;
};

struct PressureEstimate {
  double value = 0.0;
  double standard_error = 0.0;
  int n_used = 0;
  double eps_used = 0.0;
  std::size_t samples = 0;
  std::vector<PressureCell> table;
  std::vector<double> per_word;  // per-word slope readings
  std::vector<std::string> warnings;
};

// Per word, the value is the slope of log P(w, n, eps) between the two largest
// n at the smallest eps; the estimate is the mean over words. Identical words
// are evaluated once.
inline PressureEstimate pressure_estimate(const RandomSystem& sys, const Potential& phi,
                                          const PressureSettings& settings, std::uint64_t seed) {
  settings.validate();
  const int n_max = settings.n.back();
  const auto words = sample_base(sys.base(), static_cast<std::size_t>(n_max), settings.words, seed);

  // distinct (prefix, eps) tasks
  struct Task {
    std::vector<int> prefix;
    double eps;
    int n;
  };
  std::vector<Task> tasks;
  std::map<std::pair<std::vector<int>, double>, std::size_t> index;
  std::vector<std::vector<std::vector<std::size_t>>> lookup(
      settings.eps.size(), std::vector<std::vector<std::size_t>>(settings.n.size()));
  for (std::size_t e = 0; e < settings.eps.size(); ++e)
    for (std::size_t q = 0; q < settings.n.size(); ++q)
      for (const auto& w : words) {
        std::vector<int> prefix(w.begin(), w.begin() + settings.n[q]);
        auto key = std::make_pair(prefix, settings.eps[e]);
        auto it = index.find(key);
        if (it == index.end()) {
          it = index.emplace(key, tasks.size()).first;
          tasks.push_back(Task{std::move(prefix), settings.eps[e], settings.n[q]});
        }
        lookup[e][q].push_back(it->second);
      }
  const auto results = parallel_map(tasks.size(), settings.workers, [&](std::size_t t) {
    return separated_pressure(sys, phi, tasks[t].n, tasks[t].eps, tasks[t].prefix, settings.grid);
  });

  PressureEstimate est;
  est.samples = words.size();
  for (std::size_t e = 0; e < settings.eps.size(); ++e)
    for (std::size_t q = 0; q < settings.n.size(); ++q) {
      std::vector<double> vals, counts;
      for (std::size_t id : lookup[e][q]) {
        vals.push_back(results[id].value / settings.n[q]);
        counts.push_back(static_cast<double>(results[id].selected));
      }
      const auto me = mean_and_error(vals);
      est.table.push_back(PressureCell{settings.n[q], settings.eps[e], me.mean, me.standard_error,
                                       mean_and_error(counts).mean});
    }

  const std::size_t e = settings.eps.size() - 1;
  est.eps_used = settings.eps[e];
  est.n_used = n_max;
  const std::size_t Q = settings.n.size();
  auto slope_between = [&](std::size_t q0, std::size_t q1) {
    std::vector<double> s;
    for (std::size_t k = 0; k < words.size(); ++k) {
      const double a = results[lookup[e][q0][k]].value, b = results[lookup[e][q1][k]].value;
      s.push_back((b - a) / (settings.n[q1] - settings.n[q0]));
    }
    return s;
  };
  if (Q == 1) {
    for (std::size_t k = 0; k < words.size(); ++k) est.per_word.push_back(results[lookup[e][0][k]].value / n_max);
  } else {
    est.per_word = slope_between(Q - 2, Q - 1);
  }
  const auto me = mean_and_error(est.per_word);
  est.value = me.mean;
  est.standard_error = me.standard_error;
  if (Q >= 3) {
    const auto prev = mean_and_error(slope_between(Q - 3, Q - 2));
    const double tol = std::max(0.05, 3.0 * std::hypot(me.standard_error, prev.standard_error));
    if (std::abs(prev.mean - me.mean) > tol)
      est.warnings.push_back("pressure slope not stabilized in n: " + std::to_string(prev.mean) + " vs " +
                             std::to_string(me.mean));
  }
  return est;
}

using Classifier = std::function<bool(double, std::span<const int>)>;

struct CaratheodorySettings {
  double eps = 0.0625;
  int n_min = 2;
  int n_cap = 12;
  std::size_t points = std::size_t{1} << 16;
  std::size_t words = 20;
  double min_points_per_ball = 16.0;
  std::size_t word_length = 0;  // symbols handed to the classifier; at least n_cap + 1
  std::size_t workers = 1;
};

struct CaratheodoryEstimate {
  double value = 0.0;  // -inf when the classified set is empty
  double standard_error = 0.0;
  std::vector<double> per_word;
  std::vector<int> level_hi;  // per word
  std::size_t in_points = 0;  // summed over words
  bool empty = false;
  std::vector<std::string> warnings;
};

namespace detail {

struct CoverLevel {
  int n = 0;
  std::vector<double> sums;  // S_n phi of the ball centers
};

// Greedy cover of the points by dynamic balls B(x, n, eps) = {y : d(f^j x, f^j y) < eps, 0 <= j <= n},
// centers taken in index order.
inline CoverLevel greedy_cover(const RandomSystem& sys, const std::vector<std::vector<double>>& orbits,
                               const std::vector<std::vector<double>>& prefix_sums, int n, double eps) {
  const std::size_t count = orbits.size();
  BucketGrid buckets(eps, sys.phase());
  for (std::size_t k = 0; k < count; ++k) buckets.insert(static_cast<int>(k), orbits[k][0], orbits[k][n]);
  std::vector<char> covered(count, 0);
  CoverLevel level{n, {}};
  for (std::size_t c = 0; c < count; ++c) {
    if (covered[c]) continue;
    covered[c] = 1;
    level.sums.push_back(prefix_sums[c][n]);
    const auto& x = orbits[c];
    buckets.visit(x[0], x[n], [&](int id) {
      if (covered[id]) return true;
      const auto& y = orbits[id];
      for (int j = 0; j <= n; ++j)
        if (!(sys.distance(x[j], y[j]) < eps)) return true;
      covered[id] = 1;
      return true;
    });
  }
  return level;
}

struct WordCrossing {
  double beta = kNegInf;
  int level_hi = 0;
  std::size_t in = 0;
  std::vector<std::string> warnings;
};

inline void validate(const CaratheodorySettings& cs) {
  if (cs.n_min < 1 || cs.n_cap <= cs.n_min) throw DomainError("Caratheodory levels need 1 <= n_min < n_cap");
  if (cs.points < 2 || cs.words < 1) throw DomainError("Caratheodory needs points and words");
}

inline std::size_t caratheodory_runs(const RandomSystem& sys, const CaratheodorySettings& cs) {
  return sys.alphabet() > 1 && sys.base().explicit_word.empty() ? cs.words : 1;
}

inline std::vector<int> caratheodory_word(const RandomSystem& sys, const CaratheodorySettings& cs,
                                          std::uint64_t seed, std::size_t k) {
  return sample_word(sys.base(), std::max(cs.word_length, static_cast<std::size_t>(cs.n_cap) + 1), seed, k);
}

inline double grid_point(const CaratheodorySettings& cs, std::size_t p) {
  return (static_cast<double>(p) + 0.5) / static_cast<double>(cs.points);
}

// beta-crossing for the grid points with mask[p] set, along one word.
inline WordCrossing word_crossing(const RandomSystem& sys, const Potential& phi, const CaratheodorySettings& cs,
                                  std::span<const int> word, const std::vector<char>& mask) {
  WordCrossing r;
  std::vector<std::vector<double>> orbits, sums;
  for (std::size_t p = 0; p < cs.points; ++p) {
    if (!mask[p]) continue;
    std::vector<double> orb(static_cast<std::size_t>(cs.n_cap) + 1), s(orb.size());
    double x = grid_point(cs, p), acc = 0.0;
    for (int j = 0; j <= cs.n_cap; ++j) {
      orb[j] = x;
      s[j] = acc;
      acc += phi(word[j], x);
      x = sys.apply(word[j], x);
    }
    orbits.push_back(std::move(orb));
    sums.push_back(std::move(s));
  }
  r.in = orbits.size();
  if (orbits.empty()) return r;
  const auto lo = greedy_cover(sys, orbits, sums, cs.n_min, cs.eps);
  CoverLevel hi;
  for (int n = cs.n_min + 1; n <= cs.n_cap; ++n) {
    auto level = greedy_cover(sys, orbits, sums, n, cs.eps);
    if (static_cast<double>(orbits.size()) < cs.min_points_per_ball * static_cast<double>(level.sums.size())) {
      if (hi.n == 0) {
        hi = std::move(level);
        r.warnings.push_back("no admissible cover level above n_min; resolution too coarse");
      }
      break;
    }
    hi = std::move(level);
  }
  r.level_hi = hi.n;
  // Every ball of a level has the same length, so log R(beta) is affine in beta
  // with slope -(n_hi - n_lo) and the crossing R = 1 has a closed form.
  r.beta = (log_sum_exp(hi.sums) - log_sum_exp(lo.sums)) / static_cast<double>(hi.n - lo.n);
  return r;
}

inline CaratheodoryEstimate aggregate(std::vector<WordCrossing> per, std::size_t words) {
  if (per.size() == 1) per.assign(words, per[0]);
  CaratheodoryEstimate est;
  std::vector<double> finite;
  for (auto& r : per) {
    est.in_points += r.in;
    est.level_hi.push_back(r.level_hi);
    est.per_word.push_back(r.beta);
    if (r.in > 0) finite.push_back(r.beta);
    for (auto& w : r.warnings)
      if (std::find(est.warnings.begin(), est.warnings.end(), w) == est.warnings.end()) est.warnings.push_back(w);
  }
  if (finite.empty()) {
    est.empty = true;
    est.value = kNegInf;
    return est;
  }
  const auto me = mean_and_error(finite);
  est.value = me.mean;
  est.standard_error = me.standard_error;
  return est;
}

}  // namespace detail

// Restricted pressure of the classified set. Per word, the points classified
// "in" are covered greedily by dynamic balls at a low level n_lo = n_min and at
// the largest admissible level n_hi <= n_cap (at least `min_points_per_ball`
// points per ball). The estimate is the beta at which the normalized weighted
// sum sum exp(S phi - beta n_hi) / sum exp(S phi - beta n_lo) crosses 1,
// found by bisection; the result is averaged over words.
inline CaratheodoryEstimate caratheodory_pressure(const RandomSystem& sys, const Potential& phi,
                                                  const Classifier& classifier, const CaratheodorySettings& cs,
                                                  std::uint64_t seed) {
  detail::validate(cs);
  auto per = parallel_map(detail::caratheodory_runs(sys, cs), cs.workers, [&](std::size_t k) {
    const auto word = detail::caratheodory_word(sys, cs, seed, k);
    std::vector<char> mask(cs.points);
    for (std::size_t p = 0; p < cs.points; ++p) mask[p] = classifier(detail::grid_point(cs, p), word) ? 1 : 0;
    return detail::word_crossing(sys, phi, cs, word, mask);
  });
  return detail::aggregate(std::move(per), cs.words);
}

inline Classifier full_set() {
  return [](double, std::span<const int>) { return true; };
}
inline Classifier empty_set() {
  return [](double, std::span<const int>) { return false; };
}

struct EntropySettings {
  int cells = 64;
  int depth = 12;
  std::size_t samples = 20;
  std::size_t workers = 1;
};

struct VariationalEntry {
  std::string label;
  std::string kind;
  ZoomingFlag flag = ZoomingFlag::unknown;
  double entropy = 0.0;
  double integral = 0.0;
  double value = 0.0;  // entropy + integral
};

struct VariationalReport {
  std::vector<VariationalEntry> entries;
  double pressure = 0.0;
  double tolerance = 0.0;
  std::size_t best = 0;
  double best_gap = 0.0;    // pressure - best value
  double max_excess = 0.0;  // max over candidates of value - pressure
  bool passed = false;
};

inline VariationalEntry evaluate_candidate(const MeasureCandidate& m, const RandomSystem& sys, const Potential& phi,
                                           const EntropySettings& es, std::uint64_t seed) {
  VariationalEntry e;
  e.label = m.label;
  e.kind = to_string(m.kind);
  e.flag = m.flag;
  const int cells = m.kind == MeasureCandidate::Kind::ulam ? m.model->cells : es.cells;
  e.entropy = entropy_estimate(m, sys, cells, es.depth, es.samples, seed, es.workers).value;
  e.integral = birkhoff_integral(m, phi);
  e.value = e.entropy + e.integral;
  return e;
}

// Pass iff every candidate's entropy + integral is at most pressure + tol and
// the best candidate is within `gap_tolerance` of the pressure.
inline VariationalReport variational_check(const RandomSystem& sys, const Potential& phi,
                                           const std::vector<MeasureCandidate>& candidates, double pressure,
                                           double tol, double gap_tolerance, const EntropySettings& es,
                                           std::uint64_t seed) {
  if (candidates.empty()) throw DomainError("variational check needs at least one candidate");
  VariationalReport rep;
  rep.pressure = pressure;
  rep.tolerance = tol;
  rep.max_excess = kNegInf;
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    rep.entries.push_back(evaluate_candidate(candidates[i], sys, phi, es, derive_seed(seed, i)));
    if (rep.entries[i].value > rep.entries[rep.best].value) rep.best = i;
    rep.max_excess = std::max(rep.max_excess, rep.entries[i].value - pressure);
  }
  rep.best_gap = pressure - rep.entries[rep.best].value;
  rep.passed = rep.max_excess <= tol && rep.best_gap <= gap_tolerance;
  return rep;
}

}  // namespace zoomrds
