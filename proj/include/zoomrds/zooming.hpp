#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "zoomrds/contraction.hpp"
#include "zoomrds/errors.hpp"
#include "zoomrds/random.hpp"
#include "zoomrds/system.hpp"

namespace zoomrds {

struct ZoomingConfig {
  ZoomingContraction contraction = ZoomingContraction::exponential(std::log(2.0));
  double delta = 0.1;
  int grid = 64;
  std::optional<double> pliss_margin;  // exponential kind; defaults to rate / 2
  bool certify = true;                 // grid-verify Pliss candidates at the margin rate

  double margin() const {
    if (pliss_margin) return *pliss_margin;
    return 0.5 * contraction.rate();
  }

  void validate(PhaseSpace phase) const {
    const double diameter = phase == PhaseSpace::circle ? 0.5 : 1.0;
    if (!(delta > 0.0) || delta > diameter)
      throw DomainError("zooming delta must lie in (0, " + std::to_string(diameter) + "]");
    if (grid < 8) throw DomainError("zooming grid resolution must be at least 8");
    if (contraction.is_exponential()) {
      const double m = margin();
      if (!(m > 0.0 && m < contraction.rate()))
        throw DomainError("pliss margin must lie in (0, rate)");
    }
  }
};

// Exponential contraction at the Pliss margin: the family Pliss-detected times
// are certified against.
inline ZoomingContraction pliss_contraction(const ZoomingConfig& cfg) {
  return ZoomingContraction::exponential(cfg.margin(), cfg.contraction.horizon());
}

enum class ZoomingFlag { zooming_like, non_zooming_like, unknown };

inline std::string to_string(ZoomingFlag f) {
  switch (f) {
    case ZoomingFlag::zooming_like: return "zooming-like";
    case ZoomingFlag::non_zooming_like: return "non-zooming-like";
    default: return "unknown";
  }
}

struct ZoomingReport {
  int length = 0;
  std::vector<int> times;                          // detected times in 1..length
  std::vector<std::pair<double, double>> preballs;  // pre-ball endpoints, one per time
  double frequency = 0.0;                          // #times / length
  double frequency_half = 0.0;                     // same over the first half of the horizon
  std::string method;                              // "pliss" or "direct"
  int near_misses = 0;
  std::vector<int> candidates;                     // Pliss times with an intact branch chain
  int uncertified = 0;                             // candidates rejected by grid verification
};

// Pulled-back ball, as offsets [lo[i], hi[i]] from the orbit point x_i.
struct PullBack {
  bool ok = false;
  int failed_level = -1;
  std::string failure;
  std::vector<double> lo, hi;
};

namespace detail {

// Affine map of the circle of constant integer slope, continuous on the
// circle: every lifted inverse branch extends across piece boundaries.
inline bool circle_covering(const FiberMap& f) {
  const auto& ps = f.pieces();
  if (!f.piecewise_affine()) return false;
  const double s = ps.front().slope;
  if (std::abs(s) < 1.0 || std::abs(s - std::round(s)) > 1e-12) return false;
  for (std::size_t k = 0; k < ps.size(); ++k) {
    if (ps[k].slope != s) return false;
    if (k + 1 < ps.size()) {
      const double gap = ps[k].intercept - ps[k + 1].intercept;
      if (std::abs(gap - std::round(gap)) > 1e-12) return false;
    }
  }
  return true;
}

struct LevelFrame {
  const Piece* piece;
  double x;
  double residual;
  bool extend;
  double range_lo, range_hi;
};

inline LevelFrame frame(const RandomSystem& sys, const OrbitRecord& orbit, int i) {
  const FiberMap& f = sys.fiber(orbit.word[static_cast<std::size_t>(i)]);
  const double x = orbit.points[static_cast<std::size_t>(i)];
  const Piece& p = f.piece_at(x);
  LevelFrame fr{&p, x, 0.0, false, 0.0, 0.0};
  fr.residual = orbit.points[static_cast<std::size_t>(i) + 1] - p.value(x);
  if (sys.phase() == PhaseSpace::circle) {
    fr.residual = wrap_signed(fr.residual);
    fr.extend = circle_covering(f);
  }
  if (fr.extend) {
    fr.range_lo = -std::numeric_limits<double>::infinity();
    fr.range_hi = std::numeric_limits<double>::infinity();
  } else {
    const double a = p.increment(x, p.lo - x), b = p.increment(x, p.hi - x);
    fr.range_lo = std::min(a, b);
    fr.range_hi = std::max(a, b);
  }
  return fr;
}

inline double offset_distance(PhaseSpace phase, double a, double b) {
  return distance(phase, a, b);
}

}  // namespace detail

inline constexpr double kBranchTolerance = 1e-12;

// Pulls B_delta(x_j) back along the orbit through the monotone branches
// containing x_{j-1}, ..., x_0.
inline PullBack pull_back(const RandomSystem& sys, const OrbitRecord& orbit, int j, double delta) {
  if (j < 1 || static_cast<std::size_t>(j) > orbit.length())
    throw DomainError("pull-back time outside the orbit");
  PullBack pb;
  pb.lo.assign(static_cast<std::size_t>(j) + 1, 0.0);
  pb.hi.assign(static_cast<std::size_t>(j) + 1, 0.0);
  const double xj = orbit.points[static_cast<std::size_t>(j)];
  if (sys.phase() == PhaseSpace::circle) {
    pb.lo[j] = -delta;
    pb.hi[j] = delta;
  } else {
    pb.lo[j] = std::max(-delta, -xj);
    pb.hi[j] = std::min(delta, 1.0 - xj);
  }
  for (int i = j - 1; i >= 0; --i) {
    const auto fr = detail::frame(sys, orbit, i);
    double ta = pb.lo[i + 1] + fr.residual, tb = pb.hi[i + 1] + fr.residual;
    if (ta < fr.range_lo - kBranchTolerance || tb > fr.range_hi + kBranchTolerance) {
      pb.failed_level = i;
      pb.failure = "ball at level " + std::to_string(i + 1) +
                   " exceeds the image of the monotone branch at level " + std::to_string(i);
      return pb;
    }
    ta = std::clamp(ta, fr.range_lo, fr.range_hi);
    tb = std::clamp(tb, fr.range_lo, fr.range_hi);
    const auto sa = fr.piece->local_inverse(fr.x, ta, fr.extend);
    const auto sb = fr.piece->local_inverse(fr.x, tb, fr.extend);
    if (!sa || !sb) {
      pb.failed_level = i;
      pb.failure = "no inverse branch at level " + std::to_string(i);
      return pb;
    }
    pb.lo[i] = std::min(*sa, *sb);
    pb.hi[i] = std::max(*sa, *sb);
    const FiberMap& f = sys.fiber(orbit.word[static_cast<std::size_t>(i)]);
    for (double c : f.critical_points()) {
      if (fr.x + pb.lo[i] < c && c < fr.x + pb.hi[i]) {
        pb.failed_level = i;
        pb.failure = "critical point inside the pre-ball at level " + std::to_string(i);
        return pb;
      }
    }
  }
  pb.ok = true;
  return pb;
}

struct Verdict {
  bool passed = false;
  bool condition_i_failed = false;
  bool near_miss = false;
  double worst_ratio = 0.0;
  std::pair<double, double> preball{0.0, 0.0};
  std::string message;
};

inline constexpr double kRatioSlack = 1e-6;

// Checks condition (ii) on a grid of the pulled-back ball against `contraction`.
inline Verdict verify_time(const RandomSystem& sys, const OrbitRecord& orbit, int j,
                           const ZoomingConfig& cfg, const ZoomingContraction& contraction) {
  Verdict v;
  const PullBack pb = pull_back(sys, orbit, j, cfg.delta);
  if (!pb.ok) {
    v.condition_i_failed = true;
    v.message = pb.failure;
    return v;
  }
  v.preball = {orbit.points[0] + pb.lo[0], orbit.points[0] + pb.hi[0]};

  const int g = cfg.grid;
  const auto ju = static_cast<std::size_t>(j);
  std::vector<std::vector<double>> pts(ju + 1, std::vector<double>(static_cast<std::size_t>(g)));
  for (int k = 0; k < g; ++k)
    pts[ju][k] = pb.lo[ju] + (pb.hi[ju] - pb.lo[ju]) * static_cast<double>(k) / (g - 1);
  for (int i = j - 1; i >= 0; --i) {
    const auto fr = detail::frame(sys, orbit, i);
    for (int k = 0; k < g; ++k) {
      const double t = std::clamp(pts[i + 1][k] + fr.residual, fr.range_lo, fr.range_hi);
      const auto s = fr.piece->local_inverse(fr.x, t, fr.extend);
      pts[i][k] = s ? std::clamp(*s, pb.lo[i], pb.hi[i]) : (t < 0 ? pb.lo[i] : pb.hi[i]);
    }
  }

  std::vector<int> levels;
  if (j <= 100) {
    for (int i = 0; i < j; ++i) levels.push_back(i);
  } else {
    for (int q = 0; q < 100; ++q) levels.push_back(static_cast<int>(std::llround(q * (j - 1) / 99.0)));
    levels.erase(std::unique(levels.begin(), levels.end()), levels.end());
  }

  const PhaseSpace phase = sys.phase();
  // For alpha linear in r on an ordered chain, every pair distance is a sum of
  // adjacent gaps, so the worst pair ratio is attained by an adjacent pair.
  const bool adjacent_only =
      contraction.linear_in_r() && (phase == PhaseSpace::interval || 2.0 * cfg.delta <= 0.5);
  double worst = 0.0;
  auto consider = [&](int i, int a, int b) {
    const double dj = detail::offset_distance(phase, pts[ju][a], pts[ju][b]);
    if (dj == 0.0) return;
    const double di = detail::offset_distance(phase, pts[i][a], pts[i][b]);
    const double bound = evaluate(contraction, j - i, dj);
    const double ratio =
        bound > 0.0 ? di / bound : (di == 0.0 ? 0.0 : std::numeric_limits<double>::infinity());
    worst = std::max(worst, ratio);
  };
  for (int i : levels) {
    if (adjacent_only) {
      for (int a = 0; a + 1 < g; ++a) consider(i, a, a + 1);
    } else {
      for (int a = 0; a < g; ++a)
        for (int b = a + 1; b < g; ++b) consider(i, a, b);
    }
  }
  v.worst_ratio = worst;
  v.passed = worst <= 1.0 + kRatioSlack;
  v.near_miss = worst > 1.0 && v.passed;
  if (!v.passed) v.message = "condition (ii) violated";
  return v;
}

inline Verdict verify_time(const RandomSystem& sys, const OrbitRecord& orbit, int j,
                           const ZoomingConfig& cfg) {
  return verify_time(sys, orbit, j, cfg, cfg.contraction);
}

// Exponential kind: Pliss scan on log-derivative sums plus the branch-chain
// check, then (with cfg.certify) grid verification at the margin rate.
// Other kinds: direct grid verification of every time.
inline ZoomingReport detect_times(const RandomSystem& sys, const OrbitRecord& orbit,
                                  const ZoomingConfig& cfg) {
  cfg.validate(sys.phase());
  ZoomingReport rep;
  rep.length = static_cast<int>(orbit.length());
  rep.method = cfg.contraction.is_exponential() ? "pliss" : "direct";
  if (orbit.points.size() < 2) return rep;
  const int n = rep.length;

  auto accept = [&](int j, const std::pair<double, double>& ball) {
    rep.times.push_back(j);
    rep.preballs.push_back(ball);
  };

  if (cfg.contraction.is_exponential()) {
    const double margin = cfg.margin();
    const ZoomingContraction certifier = pliss_contraction(cfg);
    double g = 0.0, best_prefix = 0.0;
    bool poisoned = false;
    for (int j = 1; j <= n; ++j) {
      const auto& ld = orbit.log_derivs[static_cast<std::size_t>(j) - 1];
      if (!ld) poisoned = true;
      if (poisoned) continue;
      g += *ld - margin;
      // every suffix sum over [m, j) is >= 0 iff G_j >= max_{m<j} G_m
      const bool pliss = g >= best_prefix;
      best_prefix = std::max(best_prefix, g);
      if (!pliss) continue;
      const PullBack pb = pull_back(sys, orbit, j, cfg.delta);
      if (!pb.ok) continue;
      rep.candidates.push_back(j);
      if (cfg.certify) {
        const Verdict v = verify_time(sys, orbit, j, cfg, certifier);
        if (v.near_miss) ++rep.near_misses;
        if (!v.passed) {
          ++rep.uncertified;
          continue;
        }
      }
      accept(j, {orbit.points[0] + pb.lo[0], orbit.points[0] + pb.hi[0]});
    }
  } else {
    for (int j = 1; j <= n; ++j) {
      const Verdict v = verify_time(sys, orbit, j, cfg);
      if (v.near_miss) ++rep.near_misses;
      if (v.passed) accept(j, v.preball);
    }
  }
  rep.frequency = static_cast<double>(rep.times.size()) / n;
  const int half = std::max(1, n / 2);
  const auto in_half = std::count_if(rep.times.begin(), rep.times.end(), [&](int t) { return t <= half; });
  rep.frequency_half = static_cast<double>(in_half) / half;
  return rep;
}

inline double frequency(const ZoomingReport& report) { return report.frequency; }

inline ZoomingFlag classify_report(const ZoomingReport& report, double threshold) {
  return report.frequency >= threshold ? ZoomingFlag::zooming_like : ZoomingFlag::non_zooming_like;
}

inline ZoomingFlag classify_point(const RandomSystem& sys, double x0, std::span<const int> word,
                                  const ZoomingConfig& cfg, double threshold,
                                  const IterateOptions& options = {kRoundoffRefresh, 0}) {
  if (!(threshold > 0.0 && threshold < 1.0)) throw DomainError("threshold must lie in (0, 1)");
  const OrbitRecord orbit = iterate(sys, x0, word, nullptr, options);
  return classify_report(detect_times(sys, orbit, cfg), threshold);
}

struct EnsembleEntry {
  double x0 = 0.0;
  double frequency = 0.0;
  double frequency_half = 0.0;
  ZoomingFlag flag = ZoomingFlag::unknown;
  int pliss_checked = 0;      // detected times re-verified at the Pliss margin
  int pliss_failures = 0;
  double pliss_worst_ratio = 0.0;
};

struct EnsembleSettings {
  std::size_t points = 100;
  std::size_t length = 200;
  double threshold = 0.05;
  bool verify_pliss = true;
  std::size_t workers = 1;
};

// Classifies `points` seeded initial points with seeded words. Task i uses
// derive_seed(seed, i) for its point and word and a further derived seed for
// roundoff refresh.
inline std::vector<EnsembleEntry> classify_ensemble(const RandomSystem& sys, const ZoomingConfig& cfg,
                                                    const EnsembleSettings& settings,
                                                    std::uint64_t seed) {
  cfg.validate(sys.phase());
  return parallel_map(settings.points, settings.workers, [&](std::size_t i) {
    const std::uint64_t task = derive_seed(seed, i);
    Rng rng(task);
    EnsembleEntry e;
    e.x0 = rng.uniform();
    const auto word = sample_word(sys.base(), settings.length, task, 0);
    const OrbitRecord orbit =
        iterate(sys, e.x0, word, nullptr, IterateOptions{kRoundoffRefresh, derive_seed(task, 1)});
    const ZoomingReport rep = detect_times(sys, orbit, cfg);
    e.frequency = rep.frequency;
    e.frequency_half = rep.frequency_half;
    e.flag = classify_report(rep, settings.threshold);
    if (settings.verify_pliss && cfg.contraction.is_exponential()) {
      const auto pc = pliss_contraction(cfg);
      for (int t : rep.times) {
        const Verdict v = verify_time(sys, orbit, t, cfg, pc);
        ++e.pliss_checked;
        if (!v.passed) ++e.pliss_failures;
        e.pliss_worst_ratio = std::max(e.pliss_worst_ratio, v.worst_ratio);
      }
    }
    return e;
  });
}

inline constexpr double kDistanceFloor = 1e-300;

// (1/n) sum_{j<n} -log dist_delta(x_j, C).
inline double slow_approach_statistic(const OrbitRecord& orbit, std::span<const double> critical,
                                      double delta, PhaseSpace phase = PhaseSpace::interval) {
  const std::size_t n = orbit.length();
  if (n == 0) return 0.0;
  CompensatedSum sum;
  for (std::size_t j = 0; j < n; ++j)
    sum.add(-std::log(std::max(truncated_distance(orbit.points[j], critical, delta, phase), kDistanceFloor)));
  return sum.value() / static_cast<double>(n);
}

// First j in 1..horizon with d(f^j x, f^j y) > epsilon along the shared word.
inline std::optional<int> separation_time(const RandomSystem& sys, double x, double y,
                                          std::span<const int> word, double epsilon) {
  for (std::size_t j = 0; j < word.size(); ++j) {
    x = sys.apply(word[j], x);
    y = sys.apply(word[j], y);
    if (sys.distance(x, y) > epsilon) return static_cast<int>(j) + 1;
  }
  return std::nullopt;
}

struct ExpansivityReport {
  std::size_t pairs = 0;
  std::size_t degenerate = 0;
  std::size_t separated = 0;
  double fraction = 0.0;              // separated / non-degenerate pairs
  std::vector<int> first_times;       // -1 when the pair never separated
  int max_time = 0;
};

inline ExpansivityReport expansivity_check(const RandomSystem& sys, std::size_t pairs,
                                           double epsilon, int horizon, std::uint64_t seed,
                                           double max_distance, std::size_t workers = 1) {
  if (!(epsilon > 0.0) || horizon < 1) throw DomainError("expansivity needs epsilon > 0 and horizon >= 1");
  if (!(max_distance > 0.0) || max_distance > epsilon)
    throw DomainError("initial pair distance must lie in (0, epsilon]");
  struct PairResult {
    bool degenerate = false;
    int time = -1;
  };
  const auto results = parallel_map(pairs, workers, [&](std::size_t i) {
    const std::uint64_t task = derive_seed(seed, i);
    Rng rng(task);
    const double x = rng.uniform();
    double y = x + max_distance * rng.uniform_open0();
    if (sys.phase() == PhaseSpace::circle)
      y = wrap_unit(y);
    else if (y > 1.0)
      y = x - (y - x);
    PairResult r;
    if (x == y || y < 0.0) {
      r.degenerate = true;
      return r;
    }
    const auto word = sample_word(sys.base(), static_cast<std::size_t>(horizon), task, 1);
    if (auto t = separation_time(sys, x, y, word, epsilon)) r.time = *t;
    return r;
  });
  ExpansivityReport rep;
  rep.pairs = pairs;
  for (const auto& r : results) {
    if (r.degenerate) {
      ++rep.degenerate;
      continue;
    }
    rep.first_times.push_back(r.time);
    if (r.time > 0) {
      ++rep.separated;
      rep.max_time = std::max(rep.max_time, r.time);
    }
  }
  const std::size_t valid = rep.pairs - rep.degenerate;
  rep.fraction = valid ? static_cast<double>(rep.separated) / valid : 0.0;
  return rep;
}

}  // namespace zoomrds
