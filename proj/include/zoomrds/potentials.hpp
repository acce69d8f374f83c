#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "zoomrds/errors.hpp"
#include "zoomrds/measures.hpp"
#include "zoomrds/potential.hpp"
#include "zoomrds/pressure.hpp"
#include "zoomrds/random.hpp"
#include "zoomrds/system.hpp"
#include "zoomrds/zooming.hpp"

namespace zoomrds {

struct FixedPointPotential {
  Potential potential;  // k times the unit bump
  double k = 0.0;
  double gap = 0.0;         // 1 - sup over the family of the unit-bump integral
  double family_sup = 0.0;
  double h_top = 0.0;
};

// Unit tent bump at a common fixed point x0, scaled by
// k = (2 h_top + 1) / (1 - sup_nu integral(bump) d nu) over the given
// non-zooming family (sup taken as 0 for an empty family).
inline FixedPointPotential construct_fixed_point_potential(const RandomSystem& sys, double x0, double rho,
                                                           double h_top,
                                                           const std::vector<MeasureCandidate>& non_zooming,
                                                           std::optional<int> symbol = {}) {
  if (!(rho > 0.0)) throw DomainError("bump radius must be positive");
  if (!(h_top >= 0.0) || !std::isfinite(h_top)) throw DomainError("entropy estimate must be finite and >= 0");
  for (std::size_t s = 0; s < sys.alphabet(); ++s) {
    if (symbol && static_cast<int>(s) != *symbol) continue;
    const double y = sys.apply(static_cast<int>(s), x0);
    if (sys.distance(y, x0) > kFixedPointTolerance)
      throw PreconditionError("x0 = " + std::to_string(x0) + " is not fixed by symbol " + std::to_string(s));
  }
  FixedPointPotential out;
  out.h_top = h_top;
  const Potential unit = Potential::bump(x0, rho, 1.0, sys.phase());
  for (const auto& m : non_zooming) out.family_sup = std::max(out.family_sup, birkhoff_integral(m, unit));
  out.gap = 1.0 - out.family_sup;
  if (!(out.gap > 0.0))
    throw PreconditionError("a non-zooming candidate integrates the bump to its maximum; no k separates the families");
  out.k = (2.0 * h_top + 1.0) / out.gap;
  out.potential = unit.scaled(out.k);
  return out;
}

// Flags a candidate from the zooming frequency of orbits started at its atoms.
// Ulam candidates sample `points` start points from their cell weights and are
// zooming-like (non-zooming-like) when at least (at most) `agreement`
// (1 - `agreement`) of them are; otherwise unknown.
struct FlagSettings {
  ZoomingConfig zooming;
  double threshold = 0.05;
  std::size_t length = 200;
  std::size_t points = 32;
  double agreement = 0.9;
};

inline ZoomingFlag flag_candidate(const RandomSystem& sys, const MeasureCandidate& m, const FlagSettings& fs,
                                  std::uint64_t seed) {
  const IterateOptions noise{kRoundoffRefresh, derive_seed(seed, 0)};
  switch (m.kind) {
    case MeasureCandidate::Kind::dirac: {
      auto word = sample_word(sys.base(), fs.length, seed, 1);
      if (m.symbol) std::fill(word.begin(), word.end(), *m.symbol);
      return classify_point(sys, m.points[0], word, fs.zooming, fs.threshold, noise);
    }
    case MeasureCandidate::Kind::periodic: {
      std::vector<int> word(fs.length);
      for (std::size_t t = 0; t < fs.length; ++t) word[t] = m.word[t % m.word.size()];
      return classify_point(sys, m.points[0], word, fs.zooming, fs.threshold, noise);
    }
    case MeasureCandidate::Kind::empirical: {
      const std::span<const int> word(m.word.data() + m.first, m.word.size() - m.first);
      return classify_point(sys, m.points[m.first], word.subspan(0, std::min(word.size(), fs.length)), fs.zooming,
                            fs.threshold, noise);
    }
    case MeasureCandidate::Kind::ulam: {
      Rng rng(derive_seed(seed, 2));
      std::size_t zooming = 0;
      for (std::size_t p = 0; p < fs.points; ++p) {
        const int cell = rng.categorical(m.weights);
        const double x0 = (cell + rng.uniform()) / m.model->cells;
        const auto word = sample_word(sys.base(), fs.length, seed, 3 + p);
        const IterateOptions opt{kRoundoffRefresh, derive_seed(seed, 3 + fs.points + p)};
        if (classify_point(sys, x0, word, fs.zooming, fs.threshold, opt) == ZoomingFlag::zooming_like) ++zooming;
      }
      const double share = static_cast<double>(zooming) / static_cast<double>(fs.points);
      if (share >= fs.agreement) return ZoomingFlag::zooming_like;
      if (share <= 1.0 - fs.agreement) return ZoomingFlag::non_zooming_like;
      return ZoomingFlag::unknown;
    }
  }
  return ZoomingFlag::unknown;
}

// Ulam candidate with its cell weights restricted to cells whose center
// satisfies `keep`, renormalized.
inline MeasureCandidate restrict_candidate(const MeasureCandidate& m, const std::function<bool(double)>& keep,
                                           const std::string& tag) {
  if (m.kind != MeasureCandidate::Kind::ulam) throw DomainError("only Ulam candidates can be restricted");
  MeasureCandidate r = m;
  for (int i = 0; i < m.model->cells; ++i)
    if (!keep(m.model->center(i))) r.weights[i] = 0.0;
  if (!std::isfinite(normalize_sum(r.weights))) throw DomainError("restriction leaves no mass");
  r.label = m.label + "|" + tag;
  return r;
}

using CandidateEvaluator = std::function<double(const MeasureCandidate&)>;

// h + integral(phi) through the entropy and integral estimators.
inline CandidateEvaluator entropy_plus_integral(const RandomSystem& sys, const Potential& phi,
                                                const EntropySettings& es, std::uint64_t seed) {
  return [&sys, phi, es, seed](const MeasureCandidate& m) { return evaluate_candidate(m, sys, phi, es, seed).value; };
}

struct GapEntry {
  std::string label;
  bool zooming_family = false;
  ZoomingFlag flag = ZoomingFlag::unknown;
  double value = 0.0;
};

struct GapReport {
  double gap = 0.0;  // best zooming value - best non-zooming value
  double best_zooming = 0.0;
  double best_non_zooming = 0.0;
  std::string best_zooming_label;
  std::string best_non_zooming_label;
  std::vector<GapEntry> entries;
  std::vector<std::string> excluded;
  std::vector<std::string> warnings;
};

inline GapReport zooming_gap(const std::vector<MeasureCandidate>& zooming,
                             const std::vector<MeasureCandidate>& non_zooming, const CandidateEvaluator& evaluate) {
  if (zooming.empty() || non_zooming.empty()) throw DomainError("zooming gap needs two non-empty families");
  GapReport rep;
  rep.best_zooming = rep.best_non_zooming = kNegInf;
  auto scan = [&](const std::vector<MeasureCandidate>& family, bool is_zooming) {
    const ZoomingFlag expected = is_zooming ? ZoomingFlag::zooming_like : ZoomingFlag::non_zooming_like;
    for (const auto& m : family) {
      if (m.flag == ZoomingFlag::unknown) {
        rep.excluded.push_back(m.label);
        rep.warnings.push_back("candidate " + m.label + " has unknown zooming flag; excluded");
        continue;
      }
      if (m.flag != expected)
        throw DomainError("candidate " + m.label + " is flagged " + to_string(m.flag) + " but listed in the " +
                          (is_zooming ? "zooming" : "non-zooming") + " family");
      const double v = evaluate(m);
      rep.entries.push_back(GapEntry{m.label, is_zooming, m.flag, v});
      double& best = is_zooming ? rep.best_zooming : rep.best_non_zooming;
      if (v > best) {
        best = v;
        (is_zooming ? rep.best_zooming_label : rep.best_non_zooming_label) = m.label;
      }
    }
  };
  scan(zooming, true);
  scan(non_zooming, false);
  if (!std::isfinite(rep.best_zooming) || !std::isfinite(rep.best_non_zooming))
    throw DomainError("a family is empty after excluding unknown-flag candidates");
  rep.gap = rep.best_zooming - rep.best_non_zooming;
  return rep;
}

struct HyperbolicityReport {
  double gap = 0.0;  // P(phi, in) - P(phi, out); +inf when the out-set sample is empty
  double pressure_in = 0.0;
  double pressure_out = 0.0;
  double pressure_full = 0.0;
  double consistency = 0.0;  // |P(phi, in) - P(phi)|
  std::vector<std::string> notes;
};

// The classifier runs once per grid point and word; the in-set, its
// complement and the full set share those labels.
inline HyperbolicityReport hyperbolicity_gap(const RandomSystem& sys, const Potential& phi,
                                             const Classifier& in_set, const CaratheodorySettings& cs,
                                             std::uint64_t seed) {
  detail::validate(cs);
  struct Triple {
    detail::WordCrossing in, out, full;
  };
  const auto per = parallel_map(detail::caratheodory_runs(sys, cs), cs.workers, [&](std::size_t k) {
    const auto word = detail::caratheodory_word(sys, cs, seed, k);
    std::vector<char> in(cs.points), out(cs.points), all(cs.points, 1);
    for (std::size_t p = 0; p < cs.points; ++p) {
      in[p] = in_set(detail::grid_point(cs, p), word) ? 1 : 0;
      out[p] = static_cast<char>(1 - in[p]);
    }
    return Triple{detail::word_crossing(sys, phi, cs, word, in), detail::word_crossing(sys, phi, cs, word, out),
                  detail::word_crossing(sys, phi, cs, word, all)};
  });
  auto pick = [&](auto member) {
    std::vector<detail::WordCrossing> v;
    for (const auto& t : per) v.push_back(t.*member);
    return detail::aggregate(std::move(v), cs.words);
  };
  const auto in = pick(&Triple::in), out = pick(&Triple::out), full = pick(&Triple::full);
  HyperbolicityReport rep;
  rep.pressure_in = in.value;
  rep.pressure_out = out.value;
  rep.pressure_full = full.value;
  for (const auto* est : {&in, &out, &full})
    for (const auto& w : est->warnings)
      if (std::find(rep.notes.begin(), rep.notes.end(), w) == rep.notes.end()) rep.notes.push_back(w);
  if (out.empty) {
    rep.gap = kPosInf;
    rep.notes.push_back("complement sample is empty; gap reported as +inf");
  } else {
    rep.gap = in.value - out.value;
  }
  rep.consistency = in.empty ? kPosInf : std::abs(in.value - full.value);
  return rep;
}

// Classifier from the zooming frequency of the orbit along the given word.
inline Classifier zooming_classifier(const RandomSystem& sys, const ZoomingConfig& cfg, double threshold) {
  return [&sys, cfg, threshold](double x, std::span<const int> word) {
    return classify_point(sys, x, word, cfg, threshold, IterateOptions{0.0, 0}) == ZoomingFlag::zooming_like;
  };
}

}  // namespace zoomrds
