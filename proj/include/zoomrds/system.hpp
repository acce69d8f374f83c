#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "zoomrds/errors.hpp"
#include "zoomrds/geometry.hpp"
#include "zoomrds/potential.hpp"
#include "zoomrds/random.hpp"

namespace zoomrds {

// One monotone branch of a fiber map, defined on [lo, hi].
//   affine:    x -> slope * x + intercept
//   quadratic: x -> 1 - amplitude * (2x - 1)^2 / 2
//   neutral:   x -> x / (1 - sqrt(x))^2 on [0, 1/4], neutral fixed point at 0
struct Piece {
  enum class Shape { affine, quadratic, neutral };
  double lo = 0.0;
  double hi = 1.0;
  Shape shape = Shape::affine;
  double slope = 0.0;
  double intercept = 0.0;
  double amplitude = 0.0;

  // Value on the branch, before wrapping or clamping into the phase space.
  double value(double x) const {
    switch (shape) {
      case Shape::affine:
        return slope * x + intercept;
      case Shape::quadratic: {
        const double u = 2.0 * x - 1.0;
        return 1.0 - 0.5 * amplitude * u * u;
      }
      case Shape::neutral: {
        const double q = 1.0 - std::sqrt(x);
        return x / (q * q);
      }
    }
    return 0.0;
  }

  double derivative(double x) const {
    switch (shape) {
      case Shape::affine:
        return slope;
      case Shape::quadratic:
        return 2.0 * amplitude * (1.0 - 2.0 * x);
      case Shape::neutral: {
        const double q = 1.0 - std::sqrt(x);
        return 1.0 / (q * q * q);
      }
    }
    return 0.0;
  }

  // +1 increasing, -1 decreasing, 0 constant.
  int orientation() const {
    switch (shape) {
      case Shape::affine:
        return slope > 0.0 ? 1 : (slope < 0.0 ? -1 : 0);
      case Shape::quadratic:
        return (lo + hi) * 0.5 < 0.5 ? (amplitude > 0 ? 1 : -1) : (amplitude > 0 ? -1 : 1);
      case Shape::neutral:
        return 1;
    }
    return 0;
  }

  // f(x + s) - f(x), computed without cancellation.
  double increment(double x, double s) const {
    switch (shape) {
      case Shape::affine:
        return slope * s;
      case Shape::quadratic:
        return -2.0 * amplitude * s * (2.0 * x - 1.0 + s);
      case Shape::neutral: {
        if (s == 0.0) return 0.0;
        const double p = std::sqrt(x + s), q = std::sqrt(x);
        const double dp = 1.0 - p, dq = 1.0 - q;
        return s * (p + q - 2.0 * p * q) / ((p + q) * dp * dp * dq * dq);
      }
    }
    return 0.0;
  }

  // Offset s with increment(x, s) == t. Empty when no such s exists on the
  // branch (beyond a fold, or outside [lo, hi] unless `extend` is set).
  std::optional<double> local_inverse(double x, double t, bool extend = false) const {
    std::optional<double> s;
    switch (shape) {
      case Shape::affine:
        if (slope != 0.0)
          s = t / slope;
        else if (t == 0.0)
          s = 0.0;
        break;
      case Shape::quadratic: {
        // s^2 + b s + c = 0
        const double b = 2.0 * x - 1.0;
        const double c = t / (2.0 * amplitude);
        double disc = b * b - 4.0 * c;
        if (disc < 0.0) {
          if (disc < -1e-15 * std::max(1.0, b * b)) return std::nullopt;
          disc = 0.0;
        }
        const double root = std::sqrt(disc);
        double big = -0.5 * (b + (b >= 0.0 ? root : -root));
        double small = big != 0.0 ? c / big : 0.0;
        if (b == 0.0) {
          big = 0.5 * root;
          small = -0.5 * root;
        }
        const double tol = 1e-12;
        for (double cand : {small, big}) {
          if (x + cand >= lo - tol && x + cand <= hi + tol) {
            s = cand;
            break;
          }
        }
        if (!s) return std::nullopt;
        break;
      }
      case Shape::neutral: {
        const double fx = value(x);
        const double target = fx + t;
        if (target < 0.0) return std::nullopt;
        const double big_q = std::sqrt(fx);
        const double big_p = std::sqrt(target);
        if (big_p + big_q == 0.0) {
          s = 0.0;
          break;
        }
        const double dp = t / (big_p + big_q);
        const double p = big_p / (1.0 + big_p);
        const double q = big_q / (1.0 + big_q);
        const double p_minus_q = dp / ((1.0 + big_p) * (1.0 + big_q));
        s = p_minus_q * (p + q);
        break;
      }
    }
    if (!s) return std::nullopt;
    if (!extend) {
      const double tol = 1e-12;
      if (x + *s < lo - tol || x + *s > hi + tol) return std::nullopt;
    }
    return s;
  }
};

// A piecewise-monotone map of [0, 1], given by contiguous pieces covering
// [0, 1], together with its critical set.
class FiberMap {
 public:
  FiberMap(std::string name, std::vector<Piece> pieces, std::vector<double> critical)
      : name_(std::move(name)), pieces_(std::move(pieces)), critical_(std::move(critical)) {
    if (pieces_.empty()) throw DomainError("fiber map needs at least one piece");
    if (pieces_.front().lo != 0.0 || pieces_.back().hi != 1.0)
      throw DomainError("fiber map pieces must cover [0, 1]");
    for (std::size_t i = 0; i < pieces_.size(); ++i) {
      const Piece& p = pieces_[i];
      if (!(p.lo < p.hi)) throw DomainError("fiber map piece with empty domain");
      if (i + 1 < pieces_.size() && p.hi != pieces_[i + 1].lo)
        throw DomainError("fiber map pieces must be contiguous");
      if (p.shape == Piece::Shape::neutral && (p.lo != 0.0 || p.hi != 0.25))
        throw DomainError("neutral branch is defined on [0, 1/4]");
      if (p.shape == Piece::Shape::quadratic && !(p.amplitude > 0.0 && p.amplitude <= 2.0))
        throw DomainError("quadratic amplitude must lie in (0, 2]");
      if (p.shape == Piece::Shape::quadratic && (p.lo < 0.5 && p.hi > 0.5))
        throw DomainError("quadratic piece must not straddle the critical point");
    }
    for (double c : critical_)
      if (c < 0.0 || c > 1.0) throw DomainError("critical points must lie in [0, 1]");
    std::sort(critical_.begin(), critical_.end());
  }

  // x -> d x mod 1.
  static FiberMap linear(int degree) {
    if (degree < 1) throw DomainError("linear full-branch degree must be positive");
    std::vector<Piece> pieces;
    for (int k = 0; k < degree; ++k) {
      Piece p;
      p.lo = static_cast<double>(k) / degree;
      p.hi = static_cast<double>(k + 1) / degree;
      p.slope = degree;
      p.intercept = -k;
      pieces.push_back(p);
    }
    pieces.back().hi = 1.0;
    return FiberMap(degree == 2 ? "doubling" : "linear-" + std::to_string(degree),
                    std::move(pieces), {});
  }
  static FiberMap doubling() { return linear(2); }

  // x -> slope * min(x, 1 - x).
  static FiberMap tent(double slope) {
    if (!(slope > 0.0 && slope <= 2.0)) throw DomainError("tent slope must lie in (0, 2]");
    Piece left{0.0, 0.5, Piece::Shape::affine, slope, 0.0, 0.0};
    Piece right{0.5, 1.0, Piece::Shape::affine, -slope, slope, 0.0};
    return FiberMap("tent", {left, right}, {0.5});
  }

  // Unit-interval reduction of the quadratic family x -> 1 - A x^2 on [-1, 1],
  // with A = a + coupling * shift; critical point at 1/2.
  static FiberMap quadratic(double a, double coupling = 0.0, double shift = 0.0) {
    const double amplitude = a + coupling * shift;
    Piece left{0.0, 0.5, Piece::Shape::quadratic, 0.0, 0.0, amplitude};
    Piece right{0.5, 1.0, Piece::Shape::quadratic, 0.0, 0.0, amplitude};
    return FiberMap("quadratic", {left, right}, {0.5});
  }

  // Neutral branch x / (1 - sqrt x)^2 on [0, 1/4] followed by `right_branches`
  // affine full branches on [1/4, 1].
  static FiberMap neutral(int right_branches = 1) {
    if (right_branches < 1) throw DomainError("neutral map needs at least one right branch");
    std::vector<Piece> pieces;
    pieces.push_back(Piece{0.0, 0.25, Piece::Shape::neutral, 0.0, 0.0, 0.0});
    const double width = 0.75 / right_branches;
    for (int k = 0; k < right_branches; ++k) {
      Piece p;
      p.lo = 0.25 + k * width;
      p.hi = k + 1 == right_branches ? 1.0 : 0.25 + (k + 1) * width;
      p.slope = 1.0 / width;
      p.intercept = -p.lo / width;
      pieces.push_back(p);
    }
    return FiberMap("neutral-" + std::to_string(right_branches), std::move(pieces), {});
  }

  static FiberMap piecewise(std::vector<Piece> pieces, std::vector<double> critical = {},
                            std::string name = "piecewise") {
    return FiberMap(std::move(name), std::move(pieces), std::move(critical));
  }

  const std::string& name() const { return name_; }
  const std::vector<Piece>& pieces() const { return pieces_; }
  const std::vector<double>& critical_points() const { return critical_; }

  bool piecewise_affine() const {
    return std::all_of(pieces_.begin(), pieces_.end(),
                       [](const Piece& p) { return p.shape == Piece::Shape::affine; });
  }

  std::size_t piece_index(double x) const {
    for (std::size_t i = 0; i + 1 < pieces_.size(); ++i)
      if (x < pieces_[i].hi) return i;
    return pieces_.size() - 1;
  }
  const Piece& piece_at(double x) const { return pieces_[piece_index(x)]; }

  double value(double x, PhaseSpace phase) const {
    return normalize(phase, piece_at(x).value(x));
  }

  double derivative(double x) const { return piece_at(x).derivative(x); }

  bool is_critical(double x) const {
    return std::find(critical_.begin(), critical_.end(), x) != critical_.end();
  }

  // log|f'(x)|; empty at critical points and where f' vanishes.
  std::optional<double> log_derivative(double x) const {
    if (is_critical(x)) return std::nullopt;
    const double d = std::abs(derivative(x));
    if (d == 0.0) return std::nullopt;
    return std::log(d);
  }

 private:
  std::string name_;
  std::vector<Piece> pieces_;
  std::vector<double> critical_;
};

// Bernoulli base over a finite alphabet. A non-empty explicit word replaces
// i.i.d. sampling by its periodic extension.
struct BaseProcess {
  std::vector<double> probabilities{1.0};
  std::vector<int> explicit_word;

  static BaseProcess bernoulli(std::vector<double> p) { return BaseProcess{std::move(p), {}}; }

  std::size_t alphabet() const { return probabilities.size(); }

  void validate() const {
    if (probabilities.empty()) throw DomainError("alphabet must be non-empty");
    double sum = 0.0;
    for (double p : probabilities) {
      if (!(p >= 0.0)) throw DomainError("symbol probabilities must be nonnegative");
      sum += p;
    }
    if (std::abs(sum - 1.0) > 1e-12) throw DomainError("symbol probabilities must sum to 1");
    for (int s : explicit_word)
      if (s < 0 || static_cast<std::size_t>(s) >= alphabet())
        throw DomainError("explicit word uses a symbol outside the alphabet");
  }
};

// Word `index` of a seeded i.i.d. stream; each word has its own derived seed.
inline std::vector<int> sample_word(const BaseProcess& base, std::size_t n, std::uint64_t seed,
                                    std::size_t index = 0) {
  std::vector<int> word(n);
  if (!base.explicit_word.empty()) {
    for (std::size_t i = 0; i < n; ++i) word[i] = base.explicit_word[i % base.explicit_word.size()];
    return word;
  }
  if (base.alphabet() == 1) return word;
  Rng rng(derive_seed(seed, index));
  for (auto& s : word) s = rng.categorical(base.probabilities);
  return word;
}

inline std::vector<std::vector<int>> sample_base(const BaseProcess& base, std::size_t n,
                                                 std::size_t count, std::uint64_t seed) {
  base.validate();
  std::vector<std::vector<int>> words;
  words.reserve(count);
  for (std::size_t c = 0; c < count; ++c) words.push_back(sample_word(base, n, seed, c));
  return words;
}

// Skew product F(w, x) = (T w, f_{w_0}(x)) over a Bernoulli shift.
class RandomSystem {
 public:
  RandomSystem(BaseProcess base, std::vector<FiberMap> fibers, PhaseSpace phase)
      : base_(std::move(base)), fibers_(std::move(fibers)), phase_(phase) {
    base_.validate();
    if (fibers_.size() != base_.alphabet())
      throw DomainError("every alphabet symbol needs exactly one fiber map");
    if (phase_ == PhaseSpace::circle)
      for (const auto& f : fibers_)
        if (!f.piecewise_affine())
          throw DomainError("circle phase space supports piecewise-affine fibers only");
  }

  const BaseProcess& base() const { return base_; }
  const std::vector<FiberMap>& fibers() const { return fibers_; }
  const FiberMap& fiber(int symbol) const {
    if (symbol < 0 || static_cast<std::size_t>(symbol) >= fibers_.size())
      throw DomainError("symbol outside the alphabet");
    return fibers_[static_cast<std::size_t>(symbol)];
  }
  std::size_t alphabet() const { return fibers_.size(); }
  PhaseSpace phase() const { return phase_; }

  double apply(int symbol, double x) const { return fiber(symbol).value(x, phase_); }
  double distance(double x, double y) const { return zoomrds::distance(phase_, x, y); }

  std::vector<double> critical_points() const {
    std::vector<double> all;
    for (const auto& f : fibers_) all.insert(all.end(), f.critical_points().begin(), f.critical_points().end());
    std::sort(all.begin(), all.end());
    all.erase(std::unique(all.begin(), all.end()), all.end());
    return all;
  }

 private:
  BaseProcess base_;
  std::vector<FiberMap> fibers_;
  PhaseSpace phase_;
};

struct OrbitRecord {
  double x0 = 0.0;
  std::vector<int> word;                         // w_0 .. w_{n-1}
  std::vector<double> points;                    // x_0 .. x_n
  std::vector<std::optional<double>> log_derivs; // log|f'_{w_i}(x_i)|, i < n
  std::vector<double> birkhoff;                  // S_0 .. S_n, empty without a potential

  std::size_t length() const { return word.size(); }
};

// Roundoff refresh: a seeded perturbation of size `refresh` added after every
// step. Expanding maps such as x -> 2x mod 1 otherwise shift all mantissa bits
// out and collapse onto 0 within ~53 steps.
struct IterateOptions {
  double refresh = 0.0;
  std::uint64_t seed = 0;
};

inline constexpr double kRoundoffRefresh = 1e-15;

inline OrbitRecord iterate(const RandomSystem& sys, double x0, std::span<const int> word,
                           const Potential* phi = nullptr, const IterateOptions& options = {}) {
  if (word.empty()) throw DomainError("iterate needs a non-empty word");
  if (!(x0 >= 0.0 && x0 <= 1.0)) throw DomainError("initial point outside the phase space");
  OrbitRecord rec;
  rec.x0 = x0;
  rec.word.assign(word.begin(), word.end());
  rec.points.reserve(word.size() + 1);
  rec.log_derivs.reserve(word.size());
  rec.points.push_back(x0);
  if (phi) rec.birkhoff.push_back(0.0);
  std::optional<Rng> rng;
  if (options.refresh > 0.0) rng.emplace(options.seed);
  CompensatedSum sum;
  double x = x0;
  for (int s : word) {
    const FiberMap& f = sys.fiber(s);
    rec.log_derivs.push_back(f.log_derivative(x));
    if (phi) {
      sum.add((*phi)(s, x));
      rec.birkhoff.push_back(sum.value());
    }
    x = f.value(x, sys.phase());
    if (rng) x = normalize(sys.phase(), x + options.refresh * (2.0 * rng->uniform() - 1.0));
    rec.points.push_back(x);
  }
  return rec;
}

inline double truncated_distance(double x, std::span<const double> critical, double delta,
                                 PhaseSpace phase = PhaseSpace::interval) {
  if (!(delta > 0.0)) throw DomainError("truncation scale must be positive");
  double d = delta;
  for (double c : critical) d = std::min(d, distance(phase, x, c));
  return d;
}

}  // namespace zoomrds
