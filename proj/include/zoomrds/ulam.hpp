#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <span>
#include <vector>

#include "zoomrds/errors.hpp"
#include "zoomrds/potential.hpp"
#include "zoomrds/system.hpp"

namespace zoomrds {

// Compressed sparse rows.
struct SparseMatrix {
  int rows = 0;
  int cols = 0;
  std::vector<int> start{0};
  std::vector<int> index;
  std::vector<double> value;

  void push_row(const std::map<int, double>& row, double drop_below = 0.0) {
    for (const auto& [j, v] : row) {
      if (v <= drop_below) continue;
      index.push_back(j);
      value.push_back(v);
    }
    start.push_back(static_cast<int>(index.size()));
    ++rows;
  }

  double at(int i, int j) const {
    for (int k = start[i]; k < start[i + 1]; ++k)
      if (index[k] == j) return value[k];
    return 0.0;
  }

  double row_sum(int i) const {
    double s = 0.0;
    for (int k = start[i]; k < start[i + 1]; ++k) s += value[k];
    return s;
  }

  // y_j = sum_i x_i * w_i * M_ij (w optional: empty means 1).
  void left_multiply(std::span<const double> x, std::span<const double> w, std::span<double> y) const {
    std::fill(y.begin(), y.end(), 0.0);
    for (int i = 0; i < rows; ++i) {
      const double xi = w.empty() ? x[i] : x[i] * w[i];
      if (xi == 0.0) continue;
      for (int k = start[i]; k < start[i + 1]; ++k) y[index[k]] += xi * value[k];
    }
  }

  // y_i = w_i * sum_j M_ij h_j.
  void right_multiply(std::span<const double> h, std::span<const double> w, std::span<double> y) const {
    for (int i = 0; i < rows; ++i) {
      double s = 0.0;
      for (int k = start[i]; k < start[i + 1]; ++k) s += value[k] * h[index[k]];
      y[i] = w.empty() ? s : w[i] * s;
    }
  }

  std::vector<std::vector<double>> dense() const {
    std::vector<std::vector<double>> d(rows, std::vector<double>(cols, 0.0));
    for (int i = 0; i < rows; ++i)
      for (int k = start[i]; k < start[i + 1]; ++k) d[i][index[k]] = value[k];
    return d;
  }
};

// Ulam discretization on N uniform cells. Per symbol s:
//   coverage C_s[i][j] = |f_s(cell_i) ∩ cell_j| / |cell|, counted with multiplicity
//   expansion J_s[i]   = sum_j C_s[i][j]
//   transition A_s     = C_s / J_s, row-stochastic
// The weighted operator of a potential is L_s[i][j] = exp(phi(s, c_i)) C_s[i][j].
struct UlamModel {
  int cells = 0;
  PhaseSpace phase = PhaseSpace::interval;
  std::vector<double> probabilities;
  std::vector<SparseMatrix> coverage;
  std::vector<SparseMatrix> transition;
  std::vector<std::vector<double>> expansion;
  std::vector<std::vector<int>> degenerate_rows;

  std::size_t alphabet() const { return coverage.size(); }
  double width() const { return 1.0 / cells; }
  double center(int i) const { return (i + 0.5) / cells; }
  int cell_of(double y) const {
    const int j = static_cast<int>(std::floor(y * cells));
    return std::clamp(j, 0, cells - 1);
  }

  std::vector<double> weights(const Potential& phi, int symbol) const {
    std::vector<double> w(static_cast<std::size_t>(cells));
    for (int i = 0; i < cells; ++i) w[i] = std::exp(phi(symbol, center(i)));
    return w;
  }

  bool symbol_independent() const {
    for (std::size_t s = 1; s < coverage.size(); ++s)
      if (coverage[s].value != coverage[0].value || coverage[s].index != coverage[0].index) return false;
    return true;
  }
};

inline constexpr double kUlamDrop = 1e-12;

namespace detail {

// Adds the image segment [lo, hi] (scaled by `mass_per_length`) to a coverage row.
inline void deposit(std::map<int, double>& row, double lo, double hi, double mass_per_length,
                    int cells, PhaseSpace phase) {
  if (hi < lo) std::swap(lo, hi);
  auto add_unit = [&](double a, double b) {
    a = std::max(a, 0.0);
    b = std::min(b, 1.0);
    if (!(b > a)) return;
    const int j0 = std::clamp(static_cast<int>(std::floor(a * cells)), 0, cells - 1);
    const int j1 = std::clamp(static_cast<int>(std::ceil(b * cells)) - 1, 0, cells - 1);
    for (int j = j0; j <= j1; ++j) {
      const double overlap =
          std::min(b, static_cast<double>(j + 1) / cells) - std::max(a, static_cast<double>(j) / cells);
      if (overlap > 0.0) row[j] += overlap * cells * mass_per_length;
    }
  };
  if (phase == PhaseSpace::interval) {
    add_unit(lo, hi);
    return;
  }
  for (double k = std::floor(lo); k < hi; k += 1.0) add_unit(std::max(lo, k) - k, std::min(hi, k + 1.0) - k);
}

}  // namespace detail

// Exact for affine branches; stratified midpoint sampling with |f'| weights on
// nonlinear branches.
inline UlamModel build_ulam(const RandomSystem& sys, int cells, int samples_per_cell = 64) {
  if (cells < 2) throw DomainError("Ulam model needs at least 2 cells");
  if (samples_per_cell < 1) throw DomainError("Ulam sampling needs at least one sample per cell");
  UlamModel m;
  m.cells = cells;
  m.phase = sys.phase();
  m.probabilities = sys.base().probabilities;
  for (std::size_t s = 0; s < sys.alphabet(); ++s) {
    const FiberMap& f = sys.fiber(static_cast<int>(s));
    SparseMatrix cov, tr;
    cov.cols = tr.cols = cells;
    std::vector<double> jac(static_cast<std::size_t>(cells));
    std::vector<int> degenerate;
    for (int i = 0; i < cells; ++i) {
      const double c_lo = static_cast<double>(i) / cells, c_hi = static_cast<double>(i + 1) / cells;
      std::map<int, double> row;
      for (const Piece& p : f.pieces()) {
        const double a = std::max(c_lo, p.lo), b = std::min(c_hi, p.hi);
        if (!(b > a)) continue;
        if (p.shape == Piece::Shape::affine) {
          if (p.slope != 0.0) detail::deposit(row, p.value(a), p.value(b), 1.0, cells, m.phase);
        } else {
          const int k = std::max(1, static_cast<int>(std::lround(samples_per_cell * (b - a) * cells)));
          for (int q = 0; q < k; ++q) {
            const double x = a + (q + 0.5) * (b - a) / k;
            const double mass = std::abs(p.derivative(x)) * (b - a) * cells / k;
            if (mass > 0.0) row[m.cell_of(normalize(m.phase, p.value(x)))] += mass;
          }
        }
      }
      for (auto it = row.begin(); it != row.end();)
        it = it->second <= kUlamDrop ? row.erase(it) : std::next(it);
      double total = 0.0;
      for (const auto& kv : row) total += kv.second;
      jac[i] = total;
      cov.push_row(row);
      std::map<int, double> trow;
      if (total > 0.0) {
        for (const auto& [j, v] : row) trow[j] = v / total;
      } else {
        degenerate.push_back(i);
        trow[m.cell_of(f.value(m.center(i), m.phase))] = 1.0;
      }
      tr.push_row(trow);
    }
    m.coverage.push_back(std::move(cov));
    m.transition.push_back(std::move(tr));
    m.expansion.push_back(std::move(jac));
    m.degenerate_rows.push_back(std::move(degenerate));
  }
  return m;
}

// exp(phi(s, c_i)) for every symbol and cell.
inline std::vector<std::vector<double>> potential_weights(const UlamModel& m, const Potential& phi) {
  std::vector<std::vector<double>> w;
  for (std::size_t s = 0; s < m.alphabet(); ++s) w.push_back(m.weights(phi, static_cast<int>(s)));
  return w;
}

// Scales v to unit sum and returns the log of the old sum (-inf for a zero vector).
inline double normalize_sum(std::span<double> v) {
  double total = 0.0;
  for (double x : v) total += x;
  if (!(total > 0.0)) return -std::numeric_limits<double>::infinity();
  for (double& x : v) x /= total;
  return std::log(total);
}

// u <- u L_{w_0} ... L_{w_{k-1}}, normalized after each step.
inline void push_forward(const UlamModel& m, const std::vector<std::vector<double>>& weights,
                         std::span<const int> word, std::vector<double>& u) {
  std::vector<double> next(u.size());
  for (int s : word) {
    m.coverage[static_cast<std::size_t>(s)].left_multiply(u, weights[static_cast<std::size_t>(s)], next);
    if (!std::isfinite(normalize_sum(next))) throw DomainError("weighted Ulam product vanished");
    u.swap(next);
  }
}

// h_t = L_{w_t} h_{t+1} / norm for t = k-1..0, with h_k = 1. Returns h_0..h_k.
inline std::vector<std::vector<double>> pull_back_densities(
    const UlamModel& m, const std::vector<std::vector<double>>& weights, std::span<const int> word) {
  const std::size_t k = word.size();
  std::vector<std::vector<double>> h(k + 1, std::vector<double>(static_cast<std::size_t>(m.cells)));
  std::fill(h[k].begin(), h[k].end(), 1.0 / m.cells);
  for (std::size_t t = k; t-- > 0;) {
    const auto s = static_cast<std::size_t>(word[t]);
    m.coverage[s].right_multiply(h[t + 1], weights[s], h[t]);
    if (!std::isfinite(normalize_sum(h[t]))) throw DomainError("weighted Ulam product vanished");
  }
  return h;
}

}  // namespace zoomrds
