#pragma once

#include <cmath>
#include <cstdint>
#include <memory>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "zoomrds/errors.hpp"
#include "zoomrds/potential.hpp"
#include "zoomrds/random.hpp"
#include "zoomrds/system.hpp"
#include "zoomrds/ulam.hpp"
#include "zoomrds/zooming.hpp"

namespace zoomrds {

struct MeasureCandidate {
  enum class Kind { empirical, periodic, ulam, dirac };

  Kind kind = Kind::dirac;
  std::string label;
  ZoomingFlag flag = ZoomingFlag::unknown;
  std::vector<double> probabilities;  // base symbol probabilities

  // dirac: the point; periodic: one period of the cycle; empirical: the orbit
  std::vector<double> points;
  std::vector<int> word;      // periodic: cycle word; empirical: orbit word
  std::size_t first = 0;      // empirical: burn-in
  std::optional<int> symbol;  // dirac: fiber symbol, empty for every symbol

  std::shared_ptr<const UlamModel> model;
  std::vector<double> weights;         // ulam cell weights
  std::optional<Potential> potential;  // ulam: kernel weighted by this potential
  int lookahead = 64;                  // ulam: past/future symbols for conditional densities

  std::size_t atom_count() const {
    switch (kind) {
      case Kind::dirac: return 1;
      case Kind::periodic: return points.size();
      case Kind::empirical: return word.size() - first;
      default: return 0;
    }
  }
};

inline std::string to_string(MeasureCandidate::Kind k) {
  switch (k) {
    case MeasureCandidate::Kind::empirical: return "empirical";
    case MeasureCandidate::Kind::periodic: return "periodic-orbit";
    case MeasureCandidate::Kind::ulam: return "ulam-stationary";
    default: return "dirac";
  }
}

inline constexpr double kFixedPointTolerance = 1e-12;
inline constexpr double kPeriodicTolerance = 1e-8;

inline MeasureCandidate make_dirac(const RandomSystem& sys, double x0, std::optional<int> symbol = {}) {
  for (std::size_t s = 0; s < sys.alphabet(); ++s) {
    if (symbol && static_cast<int>(s) != *symbol) continue;
    if (sys.distance(sys.apply(static_cast<int>(s), x0), x0) > kFixedPointTolerance)
      throw PreconditionError("dirac point " + std::to_string(x0) + " is not fixed by symbol " +
                              std::to_string(s));
  }
  MeasureCandidate m;
  m.kind = MeasureCandidate::Kind::dirac;
  m.label = "dirac(" + std::to_string(x0) + ")";
  m.probabilities = sys.base().probabilities;
  m.points = {x0};
  m.symbol = symbol;
  return m;
}

inline MeasureCandidate make_periodic(const RandomSystem& sys, std::vector<int> cycle, double x0) {
  if (cycle.empty()) throw DomainError("periodic candidate needs a non-empty cycle word");
  const OrbitRecord rec = iterate(sys, x0, cycle);
  if (sys.distance(rec.points.back(), x0) > kPeriodicTolerance)
    throw PreconditionError("point does not return to itself under the cycle word");
  MeasureCandidate m;
  m.kind = MeasureCandidate::Kind::periodic;
  m.label = "periodic(x0=" + std::to_string(x0) + ", period=" + std::to_string(cycle.size()) + ")";
  m.probabilities = sys.base().probabilities;
  m.points.assign(rec.points.begin(), rec.points.end() - 1);
  m.word = std::move(cycle);
  return m;
}

inline MeasureCandidate make_empirical(const RandomSystem& sys, const OrbitRecord& orbit, std::size_t burn_in) {
  if (burn_in >= orbit.length()) throw DomainError("burn-in must be shorter than the orbit");
  MeasureCandidate m;
  m.kind = MeasureCandidate::Kind::empirical;
  m.label = "empirical(x0=" + std::to_string(orbit.x0) + ", n=" + std::to_string(orbit.length()) + ")";
  m.probabilities = sys.base().probabilities;
  m.points = orbit.points;
  m.word = orbit.word;
  m.first = burn_in;
  return m;
}

inline MeasureCandidate make_ulam(std::shared_ptr<const UlamModel> model, std::vector<double> weights,
                                  std::optional<Potential> potential = {}, int lookahead = 64) {
  if (!model) throw DomainError("Ulam candidate needs a model");
  if (weights.size() != static_cast<std::size_t>(model->cells))
    throw DomainError("Ulam candidate weights must match the model's cells");
  MeasureCandidate m;
  m.kind = MeasureCandidate::Kind::ulam;
  m.label = potential ? "ulam-gibbs(" + potential->describe() + ")" : "ulam-stationary";
  m.probabilities = model->probabilities;
  m.model = std::move(model);
  m.weights = std::move(weights);
  m.potential = std::move(potential);
  m.lookahead = lookahead;
  return m;
}

// Cycles of x -> d x mod 1: representatives k / (d^p - 1) of minimal period p,
// smallest periods first, `count` orbits in total.
inline std::vector<std::pair<double, int>> linear_periodic_orbits(int degree, std::size_t count) {
  if (degree < 2) throw DomainError("periodic orbits need degree >= 2");
  std::vector<std::pair<double, int>> out;
  for (int p = 1; out.size() < count && p <= 20; ++p) {
    const std::uint64_t mod = static_cast<std::uint64_t>(std::llround(std::pow(degree, p))) - 1;
    for (std::uint64_t k = 0; k < mod && out.size() < count; ++k) {
      std::uint64_t y = k, smallest = k;
      int period = 0;
      do {
        y = (y * static_cast<std::uint64_t>(degree)) % mod;
        smallest = std::min(smallest, y);
        ++period;
      } while (y != k);
      if (period == p && smallest == k) out.emplace_back(static_cast<double>(k) / static_cast<double>(mod), p);
    }
  }
  return out;
}

inline double birkhoff_integral(const MeasureCandidate& m, const Potential& phi) {
  CompensatedSum sum;
  switch (m.kind) {
    case MeasureCandidate::Kind::dirac:
      if (m.symbol) return phi(*m.symbol, m.points[0]);
      for (std::size_t s = 0; s < m.probabilities.size(); ++s)
        if (m.probabilities[s] > 0.0) sum.add(m.probabilities[s] * phi(static_cast<int>(s), m.points[0]));
      return sum.value();
    case MeasureCandidate::Kind::periodic:
      for (std::size_t t = 0; t < m.points.size(); ++t) sum.add(phi(m.word[t], m.points[t]));
      return sum.value() / static_cast<double>(m.points.size());
    case MeasureCandidate::Kind::empirical:
      for (std::size_t t = m.first; t < m.word.size(); ++t) sum.add(phi(m.word[t], m.points[t]));
      return sum.value() / static_cast<double>(m.word.size() - m.first);
    case MeasureCandidate::Kind::ulam:
      for (std::size_t s = 0; s < m.probabilities.size(); ++s) {
        if (m.probabilities[s] <= 0.0) continue;
        for (int i = 0; i < m.model->cells; ++i)
          sum.add(m.probabilities[s] * m.weights[i] * phi(static_cast<int>(s), m.model->center(i)));
      }
      return sum.value();
  }
  return 0.0;
}

// Weights over N uniform cells.
inline std::vector<double> cell_weights(const MeasureCandidate& m, int cells) {
  if (cells < 1) throw DomainError("partition needs at least one cell");
  std::vector<double> w(static_cast<std::size_t>(cells), 0.0);
  auto cell = [&](double x) { return std::clamp(static_cast<int>(std::floor(x * cells)), 0, cells - 1); };
  switch (m.kind) {
    case MeasureCandidate::Kind::dirac:
      w[cell(m.points[0])] = 1.0;
      break;
    case MeasureCandidate::Kind::periodic:
      for (double x : m.points) w[cell(x)] += 1.0 / static_cast<double>(m.points.size());
      break;
    case MeasureCandidate::Kind::empirical: {
      const double q = 1.0 / static_cast<double>(m.word.size() - m.first);
      for (std::size_t t = m.first; t < m.word.size(); ++t) w[cell(m.points[t])] += q;
      break;
    }
    case MeasureCandidate::Kind::ulam: {
      const int n = m.model->cells;
      for (int i = 0; i < n; ++i) {
        const double lo = static_cast<double>(i) / n, hi = static_cast<double>(i + 1) / n;
        for (int j = cell(lo); j <= cell(std::nextafter(hi, 0.0)); ++j) {
          const double overlap = std::min(hi, static_cast<double>(j + 1) / cells) -
                                 std::max(lo, static_cast<double>(j) / cells);
          if (overlap > 0.0) w[j] += m.weights[i] * overlap * n;
        }
      }
      break;
    }
  }
  return w;
}

inline void validate_partition(int cells, double delta) {
  if (!(delta > 0.0)) throw DomainError("partition scale must be positive");
  if (cells < static_cast<int>(std::ceil(1.0 / delta - 1e-12)))
    throw DomainError("partition with " + std::to_string(cells) + " cells has diameter above delta");
}

struct EntropyEstimate {
  double value = 0.0;                 // slope of H(n) over the last third of depths
  std::vector<double> depth_entropy;  // mean H(n) for n = 1..depth
  std::vector<double> depth_error;    // standard error across base samples
  std::size_t samples = 0;
};

inline double shannon(std::span<const double> p) {
  double h = 0.0;
  for (double q : p)
    if (q > 0.0) h -= q * std::log(q);
  return h;
}

namespace detail {

// H(1..depth) of the distribution of cell itineraries of weighted atoms.
// `cell_at(a, t)` gives the cell of atom a at time t.
template <class CellAt>
std::vector<double> itinerary_entropies(std::size_t atoms, std::span<const double> atom_weights, int cells,
                                        int depth, CellAt cell_at) {
  std::vector<double> out;
  std::vector<std::uint64_t> id(atoms, 0);
  for (int t = 0; t < depth; ++t) {
    std::unordered_map<std::uint64_t, std::uint64_t> next_id;
    std::vector<double> mass;
    for (std::size_t a = 0; a < atoms; ++a) {
      const std::uint64_t key = id[a] * static_cast<std::uint64_t>(cells) + static_cast<std::uint64_t>(cell_at(a, t));
      auto [it, fresh] = next_id.try_emplace(key, next_id.size());
      if (fresh) mass.push_back(0.0);
      mass[it->second] += atom_weights[a];
      id[a] = it->second;
    }
    out.push_back(shannon(mass));
  }
  return out;
}

// H(1..depth) of the Markov chain with initial law mu and kernels K_0, K_1, ...
// by the chain rule H(n+1) = H(n) + sum_i mu_{n-1}(i) H(K_{n-1}[i, .]).
template <class Kernel>
std::vector<double> markov_entropies(std::vector<double> mu, int depth, Kernel kernel_row) {
  std::vector<double> out{shannon(mu)};
  const std::size_t n = mu.size();
  std::vector<double> next(n), row;
  std::vector<int> cols;
  for (int t = 0; t + 1 < depth; ++t) {
    std::fill(next.begin(), next.end(), 0.0);
    CompensatedSum increment;
    for (std::size_t i = 0; i < n; ++i) {
      if (mu[i] <= 0.0) continue;
      kernel_row(t, static_cast<int>(i), cols, row);
      increment.add(mu[i] * shannon(row));
      for (std::size_t k = 0; k < cols.size(); ++k) next[cols[k]] += mu[i] * row[k];
    }
    out.push_back(out.back() + increment.value());
    mu.swap(next);
  }
  return out;
}

inline double tail_slope(std::span<const double> h) {
  const int depth = static_cast<int>(h.size());
  const int count = std::max(2, depth / 3);
  const int first = depth - count;
  double mx = 0.0, my = 0.0;
  for (int k = first; k < depth; ++k) {
    mx += k + 1;
    my += h[k];
  }
  mx /= count;
  my /= count;
  double sxy = 0.0, sxx = 0.0;
  for (int k = first; k < depth; ++k) {
    sxy += (k + 1 - mx) * (h[k] - my);
    sxx += (k + 1 - mx) * (k + 1 - mx);
  }
  return sxy / sxx;
}

}  // namespace detail

// Fiber entropy of the candidate relative to the uniform partition into
// `cells` intervals. Atomic candidates use exact itineraries of their atoms.
// Ulam candidates are Markov measures on the model's cells: with a potential
// the kernel at time t is C_{w_t}[i][j] h_{t+1}[j] / (C_{w_t} h_{t+1})[i]
// from backward products along the sampled word, without one it is A_{w_t}.
inline EntropyEstimate entropy_estimate(const MeasureCandidate& m, const RandomSystem& sys, int cells,
                                        int depth, std::size_t samples, std::uint64_t seed,
                                        std::size_t workers = 1) {
  if (cells < 2) throw DomainError("entropy partition needs at least 2 cells");
  if (depth < 2) throw DomainError("entropy depth must be at least 2");
  if (samples < 1) throw DomainError("entropy needs at least one base sample");
  const bool random_base = sys.alphabet() > 1 && sys.base().explicit_word.empty();
  std::size_t runs = 1;
  if (m.kind == MeasureCandidate::Kind::ulam || m.kind == MeasureCandidate::Kind::dirac)
    runs = random_base ? samples : 1;

  auto cell = [cells](double x) { return std::clamp(static_cast<int>(std::floor(x * cells)), 0, cells - 1); };

  const auto tables = parallel_map(runs, workers, [&](std::size_t k) -> std::vector<double> {
    switch (m.kind) {
      case MeasureCandidate::Kind::dirac: {
        auto word = sample_word(sys.base(), static_cast<std::size_t>(depth), seed, k);
        if (m.symbol) std::fill(word.begin(), word.end(), *m.symbol);
        const OrbitRecord rec = iterate(sys, m.points[0], word);
        const double one = 1.0;
        return detail::itinerary_entropies(1, std::span<const double>(&one, 1), cells, depth,
                                           [&](std::size_t, int t) { return cell(rec.points[t]); });
      }
      case MeasureCandidate::Kind::periodic: {
        const std::size_t p = m.points.size();
        const std::vector<double> w(p, 1.0 / static_cast<double>(p));
        return detail::itinerary_entropies(p, w, cells, depth,
                                           [&](std::size_t a, int t) { return cell(m.points[(a + t) % p]); });
      }
      case MeasureCandidate::Kind::empirical: {
        const std::size_t n = m.word.size();
        std::vector<std::size_t> starts;
        for (std::size_t t = m.first; t < n && t + static_cast<std::size_t>(depth) <= n; ++t) starts.push_back(t);
        if (starts.empty()) throw DomainError("empirical orbit shorter than the entropy depth");
        const std::vector<double> w(starts.size(), 1.0 / static_cast<double>(starts.size()));
        return detail::itinerary_entropies(starts.size(), w, cells, depth,
                                           [&](std::size_t a, int t) { return cell(m.points[starts[a] + t]); });
      }
      case MeasureCandidate::Kind::ulam: {
        const UlamModel& model = *m.model;
        if (model.cells != cells) throw DomainError("Ulam candidate entropy uses the model's own cells");
        const auto L = static_cast<std::size_t>(m.lookahead);
        const auto word = sample_word(sys.base(), L + static_cast<std::size_t>(depth) + L, seed, k);
        if (!m.potential) {
          return detail::markov_entropies(m.weights, depth, [&](int t, int i, std::vector<int>& cols,
                                                                std::vector<double>& row) {
            const SparseMatrix& a = model.transition[static_cast<std::size_t>(word[L + t])];
            cols.assign(a.index.begin() + a.start[i], a.index.begin() + a.start[i + 1]);
            row.assign(a.value.begin() + a.start[i], a.value.begin() + a.start[i + 1]);
          });
        }
        const auto weights = potential_weights(model, *m.potential);
        std::vector<double> u(static_cast<std::size_t>(cells), 1.0 / cells);
        push_forward(model, weights, std::span<const int>(word.data(), L), u);
        const auto h = pull_back_densities(model, weights, std::span<const int>(word.data() + L, word.size() - L));
        std::vector<double> mu(u.size());
        for (std::size_t i = 0; i < mu.size(); ++i) mu[i] = u[i] * h[0][i];
        normalize_sum(mu);
        return detail::markov_entropies(mu, depth, [&](int t, int i, std::vector<int>& cols,
                                                       std::vector<double>& row) {
          const SparseMatrix& c = model.coverage[static_cast<std::size_t>(word[L + t])];
          const auto& next = h[static_cast<std::size_t>(t) + 1];
          cols.assign(c.index.begin() + c.start[i], c.index.begin() + c.start[i + 1]);
          row.resize(cols.size());
          double total = 0.0;
          for (std::size_t q = 0; q < cols.size(); ++q) {
            row[q] = c.value[c.start[i] + q] * next[cols[q]];
            total += row[q];
          }
          for (double& r : row) r = total > 0.0 ? r / total : 0.0;
        });
      }
    }
    return {};
  });

  EntropyEstimate est;
  est.samples = runs;
  for (int d = 0; d < depth; ++d) {
    std::vector<double> column;
    for (const auto& t : tables) column.push_back(t[d]);
    const auto me = mean_and_error(column);
    est.depth_entropy.push_back(me.mean);
    est.depth_error.push_back(me.standard_error);
  }
  est.value = detail::tail_slope(est.depth_entropy);
  return est;
}

}  // namespace zoomrds
