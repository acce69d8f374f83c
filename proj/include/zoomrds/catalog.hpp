#pragma once

#include <vector>

#include "zoomrds/system.hpp"

// Example systems used by tests, the acceptance suite and the sample configs.
namespace zoomrds::catalog {

inline RandomSystem doubling(PhaseSpace phase = PhaseSpace::circle) {
  return RandomSystem(BaseProcess::bernoulli({1.0}), {FiberMap::doubling()}, phase);
}

inline RandomSystem linear(int degree, PhaseSpace phase = PhaseSpace::circle) {
  return RandomSystem(BaseProcess::bernoulli({1.0}), {FiberMap::linear(degree)}, phase);
}

// Symbol 0 applies x -> 2x, symbol 1 applies x -> 3x (mod 1).
inline RandomSystem random_doubling_tripling(double p_doubling = 0.5,
                                             PhaseSpace phase = PhaseSpace::circle) {
  return RandomSystem(BaseProcess::bernoulli({p_doubling, 1.0 - p_doubling}),
                      {FiberMap::linear(2), FiberMap::linear(3)}, phase);
}

inline RandomSystem quadratic(double a = 2.0) {
  return RandomSystem(BaseProcess::bernoulli({1.0}), {FiberMap::quadratic(a)},
                      PhaseSpace::interval);
}

// Quadratic maps with amplitude a + coupling * shifts[s] for symbol s.
inline RandomSystem coupled_quadratic(double a, double coupling, std::vector<double> shifts,
                                      std::vector<double> probabilities) {
  if (shifts.size() != probabilities.size())
    throw DomainError("coupled quadratic needs one shift per symbol");
  std::vector<FiberMap> fibers;
  for (double s : shifts) fibers.push_back(FiberMap::quadratic(a, coupling, s));
  return RandomSystem(BaseProcess::bernoulli(std::move(probabilities)), std::move(fibers),
                      PhaseSpace::interval);
}

inline RandomSystem tent(double slope = 2.0) {
  return RandomSystem(BaseProcess::bernoulli({1.0}), {FiberMap::tent(slope)},
                      PhaseSpace::interval);
}

// Two expanding branches on [0, 1/2) whose images cover [0, 1/2], and a
// contracting branch on [1/2, 1] with attracting fixed point 2/3.
inline FiberMap split_attractor_map() {
  return FiberMap::piecewise({Piece{0.0, 0.25, Piece::Shape::affine, 2.0, 0.0, 0.0},
                              Piece{0.25, 0.5, Piece::Shape::affine, 2.0, -0.5, 0.0},
                              Piece{0.5, 1.0, Piece::Shape::affine, 0.25, 0.5, 0.0}},
                             {}, "split-attractor");
}
inline constexpr double kSplitAttractorFixedPoint = 2.0 / 3.0;

inline RandomSystem split_attractor() {
  return RandomSystem(BaseProcess::bernoulli({1.0}), {split_attractor_map()},
                      PhaseSpace::interval);
}

// Neutral fixed point at 0 on both symbols; the right part has one or two
// full branches depending on the symbol.
inline RandomSystem neutral_product(double p_first = 0.5) {
  return RandomSystem(BaseProcess::bernoulli({p_first, 1.0 - p_first}),
                      {FiberMap::neutral(1), FiberMap::neutral(2)}, PhaseSpace::interval);
}

}  // namespace zoomrds::catalog
