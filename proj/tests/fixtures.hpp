#pragma once

#include <vector>

#include "vgne/game.hpp"
#include "vgne/generator.hpp"

namespace fixtures {

using namespace vgne;

inline Vectord vec(std::initializer_list<double> values) {
  Vectord v(static_cast<Index>(values.size()));
  Index k = 0;
  for (double value : values) v[k++] = value;
  return v;
}

inline Matrixd mat(Index rows, Index cols, std::initializer_list<double> values) {
  Matrixd m(rows, cols);
  auto it = values.begin();
  for (Index r = 0; r < rows; ++r)
    for (Index c = 0; c < cols; ++c) m(r, c) = *it++;
  return m;
}

/// Quadratic game with scalar decisions; A given as one row per constraint, one column per agent.
inline GameSpecd scalar_game(std::vector<double> q, double c, std::vector<double> d, double lo, double hi,
                             const Matrixd& A = Matrixd(0, 0), const Vectord& b = Vectord(0)) {
  const Index N = static_cast<Index>(q.size());
  QuadraticCostd cost;
  cost.q = Vectord::Map(q.data(), N);
  cost.c = Matrixd::Constant(1, 1, c);
  for (double di : d) cost.d.push_back(Vectord::Constant(1, di));
  std::vector<BoxSetd> boxes(static_cast<std::size_t>(N), BoxSetd::uniform(1, lo, hi));
  std::vector<Matrixd> blocks;
  for (Index i = 0; i < N; ++i) blocks.push_back(A.rows() ? Matrixd(A.col(i)) : Matrixd(0, 1));
  return GameSpecd(N, 1, std::move(boxes), std::move(cost), CouplingConstraintd(std::move(blocks), b));
}

/// F(x) = x - 3 on [lo, hi].
inline GameSpecd shifted_identity(double lo = -10, double hi = 10) { return scalar_game({1.0}, 0.0, {-3.0}, lo, hi); }

inline GameSpecd random_spec(std::uint64_t seed, Index agents, Index dim, Index constraints) {
  GeneratorOptions options;
  options.agents = agents;
  options.dim = dim;
  options.constraints = constraints;
  options.seed = seed;
  return random_game(options);
}

}  // namespace fixtures
