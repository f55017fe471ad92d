#include "vgne/generator.hpp"

#include "vgne/random.hpp"

namespace vgne {

GameSpecd random_game(const GeneratorOptions& options) {
  const Index N = options.agents;
  const Index n = options.dim;
  const Index m = options.constraints;
  if (N < 1 || n < 1 || m < 0) throw InvalidArgument("random_game: agents, dim must be >= 1 and constraints >= 0");
  Rng rng(options.seed);

  std::vector<BoxSetd> boxes;
  for (Index i = 0; i < N; ++i) boxes.emplace_back(rng.uniform_vector(n, -3.0, -1.0), rng.uniform_vector(n, 1.0, 3.0));

  QuadraticCostd cost;
  cost.q = rng.uniform_vector(N, 1.0, 2.0);
  Matrixd B(n, n);
  Matrixd G(n, n);
  for (Index a = 0; a < n; ++a) {
    for (Index b = 0; b < n; ++b) {
      B(a, b) = options.aggregate_strength * rng.normal();
      G(a, b) = options.aggregate_strength * rng.normal();
    }
  }
  cost.c = B * B.transpose() + (G - G.transpose());
  for (Index i = 0; i < N; ++i) cost.d.push_back(rng.uniform_vector(n, -4.0, 4.0));

  std::vector<Matrixd> blocks(static_cast<std::size_t>(N), Matrixd(m, n));
  for (auto& block : blocks) {
    for (Index r = 0; r < m; ++r) {
      for (Index a = 0; a < n; ++a) block(r, a) = rng.uniform(-1.0, 1.0);
    }
  }
  CouplingConstraintd coupling(blocks, Vectord::Zero(m));
  Vectord centre(N * n);
  for (Index i = 0; i < N; ++i) centre.segment(i * n, n) = boxes[static_cast<std::size_t>(i)].center();
  const Vectord b = coupling.stacked() * centre + rng.uniform_vector(m, 0.5, 1.5);
  coupling = CouplingConstraintd(std::move(blocks), b);

  GameSpecd spec(N, n, std::move(boxes), std::move(cost), std::move(coupling));
  return spec.with_monotonicity(exact_monotonicity(spec));
}

}  // namespace vgne
