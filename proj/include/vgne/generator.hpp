#pragma once

#include <cstdint>

#include "vgne/game.hpp"

namespace vgne {

struct GeneratorOptions {
  Index agents = 3;
  Index dim = 1;
  Index constraints = 0;
  std::uint64_t seed = 0;
  /// Scale of the aggregate coupling matrix c.
  double aggregate_strength = 0.3;
};

/// Random quadratic aggregative game with exact (eta, lip_f).
///
/// c = S + K with S positive semidefinite and K skew, so the pseudo-gradient is strongly monotone with
/// eta >= min_i q_i. Coupling rows are drawn uniformly and b = A x_c + margin with x_c the box centre
/// and margin in [0.5, 1.5], which makes the game strictly feasible.
GameSpecd random_game(const GeneratorOptions& options);

}  // namespace vgne
