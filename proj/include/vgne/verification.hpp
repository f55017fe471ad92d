#pragma once

#include <cstdint>
#include <limits>
#include <optional>
#include <string>

#include "vgne/inclusion.hpp"
#include "vgne/random.hpp"
#include "vgne/preconditioner.hpp"
#include "vgne/solvers.hpp"

namespace vgne {

/// KKT conditions of the variational equilibrium with a shared multiplier mu:
/// 0 in grad_i J_i + N_{Omega_i}(x_i) + A_i^T mu, 0 <= mu _|_ b - A x >= 0.
struct KktReport {
  /// Distance from -(grad_i J_i + A_i^T mu) to N_{Omega_i}(x_i), one entry per agent.
  Vectord stationarity;
  /// |max(Ax - b, 0)|_inf.
  double primal_violation = 0;
  /// Largest distance of x outside Omega.
  double box_violation = 0;
  /// |max(-mu, 0)|_inf.
  double dual_nonneg_violation = 0;
  /// |mu^T (Ax - b)|.
  double complementarity_gap = 0;

  double max_stationarity() const { return stationarity.size() ? stationarity.maxCoeff() : 0.0; }
  bool passes(double tol) const {
    return max_stationarity() <= tol && primal_violation <= tol && box_violation <= tol &&
           dual_nonneg_violation <= tol && complementarity_gap <= tol;
  }
};

/// Coordinates of x within `active_tol` of a bound are treated as lying on that face.
KktReport check_kkt(const PrimalDualPointd& point, const GameSpecd& spec, double active_tol = 1e-9);

struct OracleStats {
  long candidates = 0;
  long singular_skipped = 0;
  long verified = 0;
};

/// Heuristic search for x in Omega with Ax < b: the box centre, then projected Polyak steps on
/// max_j (Ax - b)_j. Returns nullopt when nothing is found within max_iters; not a proof of infeasibility.
std::optional<Vectord> find_strictly_feasible_point(const GameSpecd& spec, long max_iters = 10'000);

/// Exact variational equilibrium of a quadratic game by exhaustive active-set enumeration.
///
/// Every coordinate is guessed at its lower bound, free, or at its upper bound and every coupling
/// row active or inactive; each guess gives a linear system whose solution is kept when all sign
/// and feasibility conditions hold at 1e-9. Throws when 3^{nN} 2^m exceeds `budget`, when no
/// strictly feasible point is found, and when zero or several distinct primal solutions verify.
PrimalDualPointd oracle_vgne(const GameSpecd& spec, OracleStats* stats = nullptr, long budget = 1'000'000);

/// Number of active-set candidates the oracle enumerates, saturating at LONG_MAX.
long oracle_candidate_count(const GameSpecd& spec);

/// Empirical monotonicity and Lipschitz estimates from random pairs in Omega. Not certified.
struct SampledConstants {
  double eta_hat = 0;
  double lip_hat = 0;
  long sample_count = 0;
  std::uint64_t seed = 0;
};

SampledConstants estimate_constants(const GameSpecd& spec, long samples, std::uint64_t seed);

struct EquivalenceDetails {
  /// |pfb_step(omega*) - omega*| at the oracle solution.
  double oracle_step = 0;
  /// Largest natural residual among near-fixed points found by iteration.
  double worst_near_fixed_residual = 0;
  long near_fixed_points = 0;
  /// Euclidean step below which an iterate counts as near-fixed.
  double step_threshold = 0;
};

/// Numerically checks zer(A + B) = fix(FB map) for a quadratic game:
/// (a) the oracle point moves by at most tol under one pfb step;
/// (b) pfb iterates from several starts whose step is at most tol / (10 kappa) have natural residual <= tol,
///     where kappa = max(1, 1/alpha_min) + max(1, 1/gamma) + 2 max(1, gamma) |A| converts an FB step into a
///     bound on the unit-step natural residual.
bool check_zer_fix_equivalence(const GameSpecd& spec, const PreconditionerS<double>& phi, double tol,
                               EquivalenceDetails* details = nullptr, std::uint64_t seed = 0);

// ---------------------------------------------------------------------------
// Sampled certificates.

struct CertificateResult {
  long samples = 0;
  long failures = 0;
  /// Smallest (lhs - rhs) over all samples; negative beyond the slack means failure.
  double worst_margin = std::numeric_limits<double>::infinity();

  bool ok() const { return failures == 0 && samples > 0; }
  void record(double margin, double slack) {
    ++samples;
    worst_margin = std::min(worst_margin, margin);
    if (margin < -slack) ++failures;
  }
};

/// Random primal-dual point with x uniform in Omega and lambda uniform in [0, lambda_scale]^m.
/// A fraction of coordinates is snapped to a bound so faces get exercised.
PrimalDualPointd sample_point(const GameSpecd& spec, Rng& rng, double lambda_scale = 5.0);

/// Chain <A(w1) - A(w2), w1 - w2> = <F(x1) - F(x2), x1 - x2> >= eta |x1 - x2|^2 >= (eta/lip_f^2) |F(x1) - F(x2)|^2,
/// every link checked on each pair.
CertificateResult sample_forward_chain(const GameSpecd& spec, const Monotonicity<double>& mono, long pairs,
                                       std::uint64_t seed, double slack);

/// <A(w1) - A(w2), w1 - w2> >= (eta/lip_f^2) |A(w1) - A(w2)|^2.
CertificateResult sample_forward_cocoercivity(const GameSpecd& spec, const Monotonicity<double>& mono, long pairs,
                                              std::uint64_t seed, double slack);

/// <Phi^{-1} dA, dw>_Phi >= beta |Phi^{-1} dA|^2_Phi, with Phi^{-1} applied through a dense factorization.
CertificateResult sample_phi_cocoercivity(const GameSpecd& spec, const PreconditionerS<double>& phi, double beta,
                                          long pairs, std::uint64_t seed, double slack);

/// |T w1 - T w2|^2_Phi <= |w1 - w2|^2_Phi - ((1 - theta)/theta) |(w1 - T w1) - (w2 - T w2)|^2_Phi for T = pfb_step.
CertificateResult sample_averagedness(const GameSpecd& spec, const PreconditionerS<double>& phi, double theta,
                                      long pairs, std::uint64_t seed, double slack);

/// Monotonicity of B = N_{Omega x R^m_+} + skew on random pairs with random normal-cone elements.
CertificateResult sample_backward_monotonicity(const GameSpecd& spec, long pairs, std::uint64_t seed, double slack);

}  // namespace vgne
