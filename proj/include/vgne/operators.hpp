#pragma once

#include <cassert>
#include <cmath>

#include "vgne/game.hpp"

namespace vgne {

/// Componentwise clamp of y onto the box.
template <typename Scalar>
Vector<Scalar> project_box(const Vector<Scalar>& y, const BoxSet<Scalar>& set) {
  detail::require_size("project_box: y", set.dim(), y.size());
  return y.cwiseMax(set.lower()).cwiseMin(set.upper());
}

/// Projection onto the nonnegative orthant.
template <typename Scalar>
Vector<Scalar> project_nonneg(const Vector<Scalar>& y) {
  return y.cwiseMax(Scalar(0));
}

/// Projection onto Omega = Omega_1 x ... x Omega_N, agent by agent.
template <typename Scalar>
Vector<Scalar> project_omega(const Vector<Scalar>& x, const GameSpec<Scalar>& spec) {
  detail::require_size("project_omega: x", spec.stacked_dim(), x.size());
  const Index n = spec.dim();
  Vector<Scalar> out(x.size());
  for (Index i = 0; i < spec.num_agents(); ++i) {
    const auto& box = spec.local_set(i);
    out.segment(i * n, n) = x.segment(i * n, n).cwiseMax(box.lower()).cwiseMin(box.upper());
  }
  return out;
}

/// Whether v lies in the normal cone of the box at x, with an active-set band of width tol.
///
/// Coordinates strictly inside the band need |v_j| <= tol, coordinates at the upper face need
/// v_j >= -tol and at the lower face v_j <= tol. Fixed coordinates (lower == upper) accept any v_j.
/// Throws when x is outside the box by more than tol.
template <typename Scalar>
bool normal_cone_membership(const Vector<Scalar>& v, const Vector<Scalar>& x, const BoxSet<Scalar>& set, Scalar tol) {
  detail::require_size("normal_cone_membership: v", set.dim(), v.size());
  detail::require_size("normal_cone_membership: x", set.dim(), x.size());
  if (!set.contains(x, tol)) throw InvalidArgument("normal_cone_membership: x is outside the set, normal cone is empty");
  for (Index j = 0; j < v.size(); ++j) {
    const Scalar lo = set.lower()[j];
    const Scalar hi = set.upper()[j];
    if (std::isnan(v[j])) return false;
    // The normal cone of a singleton coordinate is the whole line.
    if (lo == hi) continue;
    bool at_upper = x[j] >= hi - tol;
    bool at_lower = x[j] <= lo + tol;
    if (at_upper && at_lower) {
      // Box narrower than the band: use the nearer face.
      at_lower = (x[j] - lo) <= (hi - x[j]);
      at_upper = !at_lower;
    }
    if (at_upper) {
      if (v[j] < -tol) return false;
    } else if (at_lower) {
      if (v[j] > tol) return false;
    } else if (std::abs(v[j]) > tol) {
      return false;
    }
  }
  return true;
}

/// A(omega) = col(F(x), b). Independent of lambda.
template <typename Scalar>
Vector<Scalar> eval_forward(const PrimalDualPoint<Scalar>& omega, const GameSpec<Scalar>& spec) {
  detail::require_size("eval_forward: lambda", spec.num_constraints(), omega.lambda.size());
  Vector<Scalar> out(spec.stacked_dim() + spec.num_constraints());
  out << pseudo_gradient(omega.x, spec), spec.coupling().b();
  return out;
}

/// Natural-map residual of the KKT operator T at omega, with unit step:
/// | col(x - P_Omega(x - (F(x) + A^T lambda)), lambda - P_+(lambda + A x - b)) |.
template <typename Scalar>
Scalar eval_T_residual(const PrimalDualPoint<Scalar>& omega, const GameSpec<Scalar>& spec) {
  detail::require_size("eval_T_residual: lambda", spec.num_constraints(), omega.lambda.size());
  const auto& A = spec.coupling().stacked();
  Vector<Scalar> g = pseudo_gradient(omega.x, spec);
  if (spec.num_constraints() > 0) g.noalias() += A.transpose() * omega.lambda;
  const Scalar rx2 = (omega.x - project_omega(Vector<Scalar>(omega.x - g), spec)).squaredNorm();
  Scalar rl2 = 0;
  if (spec.num_constraints() > 0) {
    const Vector<Scalar> slack = A * omega.x - spec.coupling().b();
    rl2 = (omega.lambda - project_nonneg(Vector<Scalar>(omega.lambda + slack))).squaredNorm();
  }
  return std::sqrt(rx2 + rl2);
}

/// The splitting T = A + B: forward part, skew linear part of B, and the cone Omega x R^m_{>=0}.
template <typename Scalar>
struct SplitOperatorPair {
  const GameSpec<Scalar>* spec = nullptr;
  Matrix<Scalar> backward_skew;
  BoxSet<Scalar> backward_cone;

  Index primal_dim() const { return spec->stacked_dim(); }

  Vector<Scalar> forward(const Vector<Scalar>& omega) const {
    return eval_forward(PrimalDualPoint<Scalar>::from_stacked(omega, primal_dim()), *spec);
  }
};

/// Builds the splitting for a game. The returned object refers to `spec`, which must outlive it.
template <typename Scalar>
SplitOperatorPair<Scalar> make_split(const GameSpec<Scalar>& spec) {
  const Index nx = spec.stacked_dim();
  const Index m = spec.num_constraints();
  SplitOperatorPair<Scalar> pair;
  pair.spec = &spec;
  pair.backward_skew = Matrix<Scalar>::Zero(nx + m, nx + m);
  if (m > 0) {
    const auto& A = spec.coupling().stacked();
    pair.backward_skew.topRightCorner(nx, m) = A.transpose();
    pair.backward_skew.bottomLeftCorner(m, nx) = -A;
  }
  assert((pair.backward_skew + pair.backward_skew.transpose()).isZero(0));

  const BoxSet<Scalar> omega_box = spec.collective_box();
  Vector<Scalar> lo(nx + m);
  Vector<Scalar> hi(nx + m);
  lo << omega_box.lower(), Vector<Scalar>::Zero(m);
  hi << omega_box.upper(), Vector<Scalar>::Constant(m, std::numeric_limits<Scalar>::infinity());
  pair.backward_cone = BoxSet<Scalar>(std::move(lo), std::move(hi));
  return pair;
}

}  // namespace vgne
