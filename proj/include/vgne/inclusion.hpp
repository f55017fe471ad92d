#pragma once

#include <functional>

#include "vgne/network.hpp"
#include "vgne/operators.hpp"
#include "vgne/preconditioner.hpp"

namespace vgne {

/// A splitting A + B of a monotone operator, with B = N_C + (linear part), together with the
/// preconditioner of a forward-backward iteration on it. C is a box over the stacked variable;
/// blocks with infinite bounds on both sides carry the cone {0}.
template <typename Scalar>
struct InclusionSplitting {
  std::function<Vector<Scalar>(const Vector<Scalar>&)> forward;
  Matrix<Scalar> backward_linear;
  BoxSet<Scalar> cone;
  Matrix<Scalar> phi;
};

/// Checks -A(prev) in B(next) + Phi (next - prev) up to tol.
///
/// Forms r = -A(prev) - L next - Phi (next - prev), where L is the linear part of B, and tests
/// r in N_C(next) coordinatewise. Throws when next lies outside C by more than tol.
template <typename Scalar>
bool check_fb_inclusion(const Vector<Scalar>& prev, const Vector<Scalar>& next, const InclusionSplitting<Scalar>& split,
                        Scalar tol) {
  detail::require_size("check_fb_inclusion: prev", split.cone.dim(), prev.size());
  detail::require_size("check_fb_inclusion: next", split.cone.dim(), next.size());
  const Vector<Scalar> r = -split.forward(prev) - split.backward_linear * next - split.phi * (next - prev);
  return normal_cone_membership(r, next, split.cone, tol);
}

/// Splitting of the KKT operator with the symmetric preconditioner: A = col(F(x), b),
/// B = N_{Omega x R^m_+} + [[0, A^T], [-A, 0]]. Refers to `spec`, which must outlive the result.
template <typename Scalar>
InclusionSplitting<Scalar> pfb_inclusion_splitting(const GameSpec<Scalar>& spec, const PreconditionerS<Scalar>& phi) {
  const SplitOperatorPair<Scalar> pair = make_split(spec);
  const GameSpec<Scalar>* s = &spec;
  const Index nx = spec.stacked_dim();
  return {[s, nx](const Vector<Scalar>& omega) {
            return eval_forward(PrimalDualPoint<Scalar>::from_stacked(omega, nx), *s);
          },
          pair.backward_skew, pair.backward_cone, phi.dense_matrix()};
}

/// Same inclusion with an arbitrary (possibly non-symmetric) preconditioner matrix, e.g. the APA matrix D
/// paired with R = A + skew and B = N_C.
template <typename Scalar>
InclusionSplitting<Scalar> apa_inclusion_splitting(const GameSpec<Scalar>& spec, const ApaMatrix<Scalar>& D) {
  const SplitOperatorPair<Scalar> pair = make_split(spec);
  const GameSpec<Scalar>* s = &spec;
  const Index nx = spec.stacked_dim();
  const Matrix<Scalar> skew = pair.backward_skew;
  return {[s, nx, skew](const Vector<Scalar>& omega) -> Vector<Scalar> {
            return eval_forward(PrimalDualPoint<Scalar>::from_stacked(omega, nx), *s) + skew * omega;
          },
          Matrix<Scalar>::Zero(nx + spec.num_constraints(), nx + spec.num_constraints()), pair.backward_cone,
          D.dense_matrix()};
}

/// Splitting over (x, sigma) that reproduces the networked projected-gradient iteration:
///   A(x, s) = col(F_sigma(x, s), 0) + 1/2 [[0, -P], [P, 0]] (x, s)
///   B(x, s) = col(N_Omega(x), L_n s) + 1/2 [[0, P], [-P, 0]] (x, s)
///   Phi     = [[alpha^{-1} I, -P/2], [-P/2, P]]
/// with P = I + E (x) I_n and L_n = L (x) I_n. The sigma block carries no cone.
template <typename Scalar>
InclusionSplitting<Scalar> kns_inclusion_splitting(const GameSpec<Scalar>& spec, const CommGraph& graph, Scalar alpha,
                                                   EstimateConvention convention) {
  const Index n = spec.dim();
  const Index nx = spec.stacked_dim();
  const Matrix<Scalar> In = Matrix<Scalar>::Identity(n, n);
  const Matrix<Scalar> E = graph.adjacency_matrix<Scalar>();
  const Matrix<Scalar> L = graph.laplacian<Scalar>();
  Matrix<Scalar> P = Matrix<Scalar>::Identity(nx, nx);
  Matrix<Scalar> Ln = Matrix<Scalar>::Zero(nx, nx);
  for (Index i = 0; i < graph.num_nodes(); ++i) {
    for (Index j = 0; j < graph.num_nodes(); ++j) {
      P.block(i * n, j * n, n, n) += E(i, j) * In;
      Ln.block(i * n, j * n, n, n) = L(i, j) * In;
    }
  }

  Matrix<Scalar> half_skew = Matrix<Scalar>::Zero(2 * nx, 2 * nx);
  half_skew.topRightCorner(nx, nx) = Scalar(0.5) * P;
  half_skew.bottomLeftCorner(nx, nx) = Scalar(-0.5) * P;

  Matrix<Scalar> backward = half_skew;
  backward.bottomRightCorner(nx, nx) += Ln;

  Matrix<Scalar> phi = Matrix<Scalar>::Zero(2 * nx, 2 * nx);
  phi.topLeftCorner(nx, nx).diagonal().setConstant(Scalar(1) / alpha);
  phi.topRightCorner(nx, nx) = Scalar(-0.5) * P;
  phi.bottomLeftCorner(nx, nx) = Scalar(-0.5) * P;
  phi.bottomRightCorner(nx, nx) = P;

  const BoxSet<Scalar> omega_box = spec.collective_box();
  const Scalar inf = std::numeric_limits<Scalar>::infinity();
  Vector<Scalar> lo(2 * nx);
  Vector<Scalar> hi(2 * nx);
  lo << omega_box.lower(), Vector<Scalar>::Constant(nx, -inf);
  hi << omega_box.upper(), Vector<Scalar>::Constant(nx, inf);

  const GameSpec<Scalar>* s = &spec;
  return {[s, nx, half_skew, convention](const Vector<Scalar>& w) -> Vector<Scalar> {
            Vector<Scalar> out(2 * nx);
            out << extended_pseudo_gradient(Vector<Scalar>(w.head(nx)), Vector<Scalar>(w.tail(nx)), *s, convention),
                Vector<Scalar>::Zero(nx);
            return out - half_skew * w;
          },
          std::move(backward), BoxSet<Scalar>(std::move(lo), std::move(hi)), std::move(phi)};
}

}  // namespace vgne
