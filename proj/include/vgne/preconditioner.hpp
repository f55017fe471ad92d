#pragma once

#include <type_traits>

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>
#include <Eigen/SVD>

#include <cmath>
#include <limits>
#include <sstream>

#include "vgne/game.hpp"

namespace vgne {

/// Largest singular value of A. Full SVD when min(rows, cols) <= 64, otherwise power iteration on
/// A^T A from the all-ones vector to relative tolerance 1e-10.
template <typename Derived>
typename Derived::Scalar operator_norm(const Eigen::MatrixBase<Derived>& A) {
  using Scalar = typename Derived::Scalar;
  if (A.size() == 0) return Scalar(0);
  if (std::min(A.rows(), A.cols()) <= 64) {
    Eigen::JacobiSVD<Matrix<Scalar>> svd(A.derived());
    return svd.singularValues()(0);
  }

  constexpr int kMaxIters = 10'000;
  constexpr double kRelTol = 1e-10;
  Vector<Scalar> v = Vector<Scalar>::Ones(A.cols());
  v.normalize();
  Scalar rayleigh = 0;
  for (int it = 0; it < kMaxIters; ++it) {
    Vector<Scalar> w = A.transpose() * (A * v);
    const Scalar norm_w = w.norm();
    if (norm_w == Scalar(0)) return Scalar(0);
    const Scalar next = v.dot(w);
    v = w / norm_w;
    if (it > 0 && std::abs(next - rayleigh) <= Scalar(kRelTol) * std::abs(next)) {
      return std::sqrt(std::max(next, Scalar(0)));
    }
    rayleigh = next;
  }
  std::ostringstream msg;
  msg << "operator_norm: power iteration did not converge in " << kMaxIters
      << " iterations (last Rayleigh quotient " << rayleigh << ")";
  throw NumericalError(msg.str());
}

/// Symmetric preconditioner [[alpha^{-1}, -A^T], [-A, gamma^{-1} I]] with alpha = diag(alpha_i) (x) I_n.
template <typename Scalar>
class PreconditionerS {
 public:
  PreconditionerS(Vector<Scalar> alphas, Scalar gamma, Matrix<Scalar> A, Index dim)
      : alphas_(std::move(alphas)), gamma_(gamma), A_(std::move(A)), dim_(dim) {
    coupling_norm_ = operator_norm(A_);
  }

  const Vector<Scalar>& alphas() const { return alphas_; }
  Scalar gamma() const { return gamma_; }
  Scalar coupling_norm() const { return coupling_norm_; }
  const Matrix<Scalar>& coupling_matrix() const { return A_; }
  Index dim() const { return dim_; }
  Index num_agents() const { return alphas_.size(); }
  Index primal_dim() const { return dim_ * alphas_.size(); }
  Index dual_dim() const { return A_.rows(); }

  Scalar alpha_max() const { return alphas_.maxCoeff(); }
  Scalar alpha_min() const { return alphas_.minCoeff(); }

  /// Per-coordinate primal steps, diag(alpha) (x) 1_n.
  Vector<Scalar> primal_steps() const {
    Vector<Scalar> out(primal_dim());
    for (Index i = 0; i < num_agents(); ++i) out.segment(i * dim_, dim_).setConstant(alphas_[i]);
    return out;
  }

  Matrix<Scalar> dense_matrix() const {
    const Index nx = primal_dim();
    const Index m = dual_dim();
    Matrix<Scalar> phi = Matrix<Scalar>::Zero(nx + m, nx + m);
    phi.topLeftCorner(nx, nx).diagonal() = primal_steps().cwiseInverse();
    if (m > 0) {
      phi.topRightCorner(nx, m) = -A_.transpose();
      phi.bottomLeftCorner(m, nx) = -A_;
      phi.bottomRightCorner(m, m).diagonal().setConstant(Scalar(1) / gamma_);
    }
    return phi;
  }

  /// <u, v>_Phi = u^T Phi v without forming Phi.
  Scalar inner(const Vector<Scalar>& u, const Vector<Scalar>& v) const {
    const Index nx = primal_dim();
    const Index m = dual_dim();
    const auto ux = u.head(nx);
    const auto vx = v.head(nx);
    Scalar acc = 0;
    for (Index i = 0; i < num_agents(); ++i) {
      acc += ux.segment(i * dim_, dim_).dot(vx.segment(i * dim_, dim_)) / alphas_[i];
    }
    if (m > 0) {
      const auto ul = u.tail(m);
      const auto vl = v.tail(m);
      acc -= ul.dot(A_ * vx) + vl.dot(A_ * ux);
      acc += ul.dot(vl) / gamma_;
    }
    return acc;
  }

  /// |v|_Phi. Clamped at zero for vectors where rounding makes v^T Phi v slightly negative.
  Scalar norm(const Vector<Scalar>& v) const { return std::sqrt(std::max(inner(v, v), Scalar(0))); }

 private:
  Vector<Scalar> alphas_;
  Scalar gamma_;
  Matrix<Scalar> A_;
  Index dim_;
  Scalar coupling_norm_ = 0;
};

template <typename Scalar>
PreconditionerS<Scalar> build_phi_s(const std::type_identity_t<Vector<Scalar>>& alphas, std::type_identity_t<Scalar> gamma,
                                    const CouplingConstraint<Scalar>& coupling) {
  if (alphas.size() == 0) throw InvalidArgument("build_phi_s: at least one step size is required");
  for (Index i = 0; i < alphas.size(); ++i) {
    if (!(alphas[i] > 0) || !std::isfinite(alphas[i])) {
      throw InvalidArgument("build_phi_s: alpha[" + std::to_string(i) + "] must be positive and finite");
    }
  }
  if (!(gamma > 0) || !std::isfinite(gamma)) throw InvalidArgument("build_phi_s: gamma must be positive and finite");
  detail::require_size("build_phi_s: alphas", coupling.num_agents(), alphas.size());
  const Index dim = coupling.block(0).cols();
  return PreconditionerS<Scalar>(alphas, gamma, coupling.stacked(), dim);
}

struct PositiveDefiniteCheck {
  /// gamma < 1 / (|A|^2 alpha_max) with positive steps.
  bool sufficient_condition;
  /// LLT factorization of the dense preconditioner succeeded.
  bool cholesky_succeeds;
};

template <typename Scalar>
PositiveDefiniteCheck check_positive_definite(const PreconditionerS<Scalar>& phi) {
  const Scalar a2 = phi.coupling_norm() * phi.coupling_norm();
  const bool positive = phi.gamma() > 0 && phi.alpha_min() > 0;
  const bool sufficient = positive && (a2 == Scalar(0) || phi.gamma() * a2 * phi.alpha_max() < Scalar(1));
  Eigen::LLT<Matrix<Scalar>> llt(phi.dense_matrix());
  return {sufficient, llt.info() == Eigen::Success};
}

/// Upper bound on gamma for global convergence:
/// (1/|A|^2) (1/alpha_max - 1/(2 eta/lip_f^2)). +inf when |A| = 0.
template <typename Scalar>
Scalar gamma_max(const Vector<Scalar>& alphas, Scalar eta, Scalar lip_f, Scalar coupling_norm) {
  if (!(eta > 0) || !(lip_f > 0)) throw InvalidArgument("gamma_max: eta and lip_f must be positive");
  if (alphas.size() == 0 || !(alphas.minCoeff() > 0)) throw InvalidArgument("gamma_max: step sizes must be positive");
  const Scalar bound = Scalar(2) * eta / (lip_f * lip_f);
  const Scalar amax = alphas.maxCoeff();
  if (!(amax < bound)) {
    std::ostringstream msg;
    msg << "gamma_max: alpha_max = " << amax << " violates alpha_i < 2 eta / lip_f^2 = " << bound;
    throw InvalidArgument(msg.str());
  }
  if (coupling_norm == Scalar(0)) return std::numeric_limits<Scalar>::infinity();
  return (Scalar(1) / amax - Scalar(1) / bound) / (coupling_norm * coupling_norm);
}

/// Bound on a common step alpha_i = gamma that keeps the FB map averaged:
/// (-1 + sqrt(1 + |A|^2 k^2)) / (|A|^2 k) with k = 4 eta / lip_f^2. +inf when |A| = 0.
template <typename Scalar>
Scalar equal_step_bound(Scalar eta, Scalar lip_f, Scalar coupling_norm) {
  if (!(eta > 0) || !(lip_f > 0)) throw InvalidArgument("equal_step_bound: eta and lip_f must be positive");
  if (coupling_norm == Scalar(0)) return std::numeric_limits<Scalar>::infinity();
  const Scalar k = Scalar(4) * eta / (lip_f * lip_f);
  const Scalar a2 = coupling_norm * coupling_norm;
  // Rationalized form of the same quantity: k / (1 + sqrt(1 + a2 k^2)). Avoids cancellation for tiny |A|.
  return k / (Scalar(1) + std::sqrt(Scalar(1) + a2 * k * k));
}

/// Smallest eigenvalue of the Schur block alpha^{-1} - gamma A^T A.
template <typename Scalar>
Scalar schur_lambda_min(const PreconditionerS<Scalar>& phi) {
  Matrix<Scalar> S = -phi.gamma() * (phi.coupling_matrix().transpose() * phi.coupling_matrix());
  S.diagonal() += phi.primal_steps().cwiseInverse();
  Eigen::SelfAdjointEigenSolver<Matrix<Scalar>> eig(S, Eigen::EigenvaluesOnly);
  return eig.eigenvalues().minCoeff();
}

/// Cocoercivity of Phi^{-1} A in the Phi-norm: (eta/lip_f^2) lambda_min(alpha^{-1} - gamma A^T A).
template <typename Scalar>
Scalar cocoercivity_beta(const PreconditionerS<Scalar>& phi, Scalar eta, Scalar lip_f) {
  if (!(eta > 0) || !(lip_f > 0)) throw InvalidArgument("cocoercivity_beta: eta and lip_f must be positive");
  const Scalar lmin = schur_lambda_min(phi);
  if (!(lmin > 0)) {
    throw InvalidArgument("cocoercivity_beta: alpha^{-1} - gamma A^T A is not positive definite (lambda_min = " +
                          std::to_string(static_cast<double>(lmin)) + ")");
  }
  return eta / (lip_f * lip_f) * lmin;
}

/// Averagedness constant of the FB map, 2 beta / (4 beta - 1). Requires beta > 1/2.
template <typename Scalar>
Scalar averagedness_theta(Scalar beta) {
  if (!(beta > Scalar(0.5))) {
    throw InvalidArgument("averagedness_theta: beta = " + std::to_string(static_cast<double>(beta)) +
                          " <= 1/2, step sizes too large for an averagedness certificate");
  }
  if (std::isinf(beta)) return Scalar(0.5);
  return Scalar(2) * beta / (Scalar(4) * beta - Scalar(1));
}

/// Lower-triangular asymmetric-projection matrix D = [[tau^{-1} I, 0], [-2A, tau^{-1} I]].
template <typename Scalar>
class ApaMatrix {
 public:
  ApaMatrix(Scalar tau, Matrix<Scalar> A) : tau_(tau), A_(std::move(A)) {}

  Scalar tau() const { return tau_; }
  const Matrix<Scalar>& coupling_matrix() const { return A_; }

  Matrix<Scalar> dense_matrix() const {
    const Index nx = A_.cols();
    const Index m = A_.rows();
    Matrix<Scalar> D = Matrix<Scalar>::Zero(nx + m, nx + m);
    D.diagonal().setConstant(Scalar(1) / tau_);
    if (m > 0) D.bottomLeftCorner(m, nx) = Scalar(-2) * A_;
    return D;
  }

  Matrix<Scalar> symmetric_part() const {
    const Matrix<Scalar> D = dense_matrix();
    return Scalar(0.5) * (D + D.transpose());
  }

 private:
  Scalar tau_;
  Matrix<Scalar> A_;
};

template <typename Scalar>
ApaMatrix<Scalar> build_apa_matrix(std::type_identity_t<Scalar> tau, const CouplingConstraint<Scalar>& coupling) {
  if (!(tau > 0) || !std::isfinite(tau)) throw InvalidArgument("build_apa_matrix: tau must be positive and finite");
  return ApaMatrix<Scalar>(tau, coupling.stacked());
}

// ---------------------------------------------------------------------------
// Step-size policies.

template <typename Scalar>
struct StepSizes {
  Vector<Scalar> alphas;
  Scalar gamma;
};

/// alpha_i = alpha_fraction * 2 eta / lip_f^2 and gamma = safety * gamma_max.
/// When |A| = 0 (including m = 0) gamma_max is unbounded and gamma = 1.
template <typename Scalar>
StepSizes<Scalar> theorem1_steps(const Monotonicity<Scalar>& mono, Scalar coupling_norm, Index num_agents,
                                 Scalar alpha_fraction = Scalar(0.9), Scalar safety = Scalar(0.99)) {
  if (!(alpha_fraction > 0 && alpha_fraction < 1)) throw InvalidArgument("theorem1_steps: alpha_fraction must be in (0, 1)");
  if (!(safety > 0 && safety < 1)) throw InvalidArgument("theorem1_steps: safety must be in (0, 1)");
  const Scalar alpha = alpha_fraction * Scalar(2) * mono.cocoercivity();
  Vector<Scalar> alphas = Vector<Scalar>::Constant(num_agents, alpha);
  const Scalar gmax = gamma_max(alphas, mono.eta, mono.lip_f, coupling_norm);
  const Scalar gamma = std::isinf(gmax) ? Scalar(1) : safety * gmax;
  return {std::move(alphas), gamma};
}

/// alpha_i = gamma = safety * (equal-step bound), capped by safety * 2 eta / lip_f^2.
template <typename Scalar>
StepSizes<Scalar> equal_steps(const Monotonicity<Scalar>& mono, Scalar coupling_norm, Index num_agents,
                              Scalar safety = Scalar(0.99)) {
  if (!(safety > 0 && safety < 1)) throw InvalidArgument("equal_steps: safety must be in (0, 1)");
  const Scalar bound = std::min(equal_step_bound(mono.eta, mono.lip_f, coupling_norm), Scalar(2) * mono.cocoercivity());
  const Scalar step = safety * bound;
  return {Vector<Scalar>::Constant(num_agents, step), step};
}

}  // namespace vgne
