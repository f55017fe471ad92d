#pragma once

#include <Eigen/Core>
#include <Eigen/Eigenvalues>
#include <Eigen/SVD>

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <optional>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "vgne/error.hpp"

namespace vgne {

using Index = Eigen::Index;

template <typename Scalar>
using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

template <typename Scalar>
using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

namespace detail {

template <typename Derived>
bool all_finite(const Eigen::MatrixBase<Derived>& v) {
  return v.array().isFinite().all();
}

inline void require_size(const char* what, Index expected, Index received) {
  if (expected != received) throw DimensionError(what, expected, received);
}

}  // namespace detail

/// Axis-aligned box {y : lower <= y <= upper}; infinite bounds are allowed.
template <typename Scalar>
class BoxSet {
 public:
  BoxSet() = default;

  BoxSet(Vector<Scalar> lower, Vector<Scalar> upper) : lower_(std::move(lower)), upper_(std::move(upper)) {
    detail::require_size("BoxSet upper bound", lower_.size(), upper_.size());
    for (Index j = 0; j < lower_.size(); ++j) {
      if (std::isnan(lower_[j]) || std::isnan(upper_[j]) || !(lower_[j] <= upper_[j])) {
        throw InvalidArgument("BoxSet: lower > upper in coordinate " + std::to_string(j));
      }
    }
  }

  static BoxSet uniform(Index dim, Scalar lower, Scalar upper) {
    return BoxSet(Vector<Scalar>::Constant(dim, lower), Vector<Scalar>::Constant(dim, upper));
  }

  static BoxSet nonnegative(Index dim) {
    return uniform(dim, Scalar(0), std::numeric_limits<Scalar>::infinity());
  }

  static BoxSet whole_space(Index dim) {
    const Scalar inf = std::numeric_limits<Scalar>::infinity();
    return uniform(dim, -inf, inf);
  }

  Index dim() const { return lower_.size(); }
  const Vector<Scalar>& lower() const { return lower_; }
  const Vector<Scalar>& upper() const { return upper_; }

  bool bounded() const { return detail::all_finite(lower_) && detail::all_finite(upper_); }

  bool contains(const Vector<Scalar>& y, Scalar tol = Scalar(0)) const {
    detail::require_size("BoxSet::contains", dim(), y.size());
    return ((y.array() >= lower_.array() - tol) && (y.array() <= upper_.array() + tol)).all();
  }

  /// Midpoint of a bounded box.
  Vector<Scalar> center() const {
    if (!bounded()) throw InvalidArgument("BoxSet::center: box is unbounded");
    return Scalar(0.5) * (lower_ + upper_);
  }

  friend bool operator==(const BoxSet& a, const BoxSet& b) {
    return a.lower_.size() == b.lower_.size() && a.lower_ == b.lower_ && a.upper_ == b.upper_;
  }

 private:
  Vector<Scalar> lower_;
  Vector<Scalar> upper_;
};

/// f_i(x_i, s) = 1/2 q_i |x_i|^2 + (c s + d_i)^T x_i with s the average decision.
template <typename Scalar>
struct QuadraticCost {
  Vector<Scalar> q;
  Matrix<Scalar> c;
  std::vector<Vector<Scalar>> d;

  friend bool operator==(const QuadraticCost& a, const QuadraticCost& b) {
    if (a.q.size() != b.q.size() || a.c.rows() != b.c.rows() || a.c.cols() != b.c.cols() ||
        a.d.size() != b.d.size()) {
      return false;
    }
    if (a.q != b.q || a.c != b.c) return false;
    for (std::size_t i = 0; i < a.d.size(); ++i) {
      if (a.d[i].size() != b.d[i].size() || a.d[i] != b.d[i]) return false;
    }
    return true;
  }
};

/// Costs known only through caller-supplied callbacks.
///
/// `total_gradient(i, x_i, s)` must return the full game gradient of J_i with respect to x_i,
/// including the contribution of x_i through the aggregate, evaluated with the aggregate
/// argument set to `s`. `partial_gradient` (optional) returns the derivative of f_i in its first
/// argument only. `cost` (optional) returns f_i(x_i, s) and is used for finite-difference checks.
template <typename Scalar>
struct OracleCost {
  using Gradient = std::function<Vector<Scalar>(Index, const Vector<Scalar>&, const Vector<Scalar>&)>;
  using Cost = std::function<Scalar(Index, const Vector<Scalar>&, const Vector<Scalar>&)>;

  Gradient total_gradient;
  Gradient partial_gradient;
  Cost cost;
  std::string label;

  bool bound() const { return static_cast<bool>(total_gradient); }

  friend bool operator==(const OracleCost& a, const OracleCost& b) { return a.label == b.label; }
};

template <typename Scalar>
using CostModel = std::variant<QuadraticCost<Scalar>, OracleCost<Scalar>>;

/// Shared affine constraint A x <= b with A = [A_1, ..., A_N].
template <typename Scalar>
class CouplingConstraint {
 public:
  CouplingConstraint() = default;

  CouplingConstraint(std::vector<Matrix<Scalar>> blocks, Vector<Scalar> b)
      : blocks_(std::move(blocks)), b_(std::move(b)) {
    if (blocks_.empty()) throw InvalidArgument("CouplingConstraint: at least one agent block is required");
    const Index m = b_.size();
    const Index n = blocks_.front().cols();
    for (std::size_t i = 0; i < blocks_.size(); ++i) {
      if (blocks_[i].rows() != m) {
        throw DimensionError("CouplingConstraint: A_blocks[" + std::to_string(i) + "] row count", m,
                             blocks_[i].rows());
      }
      if (blocks_[i].cols() != n) {
        throw DimensionError("CouplingConstraint: A_blocks[" + std::to_string(i) + "] column count", n,
                             blocks_[i].cols());
      }
    }
    stacked_.resize(m, n * static_cast<Index>(blocks_.size()));
    for (std::size_t i = 0; i < blocks_.size(); ++i) {
      stacked_.middleCols(static_cast<Index>(i) * n, n) = blocks_[i];
    }
  }

  /// No coupling (m = 0) for N agents in dimension n.
  static CouplingConstraint none(Index num_agents, Index dim) {
    return CouplingConstraint(std::vector<Matrix<Scalar>>(num_agents, Matrix<Scalar>(0, dim)), Vector<Scalar>(0));
  }

  Index rows() const { return b_.size(); }
  Index num_agents() const { return static_cast<Index>(blocks_.size()); }
  const std::vector<Matrix<Scalar>>& blocks() const { return blocks_; }
  const Matrix<Scalar>& block(Index i) const { return blocks_[static_cast<std::size_t>(i)]; }
  const Matrix<Scalar>& stacked() const { return stacked_; }
  const Vector<Scalar>& b() const { return b_; }

  friend bool operator==(const CouplingConstraint& a, const CouplingConstraint& b) {
    return a.stacked_.rows() == b.stacked_.rows() && a.stacked_.cols() == b.stacked_.cols() &&
           a.stacked_ == b.stacked_ && a.b_ == b.b_ && a.blocks_.size() == b.blocks_.size();
  }

 private:
  std::vector<Matrix<Scalar>> blocks_;
  Vector<Scalar> b_;
  Matrix<Scalar> stacked_;
};

/// Strong monotonicity (eta) and Lipschitz (lip_f) constants of the pseudo-gradient.
template <typename Scalar>
struct Monotonicity {
  Scalar eta;
  Scalar lip_f;

  /// eta / lip_f^2, the cocoercivity constant of the pseudo-gradient.
  Scalar cocoercivity() const { return eta / (lip_f * lip_f); }

  friend bool operator==(const Monotonicity&, const Monotonicity&) = default;
};

template <typename Scalar>
class GameSpec {
 public:
  GameSpec(Index num_agents, Index dim, std::vector<BoxSet<Scalar>> local_sets, CostModel<Scalar> cost,
           CouplingConstraint<Scalar> coupling, std::optional<Monotonicity<Scalar>> monotonicity = std::nullopt)
      : num_agents_(num_agents),
        dim_(dim),
        local_sets_(std::move(local_sets)),
        cost_(std::move(cost)),
        coupling_(std::move(coupling)),
        monotonicity_(monotonicity) {
    validate();
  }

  Index num_agents() const { return num_agents_; }
  Index dim() const { return dim_; }
  /// nN, the length of a collective strategy.
  Index stacked_dim() const { return num_agents_ * dim_; }
  Index num_constraints() const { return coupling_.rows(); }

  const std::vector<BoxSet<Scalar>>& local_sets() const { return local_sets_; }
  const BoxSet<Scalar>& local_set(Index i) const { return local_sets_[static_cast<std::size_t>(i)]; }
  const CostModel<Scalar>& cost() const { return cost_; }
  const CouplingConstraint<Scalar>& coupling() const { return coupling_; }
  const std::optional<Monotonicity<Scalar>>& monotonicity() const { return monotonicity_; }

  bool is_quadratic() const { return std::holds_alternative<QuadraticCost<Scalar>>(cost_); }
  const QuadraticCost<Scalar>& quadratic() const { return std::get<QuadraticCost<Scalar>>(cost_); }

  /// Omega = Omega_1 x ... x Omega_N as a single box over R^{nN}.
  BoxSet<Scalar> collective_box() const {
    Vector<Scalar> lo(stacked_dim());
    Vector<Scalar> hi(stacked_dim());
    for (Index i = 0; i < num_agents_; ++i) {
      lo.segment(i * dim_, dim_) = local_set(i).lower();
      hi.segment(i * dim_, dim_) = local_set(i).upper();
    }
    return BoxSet<Scalar>(std::move(lo), std::move(hi));
  }

  bool bounded() const {
    return std::all_of(local_sets_.begin(), local_sets_.end(), [](const auto& s) { return s.bounded(); });
  }

  GameSpec with_monotonicity(std::optional<Monotonicity<Scalar>> mono) const {
    GameSpec copy = *this;
    copy.monotonicity_ = mono;
    copy.validate();
    return copy;
  }

  friend bool operator==(const GameSpec& a, const GameSpec& b) {
    return a.num_agents_ == b.num_agents_ && a.dim_ == b.dim_ && a.local_sets_ == b.local_sets_ &&
           a.cost_ == b.cost_ && a.coupling_ == b.coupling_ && a.monotonicity_ == b.monotonicity_;
  }

 private:
  void validate() const {
    if (num_agents_ < 1) throw InvalidArgument("GameSpec: num_agents must be >= 1");
    if (dim_ < 1) throw InvalidArgument("GameSpec: decision_dim must be >= 1");
    detail::require_size("GameSpec: local_sets count", num_agents_, static_cast<Index>(local_sets_.size()));
    for (Index i = 0; i < num_agents_; ++i) {
      if (local_set(i).dim() != dim_) {
        throw DimensionError("GameSpec: local_sets[" + std::to_string(i) + "] dimension", dim_, local_set(i).dim());
      }
    }
    detail::require_size("GameSpec: coupling agent blocks", num_agents_, coupling_.num_agents());
    if (coupling_.rows() > 0 || coupling_.stacked().cols() > 0) {
      detail::require_size("GameSpec: coupling columns", stacked_dim(), coupling_.stacked().cols());
    }
    if (const auto* quad = std::get_if<QuadraticCost<Scalar>>(&cost_)) {
      detail::require_size("GameSpec: quadratic q", num_agents_, quad->q.size());
      if (quad->c.rows() != dim_ || quad->c.cols() != dim_) {
        throw DimensionError("GameSpec: quadratic c must be " + std::to_string(dim_) + "x" + std::to_string(dim_));
      }
      detail::require_size("GameSpec: quadratic d count", num_agents_, static_cast<Index>(quad->d.size()));
      for (Index i = 0; i < num_agents_; ++i) {
        if (quad->d[static_cast<std::size_t>(i)].size() != dim_) {
          throw DimensionError("GameSpec: quadratic d[" + std::to_string(i) + "]", dim_,
                               quad->d[static_cast<std::size_t>(i)].size());
        }
        if (!(quad->q[i] > 0)) throw InvalidArgument("GameSpec: quadratic q[" + std::to_string(i) + "] must be > 0");
      }
    }
    if (monotonicity_) {
      if (!(monotonicity_->eta > 0) || !(monotonicity_->lip_f > 0)) {
        throw InvalidArgument("GameSpec: monotonicity constants must be positive");
      }
      if (monotonicity_->eta > monotonicity_->lip_f) {
        throw InvalidArgument("GameSpec: eta must not exceed lip_f");
      }
    }
  }

  Index num_agents_;
  Index dim_;
  std::vector<BoxSet<Scalar>> local_sets_;
  CostModel<Scalar> cost_;
  CouplingConstraint<Scalar> coupling_;
  std::optional<Monotonicity<Scalar>> monotonicity_;
};

/// omega = col(x, lambda).
template <typename Scalar>
struct PrimalDualPoint {
  Vector<Scalar> x;
  Vector<Scalar> lambda;

  static PrimalDualPoint from_stacked(const Vector<Scalar>& omega, Index primal_dim) {
    return {omega.head(primal_dim), omega.tail(omega.size() - primal_dim)};
  }

  Vector<Scalar> stacked() const {
    Vector<Scalar> out(x.size() + lambda.size());
    out << x, lambda;
    return out;
  }
};

using BoxSetd = BoxSet<double>;
using QuadraticCostd = QuadraticCost<double>;
using OracleCostd = OracleCost<double>;
using CouplingConstraintd = CouplingConstraint<double>;
using GameSpecd = GameSpec<double>;
using PrimalDualPointd = PrimalDualPoint<double>;
using Vectord = Vector<double>;
using Matrixd = Matrix<double>;

// ---------------------------------------------------------------------------
// Aggregation and pseudo-gradients.

/// Average decision sigma(x) = (1/N) sum_i x_i.
template <typename Scalar>
Vector<Scalar> aggregate(const Vector<Scalar>& x, const GameSpec<Scalar>& spec) {
  detail::require_size("aggregate: x", spec.stacked_dim(), x.size());
  const Index n = spec.dim();
  Vector<Scalar> s = Vector<Scalar>::Zero(n);
  for (Index i = 0; i < spec.num_agents(); ++i) s += x.segment(i * n, n);
  return s / static_cast<Scalar>(spec.num_agents());
}

/// Which derivative of f_i(x_i, z_i) an extended pseudo-gradient evaluates.
enum class EstimateConvention {
  /// Derivative in the first argument only.
  partial,
  /// Full game gradient, with the aggregate argument replaced by the estimate z_i.
  total_at_estimate,
};

namespace detail {

template <typename Scalar>
void check_gradient_block(const Vector<Scalar>& g, Index agent, Index n) {
  if (g.size() != n) {
    throw DimensionError("cost gradient of agent " + std::to_string(agent), n, g.size());
  }
  if (!all_finite(g)) throw NonFiniteError("cost gradient of agent " + std::to_string(agent) + " is not finite");
}

}  // namespace detail

/// F(x) = col(grad_{x_i} J_i(x_i, x_{-i})).
template <typename Scalar>
Vector<Scalar> pseudo_gradient(const Vector<Scalar>& x, const GameSpec<Scalar>& spec) {
  const Vector<Scalar> s = aggregate(x, spec);
  const Index n = spec.dim();
  const Index N = spec.num_agents();
  Vector<Scalar> g(spec.stacked_dim());

  if (const auto* quad = std::get_if<QuadraticCost<Scalar>>(&spec.cost())) {
    const Vector<Scalar> cs = quad->c * s;
    const Scalar inv_n = Scalar(1) / static_cast<Scalar>(N);
    for (Index i = 0; i < N; ++i) {
      const auto xi = x.segment(i * n, n);
      g.segment(i * n, n) =
          quad->q[i] * xi + cs + inv_n * (quad->c.transpose() * xi) + quad->d[static_cast<std::size_t>(i)];
    }
    if (!detail::all_finite(g)) throw NonFiniteError("pseudo_gradient: non-finite value");
    return g;
  }

  const auto& oracle = std::get<OracleCost<Scalar>>(spec.cost());
  if (!oracle.bound()) throw InvalidArgument("pseudo_gradient: oracle cost '" + oracle.label + "' has no gradient bound");
  for (Index i = 0; i < N; ++i) {
    Vector<Scalar> gi = oracle.total_gradient(i, Vector<Scalar>(x.segment(i * n, n)), s);
    detail::check_gradient_block(gi, i, n);
    g.segment(i * n, n) = gi;
  }
  return g;
}

/// F_sigma(x, z) = col(d f_i(x_i, z_i)) where z_i estimates the aggregate for agent i.
template <typename Scalar>
Vector<Scalar> extended_pseudo_gradient(const Vector<Scalar>& x, const Vector<Scalar>& z, const GameSpec<Scalar>& spec,
                                        EstimateConvention convention = EstimateConvention::partial) {
  detail::require_size("extended_pseudo_gradient: x", spec.stacked_dim(), x.size());
  detail::require_size("extended_pseudo_gradient: z", spec.stacked_dim(), z.size());
  const Index n = spec.dim();
  const Index N = spec.num_agents();
  Vector<Scalar> g(spec.stacked_dim());

  if (const auto* quad = std::get_if<QuadraticCost<Scalar>>(&spec.cost())) {
    const Scalar inv_n = Scalar(1) / static_cast<Scalar>(N);
    for (Index i = 0; i < N; ++i) {
      const auto xi = x.segment(i * n, n);
      auto gi = g.segment(i * n, n);
      gi = quad->q[i] * xi + quad->c * z.segment(i * n, n) + quad->d[static_cast<std::size_t>(i)];
      if (convention == EstimateConvention::total_at_estimate) gi += inv_n * (quad->c.transpose() * xi);
    }
    if (!detail::all_finite(g)) throw NonFiniteError("extended_pseudo_gradient: non-finite value");
    return g;
  }

  const auto& oracle = std::get<OracleCost<Scalar>>(spec.cost());
  const auto& fn = convention == EstimateConvention::partial ? oracle.partial_gradient : oracle.total_gradient;
  if (!fn) {
    throw InvalidArgument("extended_pseudo_gradient: oracle cost '" + oracle.label +
                          "' does not provide the requested gradient convention");
  }
  for (Index i = 0; i < N; ++i) {
    Vector<Scalar> gi = fn(i, Vector<Scalar>(x.segment(i * n, n)), Vector<Scalar>(z.segment(i * n, n)));
    detail::check_gradient_block(gi, i, n);
    g.segment(i * n, n) = gi;
  }
  return g;
}

/// For a quadratic game F(x) = H x + h. Returns (H, h).
template <typename Scalar>
std::pair<Matrix<Scalar>, Vector<Scalar>> affine_form(const GameSpec<Scalar>& spec) {
  const auto& quad = spec.quadratic();
  const Index n = spec.dim();
  const Index N = spec.num_agents();
  const Scalar inv_n = Scalar(1) / static_cast<Scalar>(N);
  Matrix<Scalar> H(n * N, n * N);
  Vector<Scalar> h(n * N);
  for (Index i = 0; i < N; ++i) {
    for (Index j = 0; j < N; ++j) H.block(i * n, j * n, n, n) = inv_n * quad.c;
    H.block(i * n, i * n, n, n) += quad.q[i] * Matrix<Scalar>::Identity(n, n) + inv_n * quad.c.transpose();
    h.segment(i * n, n) = quad.d[static_cast<std::size_t>(i)];
  }
  return {std::move(H), std::move(h)};
}

/// Exact (eta, lip_f) of an affine pseudo-gradient: smallest eigenvalue of the symmetric part of H
/// and largest singular value of H.
template <typename Scalar>
Monotonicity<Scalar> exact_monotonicity(const GameSpec<Scalar>& spec) {
  const Matrix<Scalar> H = affine_form(spec).first;
  const Matrix<Scalar> sym = Scalar(0.5) * (H + H.transpose());
  Eigen::SelfAdjointEigenSolver<Matrix<Scalar>> eig(sym, Eigen::EigenvaluesOnly);
  const Scalar eta = eig.eigenvalues().minCoeff();
  Eigen::JacobiSVD<Matrix<Scalar>> svd(H);
  const Scalar lip = svd.singularValues()(0);
  if (!(eta > 0)) throw InvalidArgument("exact_monotonicity: pseudo-gradient is not strongly monotone");
  return {eta, std::max(lip, eta)};
}

// ---------------------------------------------------------------------------
// Feasibility.

template <typename Scalar>
struct FeasibilityReport {
  struct Violation {
    Index index;
    Scalar amount;
  };

  /// Coordinates of x outside Omega by more than tol.
  std::vector<Violation> box_violations;
  /// max_j (A x - b)_j; -inf when there are no coupling constraints.
  Scalar max_coupling = -std::numeric_limits<Scalar>::infinity();
  /// Components of lambda below -tol.
  std::vector<Violation> dual_violations;
  Scalar tol = Scalar(0);

  /// -max(Ax - b): positive for strictly feasible points.
  Scalar margin() const { return -max_coupling; }
  bool feasible() const { return box_violations.empty() && dual_violations.empty() && max_coupling <= tol; }
};

template <typename Scalar>
FeasibilityReport<Scalar> feasibility_check(const PrimalDualPoint<Scalar>& point, const GameSpec<Scalar>& spec,
                                            Scalar tol) {
  if (tol < 0) throw InvalidArgument("feasibility_check: tol must be >= 0");
  detail::require_size("feasibility_check: x", spec.stacked_dim(), point.x.size());
  detail::require_size("feasibility_check: lambda", spec.num_constraints(), point.lambda.size());

  FeasibilityReport<Scalar> report;
  report.tol = tol;
  const Index n = spec.dim();
  for (Index i = 0; i < spec.num_agents(); ++i) {
    const auto& box = spec.local_set(i);
    for (Index j = 0; j < n; ++j) {
      const Scalar v = point.x[i * n + j];
      const Scalar excess = std::max(box.lower()[j] - v, v - box.upper()[j]);
      if (excess > tol || std::isnan(v)) report.box_violations.push_back({i * n + j, excess});
    }
  }
  if (spec.num_constraints() > 0) {
    report.max_coupling = (spec.coupling().stacked() * point.x - spec.coupling().b()).maxCoeff();
  }
  for (Index j = 0; j < point.lambda.size(); ++j) {
    if (point.lambda[j] < -tol) report.dual_violations.push_back({j, -point.lambda[j]});
  }
  return report;
}

}  // namespace vgne
