#pragma once

#include <type_traits>

#include <chrono>
#include <functional>
#include <optional>
#include <sstream>
#include <string>

#include "vgne/inclusion.hpp"
#include "vgne/network.hpp"
#include "vgne/operators.hpp"
#include "vgne/preconditioner.hpp"
#include "vgne/report.hpp"

namespace vgne {

struct SolverConfig {
  long max_iters = 200'000;
  /// Stop once the Phi-weighted step |omega^{k+1} - omega^k|_Phi drops below this.
  double residual_tol = 1e-8;
  /// Natural KKT residual the final point is expected to meet.
  double kkt_tol = 1e-6;
  long trace_every = 10;
  /// Validate every iterate pair against the forward-backward inclusion.
  bool record_inclusion_checks = false;
  /// Skip the step-size validation against the positive-definiteness and convergence bounds.
  bool allow_unsafe_steps = false;

  void validate() const {
    if (max_iters < 1) throw InvalidArgument("SolverConfig: max_iters must be >= 1");
    if (!(residual_tol > 0) || !(kkt_tol > 0)) throw InvalidArgument("SolverConfig: tolerances must be positive");
    if (trace_every < 1) throw InvalidArgument("SolverConfig: trace_every must be >= 1");
  }
};

template <typename Scalar>
struct SolverState {
  PrimalDualPoint<Scalar> omega;
  long iteration = 0;
  Scalar last_residual = 0;
};

template <typename Scalar>
struct SolveResult {
  PrimalDualPoint<Scalar> point;
  ConvergenceReport report;
};

namespace detail {

template <typename Scalar>
void check_finite_state(const PrimalDualPoint<Scalar>& omega, long iteration) {
  if (!all_finite(omega.x) || !all_finite(omega.lambda)) {
    throw DivergenceError("non-finite iterate", iteration);
  }
}

template <typename Scalar>
void check_finite_vector(const Vector<Scalar>& v, long iteration) {
  if (!all_finite(v)) throw DivergenceError("non-finite iterate", iteration);
}

template <typename Scalar>
double max_coupling_violation(const Vector<Scalar>& x, const GameSpec<Scalar>& spec) {
  if (spec.num_constraints() == 0) return 0.0;
  const Scalar worst = (spec.coupling().stacked() * x - spec.coupling().b()).maxCoeff();
  return static_cast<double>(std::max(worst, Scalar(0)));
}

inline std::string join(const auto& values) {
  std::ostringstream out;
  out.precision(17);
  for (Index i = 0; i < values.size(); ++i) out << (i ? "," : "") << values[i];
  return out.str();
}

inline std::string to_text(double v) {
  std::ostringstream out;
  out.precision(17);
  out << v;
  return out.str();
}

template <typename Scalar>
void require_compact(const GameSpec<Scalar>& spec) {
  for (Index i = 0; i < spec.num_agents(); ++i) {
    if (!spec.local_set(i).bounded()) {
      throw InvalidArgument("solve: local set of agent " + std::to_string(i) + " is unbounded");
    }
  }
}

class Stopwatch {
 public:
  Stopwatch() : start_(std::chrono::steady_clock::now()) {}
  std::int64_t elapsed_ns() const {
    return std::chrono::duration_cast<std::chrono::nanoseconds>(std::chrono::steady_clock::now() - start_).count();
  }

 private:
  std::chrono::steady_clock::time_point start_;
};

}  // namespace detail

// ---------------------------------------------------------------------------
// Preconditioned forward-backward (sequential primal-dual projected gradient).

/// One step:
///   x+ = P_Omega[x - alpha (F(x) + A^T lambda)]
///   lambda+ = P_+[lambda + gamma (2 A x+ - A x - b)]
/// The dual update uses the already updated x+.
template <typename Scalar>
SolverState<Scalar> pfb_step(const SolverState<Scalar>& state, const GameSpec<Scalar>& spec,
                             const PreconditionerS<Scalar>& phi) {
  const auto& x = state.omega.x;
  const auto& lambda = state.omega.lambda;
  detail::require_size("pfb_step: x", spec.stacked_dim(), x.size());
  detail::require_size("pfb_step: lambda", spec.num_constraints(), lambda.size());
  detail::require_size("pfb_step: preconditioner agents", spec.num_agents(), phi.num_agents());
  const auto& A = spec.coupling().stacked();
  const Index n = spec.dim();
  const bool coupled = spec.num_constraints() > 0;

  Vector<Scalar> g = pseudo_gradient(x, spec);
  if (coupled) g.noalias() += A.transpose() * lambda;
  Vector<Scalar> x_next(x.size());
  for (Index i = 0; i < spec.num_agents(); ++i) {
    const auto& box = spec.local_set(i);
    x_next.segment(i * n, n) =
        (x.segment(i * n, n) - phi.alphas()[i] * g.segment(i * n, n)).cwiseMax(box.lower()).cwiseMin(box.upper());
  }

  Vector<Scalar> lambda_next = lambda;
  if (coupled) {
    const Vector<Scalar> Ax_next = A * x_next;
    const Vector<Scalar> Ax = A * x;
    lambda_next =
        project_nonneg(Vector<Scalar>(lambda + phi.gamma() * (Scalar(2) * Ax_next - Ax - spec.coupling().b())));
  }

  SolverState<Scalar> next{{std::move(x_next), std::move(lambda_next)}, state.iteration + 1, 0};
  detail::check_finite_state(next.omega, next.iteration);
  next.last_residual = phi.norm(Vector<Scalar>(next.omega.stacked() - state.omega.stacked()));
  return next;
}

/// Validates step sizes against the positive-definiteness condition and, when the game carries
/// (eta, lip_f), against the convergence bounds. Throws InvalidArgument naming the violated bound.
template <typename Scalar>
void validate_pfb_steps(const GameSpec<Scalar>& spec, const PreconditionerS<Scalar>& phi) {
  const auto pd = check_positive_definite(phi);
  if (!pd.sufficient_condition) {
    std::ostringstream msg;
    msg << "pfb_solve: gamma = " << phi.gamma() << " violates gamma < 1/(|A|^2 alpha_max) = "
        << Scalar(1) / (phi.coupling_norm() * phi.coupling_norm() * phi.alpha_max());
    throw InvalidArgument(msg.str());
  }
  if (const auto& mono = spec.monotonicity()) {
    const Scalar gmax = gamma_max(phi.alphas(), mono->eta, mono->lip_f, phi.coupling_norm());
    if (spec.num_constraints() > 0 && !(phi.gamma() < gmax)) {
      std::ostringstream msg;
      msg << "pfb_solve: gamma = " << phi.gamma() << " violates gamma < gamma_max = " << gmax;
      throw InvalidArgument(msg.str());
    }
  }
}

/// Default starting point (P_Omega(0), 0).
template <typename Scalar>
PrimalDualPoint<Scalar> default_start(const GameSpec<Scalar>& spec) {
  return {project_omega(Vector<Scalar>(Vector<Scalar>::Zero(spec.stacked_dim())), spec),
          Vector<Scalar>::Zero(spec.num_constraints())};
}

namespace detail {

template <typename Scalar, typename Step>
SolveResult<Scalar> run_fb_loop(const GameSpec<Scalar>& spec, const SolverConfig& config,
                                std::optional<PrimalDualPoint<Scalar>> omega0, const Step& step,
                                const InclusionSplitting<Scalar>* inclusion,
                                const std::function<void(const SolverState<Scalar>&)>& observer) {
  PrimalDualPoint<Scalar> start = omega0 ? *omega0 : default_start(spec);
  require_size("solve: omega0.x", spec.stacked_dim(), start.x.size());
  require_size("solve: omega0.lambda", spec.num_constraints(), start.lambda.size());
  start.x = project_omega(start.x, spec);
  start.lambda = project_nonneg(start.lambda);

  SolveResult<Scalar> result;
  ConvergenceReport& report = result.report;
  Stopwatch clock;
  SolverState<Scalar> state{start, 0, std::numeric_limits<Scalar>::infinity()};
  if (observer) observer(state);

  bool converged = false;
  while (state.iteration < config.max_iters) {
    SolverState<Scalar> next = step(state);
    if (inclusion) {
      ++report.inclusion_checks;
      if (!check_fb_inclusion(state.omega.stacked(), next.omega.stacked(), *inclusion, Scalar(1e-8))) {
        ++report.inclusion_failures;
      }
    }
    state = std::move(next);
    if (observer) observer(state);
    converged = state.last_residual < Scalar(config.residual_tol);
    if (state.iteration % config.trace_every == 0 || converged || state.iteration == config.max_iters) {
      report.trace.push_back({state.iteration, static_cast<double>(state.last_residual),
                              static_cast<double>(eval_T_residual(state.omega, spec)),
                              max_coupling_violation(state.omega.x, spec), clock.elapsed_ns()});
    }
    if (converged) break;
  }

  report.converged = converged;
  report.iterations = state.iteration;
  report.final_fp_residual = static_cast<double>(state.last_residual);
  report.final_kkt_residual = static_cast<double>(eval_T_residual(state.omega, spec));
  report.kkt_met = report.final_kkt_residual <= config.kkt_tol;
  result.point = std::move(state.omega);
  return result;
}

inline void echo_config(ConvergenceReport& report, const SolverConfig& config) {
  report.config_echo.emplace_back("max_iters", std::to_string(config.max_iters));
  report.config_echo.emplace_back("residual_tol", to_text(config.residual_tol));
  report.config_echo.emplace_back("kkt_tol", to_text(config.kkt_tol));
  report.config_echo.emplace_back("trace_every", std::to_string(config.trace_every));
  report.config_echo.emplace_back("allow_unsafe_steps", config.allow_unsafe_steps ? "true" : "false");
}

}  // namespace detail

/// Iterates pfb_step until the Phi-weighted step falls below config.residual_tol or max_iters.
/// Exhausting max_iters yields a non-converged report; a non-finite iterate throws DivergenceError.
template <typename Scalar>
SolveResult<Scalar> pfb_solve(const GameSpec<Scalar>& spec, const PreconditionerS<Scalar>& phi,
                              const SolverConfig& config = {},
                              std::type_identity_t<std::optional<PrimalDualPoint<Scalar>>> omega0 = std::nullopt,
                              const std::type_identity_t<std::function<void(const SolverState<Scalar>&)>>& observer = {}) {
  config.validate();
  detail::require_compact(spec);
  detail::require_size("pfb_solve: preconditioner agents", spec.num_agents(), phi.num_agents());
  detail::require_size("pfb_solve: preconditioner rows", spec.num_constraints(), phi.dual_dim());
  if (!config.allow_unsafe_steps) validate_pfb_steps(spec, phi);

  std::optional<InclusionSplitting<Scalar>> inclusion;
  if (config.record_inclusion_checks) inclusion = pfb_inclusion_splitting(spec, phi);
  auto result = detail::run_fb_loop<Scalar>(
      spec, config, std::move(omega0), [&](const SolverState<Scalar>& s) { return pfb_step(s, spec, phi); },
      inclusion ? &*inclusion : nullptr, observer);
  result.report.config_echo.emplace_back("algorithm", "pfb");
  result.report.config_echo.emplace_back("alphas", detail::join(phi.alphas()));
  result.report.config_echo.emplace_back("gamma", detail::to_text(static_cast<double>(phi.gamma())));
  detail::echo_config(result.report, config);
  return result;
}

// ---------------------------------------------------------------------------
// Asymmetric projection algorithm.

/// One APA step, solving -R(omega) in N_C(omega+) + D (omega+ - omega) by forward substitution over
/// the lower-triangular blocks of D = [[I/tau, 0], [-2A, I/tau]], with R = col(F(x) + A^T lambda, b - A x).
template <typename Scalar>
SolverState<Scalar> apa_step(const SolverState<Scalar>& state, const GameSpec<Scalar>& spec, const ApaMatrix<Scalar>& d) {
  const auto& x = state.omega.x;
  const auto& lambda = state.omega.lambda;
  detail::require_size("apa_step: x", spec.stacked_dim(), x.size());
  detail::require_size("apa_step: lambda", spec.num_constraints(), lambda.size());
  const auto& A = d.coupling_matrix();
  const Scalar tau = d.tau();
  const bool coupled = spec.num_constraints() > 0;

  // Block row 1: x+ = P_Omega[x - tau R_x].
  Vector<Scalar> r_x = pseudo_gradient(x, spec);
  if (coupled) r_x.noalias() += A.transpose() * lambda;
  Vector<Scalar> x_next = project_omega(Vector<Scalar>(x - tau * r_x), spec);

  // Block row 2: lambda+ = P_+[lambda - tau (R_lambda + D_21 (x+ - x))], D_21 = -2A.
  // -(R_lambda + D_21 (x+ - x)) = 2 A x+ - A x - b, evaluated in the same order as pfb_step.
  Vector<Scalar> lambda_next = lambda;
  if (coupled) {
    const Vector<Scalar> Ax_next = A * x_next;
    const Vector<Scalar> Ax = A * x;
    lambda_next = project_nonneg(Vector<Scalar>(lambda + tau * (Scalar(2) * Ax_next - Ax - spec.coupling().b())));
  }

  SolverState<Scalar> next{{std::move(x_next), std::move(lambda_next)}, state.iteration + 1, 0};
  detail::check_finite_state(next.omega, next.iteration);
  const Vector<Scalar> delta = next.omega.stacked() - state.omega.stacked();
  next.last_residual = std::sqrt(std::max(delta.dot(d.symmetric_part() * delta), Scalar(0)));
  return next;
}

template <typename Scalar>
SolveResult<Scalar> apa_solve(const GameSpec<Scalar>& spec, const ApaMatrix<Scalar>& d, const SolverConfig& config = {},
                              std::type_identity_t<std::optional<PrimalDualPoint<Scalar>>> omega0 = std::nullopt,
                              const std::type_identity_t<std::function<void(const SolverState<Scalar>&)>>& observer = {}) {
  config.validate();
  detail::require_compact(spec);
  if (!config.allow_unsafe_steps) {
    Eigen::LLT<Matrix<Scalar>> llt(d.symmetric_part());
    if (llt.info() != Eigen::Success) throw InvalidArgument("apa_solve: symmetric part of D is not positive definite");
  }
  std::optional<InclusionSplitting<Scalar>> inclusion;
  if (config.record_inclusion_checks) inclusion = apa_inclusion_splitting(spec, d);
  auto result = detail::run_fb_loop<Scalar>(
      spec, config, std::move(omega0), [&](const SolverState<Scalar>& s) { return apa_step(s, spec, d); },
      inclusion ? &*inclusion : nullptr, observer);
  result.report.config_echo.emplace_back("algorithm", "apa");
  result.report.config_echo.emplace_back("tau", detail::to_text(static_cast<double>(d.tau())));
  detail::echo_config(result.report, config);
  return result;
}

// ---------------------------------------------------------------------------
// Networked projected gradient with aggregate estimates.

template <typename Scalar>
struct KnsState {
  Vector<Scalar> x;
  /// Raw estimates.
  Vector<Scalar> v;
  /// Mixed estimates (W (x) I_n) v.
  Vector<Scalar> sigma_hat;
  long iteration = 0;
  Scalar last_residual = 0;
};

template <typename Scalar>
KnsState<Scalar> make_kns_state(Vector<Scalar> x, Vector<Scalar> v, const CommGraph& graph, Index n) {
  Vector<Scalar> sigma_hat = mix(v, graph, n);
  return {std::move(x), std::move(v), std::move(sigma_hat), 0, 0};
}

namespace detail {

template <typename Scalar>
void validate_kns(const GameSpec<Scalar>& spec, const CommGraph& graph, Scalar alpha) {
  if (spec.num_constraints() > 0) {
    throw InvalidArgument("kns: coupling constraints are not supported (m = " + std::to_string(spec.num_constraints()) +
                          ")");
  }
  require_size("kns: graph nodes", spec.num_agents(), graph.num_nodes());
  if (!(alpha > 0) || !std::isfinite(alpha)) throw InvalidArgument("kns: alpha must be positive and finite");
}

}  // namespace detail

/// One step:
///   x+ = P_Omega[x - alpha F_sigma(x, sigma_hat)]
///   v+ = sigma_hat + x+ - x        (projection onto R^{nN} is the identity)
///   sigma_hat+ = (W (x) I_n) v+
template <typename Scalar>
KnsState<Scalar> kns_step(const KnsState<Scalar>& state, const GameSpec<Scalar>& spec, const CommGraph& graph,
                          std::type_identity_t<Scalar> alpha, EstimateConvention convention = EstimateConvention::total_at_estimate) {
  detail::validate_kns(spec, graph, alpha);
  detail::require_size("kns_step: x", spec.stacked_dim(), state.x.size());
  detail::require_size("kns_step: v", spec.stacked_dim(), state.v.size());
  const Vector<Scalar> g = extended_pseudo_gradient(state.x, state.sigma_hat, spec, convention);
  KnsState<Scalar> next;
  next.x = project_omega(Vector<Scalar>(state.x - alpha * g), spec);
  next.v = state.sigma_hat + next.x - state.x;
  next.sigma_hat = mix(next.v, graph, spec.dim());
  next.iteration = state.iteration + 1;
  detail::check_finite_vector(next.x, next.iteration);
  detail::check_finite_vector(next.v, next.iteration);
  next.last_residual = std::sqrt((next.x - state.x).squaredNorm() + (next.v - state.v).squaredNorm());
  return next;
}

template <typename Scalar>
struct KnsResult {
  Vector<Scalar> x;
  KnsState<Scalar> state;
  ConvergenceReport report;
  /// |sigma_hat_i - sigma(x)| per agent at termination.
  Vector<Scalar> disagreement;
};

/// Iterates kns_step until |col(x+ - x, v+ - v)| < residual_tol. v0 defaults to x0, x0 to P_Omega(0).
template <typename Scalar>
KnsResult<Scalar> kns_solve(const GameSpec<Scalar>& spec, const CommGraph& graph, std::type_identity_t<Scalar> alpha,
                            const SolverConfig& config = {},
                            std::type_identity_t<std::optional<Vector<Scalar>>> x0 = std::nullopt,
                            std::type_identity_t<std::optional<Vector<Scalar>>> v0 = std::nullopt,
                            EstimateConvention convention = EstimateConvention::total_at_estimate,
                            const std::type_identity_t<std::function<void(const KnsState<Scalar>&)>>& observer = {}) {
  config.validate();
  detail::require_compact(spec);
  detail::validate_kns(spec, graph, alpha);
  const Index n = spec.dim();
  Vector<Scalar> x = x0 ? project_omega(*x0, spec) : default_start(spec).x;
  Vector<Scalar> v = v0 ? *v0 : x;
  detail::require_size("kns_solve: v0", spec.stacked_dim(), v.size());

  std::optional<InclusionSplitting<Scalar>> inclusion;
  if (config.record_inclusion_checks) inclusion = kns_inclusion_splitting(spec, graph, alpha, convention);

  KnsResult<Scalar> result;
  ConvergenceReport& report = result.report;
  detail::Stopwatch clock;
  KnsState<Scalar> state = make_kns_state(std::move(x), std::move(v), graph, n);
  state.last_residual = std::numeric_limits<Scalar>::infinity();
  if (observer) observer(state);

  bool converged = false;
  while (state.iteration < config.max_iters) {
    KnsState<Scalar> next = kns_step(state, spec, graph, alpha, convention);
    if (inclusion) {
      Vector<Scalar> prev_w(2 * spec.stacked_dim());
      Vector<Scalar> next_w(2 * spec.stacked_dim());
      prev_w << state.x, state.sigma_hat;
      next_w << next.x, next.sigma_hat;
      ++report.inclusion_checks;
      if (!check_fb_inclusion(prev_w, next_w, *inclusion, Scalar(1e-8))) ++report.inclusion_failures;
    }
    state = std::move(next);
    if (observer) observer(state);
    converged = state.last_residual < Scalar(config.residual_tol);
    if (state.iteration % config.trace_every == 0 || converged || state.iteration == config.max_iters) {
      report.trace.push_back({state.iteration, static_cast<double>(state.last_residual),
                              static_cast<double>(eval_T_residual(PrimalDualPoint<Scalar>{state.x, Vector<Scalar>(0)}, spec)),
                              0.0, clock.elapsed_ns()});
    }
    if (converged) break;
  }

  report.converged = converged;
  report.iterations = state.iteration;
  report.final_fp_residual = static_cast<double>(state.last_residual);
  report.final_kkt_residual =
      static_cast<double>(eval_T_residual(PrimalDualPoint<Scalar>{state.x, Vector<Scalar>(0)}, spec));
  report.kkt_met = report.final_kkt_residual <= config.kkt_tol;
  report.config_echo.emplace_back("algorithm", "kns");
  report.config_echo.emplace_back("alpha", detail::to_text(static_cast<double>(alpha)));
  report.config_echo.emplace_back("estimate_convention",
                                  convention == EstimateConvention::partial ? "partial" : "total-at-estimate");
  detail::echo_config(report, config);

  const Vector<Scalar> s = aggregate(state.x, spec);
  result.disagreement.resize(spec.num_agents());
  for (Index i = 0; i < spec.num_agents(); ++i) {
    result.disagreement[i] = (state.sigma_hat.segment(i * n, n) - s).norm();
  }
  result.x = state.x;
  result.state = std::move(state);
  return result;
}

}  // namespace vgne
