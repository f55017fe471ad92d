#include "vgne/verification.hpp"

#include <Eigen/Cholesky>
#include <Eigen/LU>

#include <climits>
#include <cmath>
#include <vector>

namespace vgne {

namespace {

// Affine pseudo-gradient H x + h assembled straight from the quadratic cost parameters.
// Kept separate from the game model so the oracle shares no evaluation code with the solvers.
struct AffineMap {
  Matrixd H;
  Vectord h;
};

AffineMap assemble_affine_map(const GameSpecd& spec) {
  if (!spec.is_quadratic()) throw InvalidArgument("oracle: cost must be quadratic");
  const auto& cost = spec.quadratic();
  const Index n = spec.dim();
  const Index N = spec.num_agents();
  AffineMap map{Matrixd::Zero(n * N, n * N), Vectord(n * N)};
  for (Index i = 0; i < N; ++i) {
    for (Index a = 0; a < n; ++a) {
      const Index row = i * n + a;
      // d/dx_{i,a} of 1/2 q_i |x_i|^2 + x_i^T c (1/N) sum_j x_j + d_i^T x_i
      map.H(row, row) += cost.q[i];
      for (Index j = 0; j < N; ++j) {
        for (Index b = 0; b < n; ++b) map.H(row, j * n + b) += cost.c(a, b) / static_cast<double>(N);
      }
      for (Index b = 0; b < n; ++b) map.H(row, i * n + b) += cost.c(b, a) / static_cast<double>(N);
      map.h[row] = cost.d[static_cast<std::size_t>(i)][a];
    }
  }
  return map;
}

enum class Face { lower, free, upper };

Face classify(double x, double lo, double hi, double band) {
  const bool at_lower = x - lo <= band;
  const bool at_upper = hi - x <= band;
  if (at_lower && at_upper) return (x - lo) <= (hi - x) ? Face::lower : Face::upper;
  if (at_lower) return Face::lower;
  if (at_upper) return Face::upper;
  return Face::free;
}

double scaled(double tol, double magnitude) { return tol * (1.0 + std::abs(magnitude)); }

}  // namespace

KktReport check_kkt(const PrimalDualPointd& point, const GameSpecd& spec, double active_tol) {
  detail::require_size("check_kkt: x", spec.stacked_dim(), point.x.size());
  detail::require_size("check_kkt: mu", spec.num_constraints(), point.lambda.size());
  const Index n = spec.dim();
  const auto& A = spec.coupling().stacked();
  const auto& b = spec.coupling().b();

  Vectord g = pseudo_gradient(point.x, spec);
  if (spec.num_constraints() > 0) g += A.transpose() * point.lambda;

  KktReport report;
  report.stationarity = Vectord::Zero(spec.num_agents());
  for (Index i = 0; i < spec.num_agents(); ++i) {
    const auto& box = spec.local_set(i);
    double acc = 0;
    for (Index j = 0; j < n; ++j) {
      const Index k = i * n + j;
      const double lo = box.lower()[j];
      const double hi = box.upper()[j];
      report.box_violation = std::max({report.box_violation, lo - point.x[k], point.x[k] - hi});
      if (lo == hi) continue;
      const double v = -g[k];
      double dist = 0;
      switch (classify(point.x[k], lo, hi, active_tol)) {
        case Face::lower:
          dist = std::max(v, 0.0);
          break;
        case Face::upper:
          dist = std::max(-v, 0.0);
          break;
        case Face::free:
          dist = std::abs(v);
          break;
      }
      acc += dist * dist;
    }
    report.stationarity[i] = std::sqrt(acc);
  }
  if (spec.num_constraints() > 0) {
    const Vectord slack = A * point.x - b;
    report.primal_violation = std::max(slack.maxCoeff(), 0.0);
    report.dual_nonneg_violation = std::max(-point.lambda.minCoeff(), 0.0) + 0.0;
    report.complementarity_gap = std::abs(point.lambda.dot(slack));
  }
  return report;
}

long oracle_candidate_count(const GameSpecd& spec) {
  long count = 1;
  const auto mul = [&count](long f) {
    if (count > LONG_MAX / f) {
      count = LONG_MAX;
    } else {
      count *= f;
    }
  };
  for (Index k = 0; k < spec.stacked_dim(); ++k) mul(3);
  for (Index r = 0; r < spec.num_constraints(); ++r) mul(2);
  return count;
}

std::optional<Vectord> find_strictly_feasible_point(const GameSpecd& spec, long max_iters) {
  const BoxSetd box = spec.collective_box();
  if (!box.bounded()) throw InvalidArgument("find_strictly_feasible_point: local sets must be bounded");
  Vectord x = box.center();
  if (spec.num_constraints() == 0) return x;
  const Matrixd& A = spec.coupling().stacked();
  const Vectord& b = spec.coupling().b();
  // Projected Polyak steps on g(x) = max_j (Ax - b)_j aiming slightly below zero.
  const double target = -1e-6 * (1.0 + b.lpNorm<Eigen::Infinity>());
  for (long k = 0; k <= max_iters; ++k) {
    Index j = 0;
    const double g = (A * x - b).maxCoeff(&j);
    if (g < 0) return x;
    const double row2 = A.row(j).squaredNorm();
    if (row2 == 0) return std::nullopt;
    x = project_box(Vectord(x - (g - target) / row2 * A.row(j).transpose()), box);
  }
  return std::nullopt;
}

PrimalDualPointd oracle_vgne(const GameSpecd& spec, OracleStats* stats, long budget) {
  const long total = oracle_candidate_count(spec);
  if (total > budget) {
    throw InvalidArgument("oracle_vgne: " + std::to_string(total) + " active-set candidates exceed the budget of " +
                          std::to_string(budget));
  }
  if (!spec.bounded()) throw InvalidArgument("oracle_vgne: local sets must be bounded");

  const AffineMap map = assemble_affine_map(spec);
  const Index nx = spec.stacked_dim();
  const Index m = spec.num_constraints();
  const Matrixd& A = spec.coupling().stacked();
  const Vectord& b = spec.coupling().b();
  const BoxSetd box = spec.collective_box();

  if (m > 0 && !find_strictly_feasible_point(spec)) {
    throw InvalidArgument("oracle_vgne: no point of Omega with Ax < b found; game may not be strictly feasible");
  }

  constexpr double kTol = 1e-9;
  OracleStats local;
  std::vector<int> face(static_cast<std::size_t>(nx), 0);  // 0 lower, 1 free, 2 upper
  std::vector<int> active(static_cast<std::size_t>(m), 0);
  std::vector<PrimalDualPointd> verified;
  std::vector<Index> free_idx;
  std::vector<Index> rows;
  free_idx.reserve(static_cast<std::size_t>(nx));
  rows.reserve(static_cast<std::size_t>(m));

  for (long c = 0; c < total; ++c) {
    if (c > 0) {
      // Mixed-radix increment over (faces, active rows).
      Index k = 0;
      for (; k < nx; ++k) {
        if (++face[static_cast<std::size_t>(k)] < 3) break;
        face[static_cast<std::size_t>(k)] = 0;
      }
      if (k == nx) {
        for (Index r = 0; r < m; ++r) {
          if (++active[static_cast<std::size_t>(r)] < 2) break;
          active[static_cast<std::size_t>(r)] = 0;
        }
      }
    }
    ++local.candidates;

    free_idx.clear();
    rows.clear();
    Vectord x(nx);
    for (Index k = 0; k < nx; ++k) {
      switch (face[static_cast<std::size_t>(k)]) {
        case 0:
          x[k] = box.lower()[k];
          break;
        case 2:
          x[k] = box.upper()[k];
          break;
        default:
          x[k] = 0;
          free_idx.push_back(k);
      }
    }
    for (Index r = 0; r < m; ++r) {
      if (active[static_cast<std::size_t>(r)]) rows.push_back(r);
    }
    const Index nf = static_cast<Index>(free_idx.size());
    const Index na = static_cast<Index>(rows.size());
    if (na > nf) {
      ++local.singular_skipped;
      continue;
    }

    Vectord mu = Vectord::Zero(m);
    if (nf > 0) {
      // [H_ff  A_Sf^T] [x_f ]   [-h_f - H_fB x_B]
      // [A_Sf  0     ] [mu_S] = [ b_S - A_SB x_B]
      Matrixd K = Matrixd::Zero(nf + na, nf + na);
      Vectord rhs(nf + na);
      for (Index p = 0; p < nf; ++p) {
        const Index k = free_idx[static_cast<std::size_t>(p)];
        for (Index q = 0; q < nf; ++q) K(p, q) = map.H(k, free_idx[static_cast<std::size_t>(q)]);
        for (Index s = 0; s < na; ++s) {
          K(p, nf + s) = A(rows[static_cast<std::size_t>(s)], k);
          K(nf + s, p) = A(rows[static_cast<std::size_t>(s)], k);
        }
        rhs[p] = -map.h[k] - map.H.row(k).dot(x);
      }
      for (Index s = 0; s < na; ++s) {
        const Index r = rows[static_cast<std::size_t>(s)];
        rhs[nf + s] = b[r] - A.row(r).dot(x);
      }
      Eigen::FullPivLU<Matrixd> lu(K);
      if (!lu.isInvertible()) {
        ++local.singular_skipped;
        continue;
      }
      const Vectord z = lu.solve(rhs);
      for (Index p = 0; p < nf; ++p) x[free_idx[static_cast<std::size_t>(p)]] = z[p];
      for (Index s = 0; s < na; ++s) mu[rows[static_cast<std::size_t>(s)]] = z[nf + s];
    }

    // Free coordinates inside their bounds.
    bool ok = true;
    for (Index p = 0; p < nf && ok; ++p) {
      const Index k = free_idx[static_cast<std::size_t>(p)];
      ok = x[k] >= box.lower()[k] - scaled(kTol, box.lower()[k]) && x[k] <= box.upper()[k] + scaled(kTol, box.upper()[k]);
    }
    if (!ok) continue;

    // Coupling feasibility, activity and multiplier signs.
    if (m > 0) {
      const Vectord slack = A * x - b;
      for (Index r = 0; r < m && ok; ++r) {
        if (active[static_cast<std::size_t>(r)]) {
          ok = mu[r] >= -kTol && std::abs(slack[r]) <= scaled(kTol, b[r]);
        } else {
          ok = slack[r] <= scaled(kTol, b[r]);
        }
      }
    }
    if (!ok) continue;

    // Stationarity: zero on free coordinates, correct sign on fixed ones.
    const Vectord g = map.H * x + map.h + A.transpose() * mu;
    for (Index k = 0; k < nx && ok; ++k) {
      const double t = scaled(kTol, map.h[k]);
      switch (face[static_cast<std::size_t>(k)]) {
        case 0:
          ok = g[k] >= -t;
          break;
        case 2:
          ok = g[k] <= t;
          break;
        default:
          ok = std::abs(g[k]) <= t;
      }
    }
    if (!ok) continue;

    ++local.verified;
    bool duplicate = false;
    for (const auto& sol : verified) {
      if ((sol.x - x).lpNorm<Eigen::Infinity>() <= 1e-7) {
        duplicate = true;
        break;
      }
    }
    if (!duplicate) verified.push_back({x, mu});
  }

  if (stats) *stats = local;
  if (verified.empty()) throw NumericalError("oracle_vgne: no active set verified");
  if (verified.size() > 1) {
    throw NumericalError("oracle_vgne: " + std::to_string(verified.size()) +
                         " distinct primal solutions verified; the game is not strongly monotone");
  }
  return verified.front();
}

SampledConstants estimate_constants(const GameSpecd& spec, long samples, std::uint64_t seed) {
  if (samples < 2) throw InvalidArgument("estimate_constants: samples must be >= 2");
  const BoxSetd box = spec.collective_box();
  if (!box.bounded()) throw InvalidArgument("estimate_constants: local sets must be bounded");
  if ((box.upper() - box.lower()).maxCoeff() <= 0) {
    throw InvalidArgument("estimate_constants: Omega is a single point");
  }
  Rng rng(seed);
  SampledConstants out;
  out.seed = seed;
  out.eta_hat = std::numeric_limits<double>::infinity();
  out.lip_hat = 0;
  for (long s = 0; s < samples; ++s) {
    const Vectord x = rng.in_box(box);
    const Vectord y = rng.in_box(box);
    const Vectord dx = x - y;
    const double d2 = dx.squaredNorm();
    if (d2 == 0) continue;
    const Vectord dF = pseudo_gradient(x, spec) - pseudo_gradient(y, spec);
    out.eta_hat = std::min(out.eta_hat, dF.dot(dx) / d2);
    out.lip_hat = std::max(out.lip_hat, dF.norm() / std::sqrt(d2));
    ++out.sample_count;
  }
  return out;
}

bool check_zer_fix_equivalence(const GameSpecd& spec, const PreconditionerS<double>& phi, double tol,
                               EquivalenceDetails* details, std::uint64_t seed) {
  EquivalenceDetails local;
  bool ok = true;

  const PrimalDualPointd star = oracle_vgne(spec);
  const SolverState<double> at_star{star, 0, 0};
  const auto moved = pfb_step(at_star, spec, phi);
  local.oracle_step = (moved.omega.stacked() - star.stacked()).norm();
  ok = ok && local.oracle_step <= tol;

  // The natural residual uses unit steps, the FB map steps alpha_i and gamma, so
  // |natural residual| <= kappa |step| with the constant below; near-fixed means a step of tol / (10 kappa).
  const double a = phi.coupling_norm();
  const double g = phi.gamma();
  const double kappa = std::max(1.0, 1.0 / phi.alpha_min()) + std::max(1.0, 1.0 / g) + 2.0 * std::max(1.0, g) * a;
  local.step_threshold = tol / (10.0 * kappa);

  Rng rng(seed);
  constexpr int kStarts = 5;
  constexpr long kMaxIters = 1'000'000;
  for (int s = 0; s < kStarts; ++s) {
    SolverState<double> state{s == 0 ? default_start(spec) : sample_point(spec, rng), 0, 0};
    bool reached = false;
    for (long it = 0; it < kMaxIters; ++it) {
      auto next = pfb_step(state, spec, phi);
      if ((next.omega.stacked() - state.omega.stacked()).norm() <= local.step_threshold) {
        reached = true;
        break;
      }
      state = std::move(next);
    }
    if (!reached) {
      ok = false;
      continue;
    }
    ++local.near_fixed_points;
    const double residual = eval_T_residual(state.omega, spec);
    local.worst_near_fixed_residual = std::max(local.worst_near_fixed_residual, residual);
    ok = ok && residual <= tol;
  }

  if (details) *details = local;
  return ok;
}

PrimalDualPointd sample_point(const GameSpecd& spec, Rng& rng, double lambda_scale) {
  const BoxSetd box = spec.collective_box();
  PrimalDualPointd p{rng.in_box(box), Vectord(spec.num_constraints())};
  for (Index k = 0; k < p.x.size(); ++k) {
    const double u = rng.unit();
    if (u < 0.1) {
      p.x[k] = box.lower()[k];
    } else if (u < 0.2) {
      p.x[k] = box.upper()[k];
    }
  }
  for (Index r = 0; r < p.lambda.size(); ++r) {
    p.lambda[r] = rng.unit() < 0.3 ? 0.0 : rng.uniform(0.0, lambda_scale);
  }
  return p;
}

CertificateResult sample_forward_chain(const GameSpecd& spec, const Monotonicity<double>& mono, long pairs,
                                       std::uint64_t seed, double slack) {
  Rng rng(seed);
  CertificateResult result;
  const Index nx = spec.stacked_dim();
  for (long s = 0; s < pairs; ++s) {
    const auto w1 = sample_point(spec, rng);
    const auto w2 = sample_point(spec, rng);
    const Vectord dA = eval_forward(w1, spec) - eval_forward(w2, spec);
    const Vectord dw = w1.stacked() - w2.stacked();
    const Vectord dF = dA.head(nx);
    const Vectord dx = dw.head(nx);
    const double lhs = dA.dot(dw);
    const double mid = dF.dot(dx);
    const double strong = mono.eta * dx.squaredNorm();
    const double coco = mono.cocoercivity() * dF.squaredNorm();
    // Equality link, then the two inequalities.
    const double margin = std::min({-std::abs(lhs - mid), mid - strong, strong - coco});
    result.record(margin, slack);
  }
  return result;
}

CertificateResult sample_forward_cocoercivity(const GameSpecd& spec, const Monotonicity<double>& mono, long pairs,
                                              std::uint64_t seed, double slack) {
  Rng rng(seed);
  CertificateResult result;
  for (long s = 0; s < pairs; ++s) {
    const auto w1 = sample_point(spec, rng);
    const auto w2 = sample_point(spec, rng);
    const Vectord dA = eval_forward(w1, spec) - eval_forward(w2, spec);
    const Vectord dw = w1.stacked() - w2.stacked();
    result.record(dA.dot(dw) - mono.cocoercivity() * dA.squaredNorm(), slack);
  }
  return result;
}

CertificateResult sample_phi_cocoercivity(const GameSpecd& spec, const PreconditionerS<double>& phi, double beta,
                                          long pairs, std::uint64_t seed, double slack) {
  const Matrixd Phi = phi.dense_matrix();
  Eigen::LLT<Matrixd> llt(Phi);
  if (llt.info() != Eigen::Success) throw InvalidArgument("sample_phi_cocoercivity: Phi is not positive definite");
  Rng rng(seed);
  CertificateResult result;
  for (long s = 0; s < pairs; ++s) {
    const auto w1 = sample_point(spec, rng);
    const auto w2 = sample_point(spec, rng);
    const Vectord z = llt.solve(Vectord(eval_forward(w1, spec) - eval_forward(w2, spec)));
    const Vectord dw = w1.stacked() - w2.stacked();
    const Vectord Phi_z = Phi * z;
    result.record(Phi_z.dot(dw) - beta * Phi_z.dot(z), slack);
  }
  return result;
}

CertificateResult sample_averagedness(const GameSpecd& spec, const PreconditionerS<double>& phi, double theta,
                                      long pairs, std::uint64_t seed, double slack) {
  if (!(theta > 0 && theta < 1)) throw InvalidArgument("sample_averagedness: theta must be in (0, 1)");
  const Matrixd Phi = phi.dense_matrix();
  const auto sq = [&Phi](const Vectord& v) { return v.dot(Phi * v); };
  const double c = (1.0 - theta) / theta;
  Rng rng(seed);
  CertificateResult result;
  for (long s = 0; s < pairs; ++s) {
    const auto w1 = sample_point(spec, rng);
    const auto w2 = sample_point(spec, rng);
    const Vectord t1 = pfb_step(SolverState<double>{w1, 0, 0}, spec, phi).omega.stacked();
    const Vectord t2 = pfb_step(SolverState<double>{w2, 0, 0}, spec, phi).omega.stacked();
    const Vectord dw = w1.stacked() - w2.stacked();
    const Vectord dt = t1 - t2;
    result.record(sq(dw) - c * sq(Vectord(dw - dt)) - sq(dt), slack);
  }
  return result;
}

CertificateResult sample_backward_monotonicity(const GameSpecd& spec, long pairs, std::uint64_t seed, double slack) {
  const SplitOperatorPair<double> split = make_split(spec);
  const BoxSetd& cone = split.backward_cone;
  Rng rng(seed);
  CertificateResult result;
  const auto cone_element = [&](const Vectord& w) {
    Vectord u = Vectord::Zero(w.size());
    for (Index k = 0; k < w.size(); ++k) {
      const double r = rng.uniform(0.0, 10.0);
      if (w[k] <= cone.lower()[k]) {
        u[k] = -r;
      } else if (w[k] >= cone.upper()[k]) {
        u[k] = r;
      }
    }
    return u;
  };
  for (long s = 0; s < pairs; ++s) {
    const Vectord w1 = sample_point(spec, rng).stacked();
    const Vectord w2 = sample_point(spec, rng).stacked();
    const Vectord u1 = cone_element(w1) + split.backward_skew * w1;
    const Vectord u2 = cone_element(w2) + split.backward_skew * w2;
    result.record((u1 - u2).dot(w1 - w2), slack);
  }
  return result;
}

}  // namespace vgne
