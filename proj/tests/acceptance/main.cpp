// Acceptance suite: one PASS/FAIL line per criterion.

#include <chrono>
#include <cstdio>
#include <functional>
#include <sstream>
#include <string>
#include <vector>

#include "vgne/experiments.hpp"
#include "vgne/generator.hpp"
#include "vgne/io.hpp"
#include "vgne/network.hpp"
#include "vgne/preconditioner.hpp"
#include "vgne/random.hpp"
#include "vgne/solvers.hpp"
#include "vgne/verification.hpp"

#ifndef VGNE_DATA_DIR
#define VGNE_DATA_DIR "data"
#endif

namespace fs = std::filesystem;
using namespace vgne;

namespace {

struct Outcome {
  bool pass = true;
  std::ostringstream detail;

  void require(bool ok, const std::string& why) {
    if (!ok && pass) {
      pass = false;
      detail << "first failure: " << why << "; ";
    }
  }
};

// Oracle candidates 3^{nN} 2^m are capped at the oracle's default budget.
constexpr long kOracleBudget = 1'000'000;
int g_capped_shapes = 0;

GameSpecd make_game(std::uint64_t seed, Index N, Index n, Index m) {
  GeneratorOptions o;
  o.agents = N;
  o.dim = n;
  o.constraints = m;
  o.seed = seed;
  return random_game(o);
}

long candidates(Index N, Index n, Index m) {
  double c = 1;
  for (Index k = 0; k < N * n; ++k) c *= 3;
  for (Index k = 0; k < m; ++k) c *= 2;
  return static_cast<long>(c);
}

/// Random shape in N in 2..8, n in 1..2, m in 0..4; n then m are lowered until the oracle fits the budget.
GameSpecd sample_game(std::uint64_t seed) {
  Rng rng(seed);
  const Index N = rng.integer(2, 8);
  Index n = rng.integer(1, 2);
  Index m = rng.integer(0, 4);
  if (candidates(N, n, m) > kOracleBudget) ++g_capped_shapes;
  while (candidates(N, n, m) > kOracleBudget) {
    if (n > 1) {
      n = 1;
    } else {
      --m;
    }
  }
  return make_game(seed, N, n, m);
}

StepSizes<double> theorem1(const GameSpecd& game) {
  return theorem1_steps(*game.monotonicity(), operator_norm(game.coupling().stacked()), game.num_agents());
}

PreconditionerS<double> theorem1_phi(const GameSpecd& game) {
  const auto s = theorem1(game);
  return build_phi_s(s.alphas, s.gamma, game.coupling());
}

double inf_norm(const Vectord& v) { return v.size() ? v.lpNorm<Eigen::Infinity>() : 0.0; }

// ---------------------------------------------------------------------------

struct ConvergenceRun {
  GameSpecd game;
  PreconditionerS<double> phi;
  std::vector<Vectord> iterates;
  bool converged = false;
};

std::vector<ConvergenceRun> g_runs;

Outcome criterion1() {
  Outcome out;
  int converged = 0, kkt_ok = 0, oracle_ok = 0;
  double worst_gap = 0, worst_kkt = 0;
  long max_iters_seen = 0;
  g_capped_shapes = 0;
  for (std::uint64_t k = 0; k < 50; ++k) {
    const GameSpecd game = sample_game(1000 + k);
    const auto phi = theorem1_phi(game);
    ConvergenceRun run{game, phi, {}, false};
    const auto result = pfb_solve(game, phi, SolverConfig{}, std::nullopt,
                                  [&](const SolverState<double>& s) { run.iterates.push_back(s.omega.stacked()); });
    run.converged = result.report.converged && result.report.final_fp_residual < 1e-8;
    converged += run.converged;
    max_iters_seen = std::max(max_iters_seen, result.report.iterations);
    const KktReport kkt = check_kkt(result.point, game);
    worst_kkt = std::max({worst_kkt, kkt.max_stationarity(), kkt.primal_violation, kkt.complementarity_gap});
    kkt_ok += kkt.passes(1e-6);
    const double gap = inf_norm(oracle_vgne(game).x - result.point.x);
    worst_gap = std::max(worst_gap, gap);
    oracle_ok += gap <= 1e-5;
    out.require(run.converged, "game " + std::to_string(k) + " did not converge");
    out.require(kkt.passes(1e-6), "game " + std::to_string(k) + " fails check_kkt at 1e-6");
    out.require(gap <= 1e-5, "game " + std::to_string(k) + " oracle gap " + format_real(gap));
    g_runs.push_back(std::move(run));
  }
  out.detail << converged << "/50 converged (max " << max_iters_seen << " iters), " << kkt_ok << "/50 kkt<=1e-6 (worst "
             << worst_kkt << "), " << oracle_ok << "/50 oracle gap<=1e-5 (worst " << worst_gap << "); "
             << g_capped_shapes << " shapes reduced to fit the oracle budget";
  return out;
}

Outcome criterion2() {
  Outcome out;
  int passed = 0;
  double worst = 0;
  for (std::uint64_t k = 0; k < 20; ++k) {
    const GameSpecd game = sample_game(2000 + k);
    EquivalenceDetails d;
    const bool ok = check_zer_fix_equivalence(game, theorem1_phi(game), 1e-8, &d, k);
    passed += ok;
    worst = std::max(worst, d.worst_near_fixed_residual);
    out.require(ok, "game " + std::to_string(k));
  }
  out.detail << passed << "/20 games, worst near-fixed natural residual " << worst;
  return out;
}

Outcome criterion3() {
  Outcome out;
  Rng rng(3000);
  int pd = 0;
  for (int t = 0; t < 1000; ++t) {
    const Index N = rng.integer(1, 6), n = rng.integer(1, 3), m = rng.integer(1, 5);
    std::vector<Matrixd> blocks(static_cast<std::size_t>(N), Matrixd(m, n));
    for (auto& b : blocks) b = Matrixd::NullaryExpr(m, n, [&] { return rng.uniform(-3, 3); });
    const CouplingConstraintd coupling(blocks, Vectord::Zero(m));
    const Vectord alphas = rng.uniform_vector(N, 1e-3, 3);
    const double a = operator_norm(coupling.stacked());
    const double gamma = rng.uniform(1e-3, 1 - 1e-9) / (a * a * alphas.maxCoeff());
    const auto check = check_positive_definite(build_phi_s(alphas, gamma, coupling));
    out.require(check.sufficient_condition, "sample " + std::to_string(t) + " does not satisfy the condition");
    pd += check.cholesky_succeeds;
    out.require(check.cholesky_succeeds, "sample " + std::to_string(t) + " not positive definite");
  }
  // Violating sample that is still positive definite.
  const CouplingConstraintd coupling({Matrixd::Constant(1, 1, 0.1), Matrixd::Constant(1, 1, 1.0)}, Vectord::Zero(1));
  Vectord alphas(2);
  alphas << 1.0, 0.01;
  const auto witness = check_positive_definite(build_phi_s(alphas, 10.0, coupling));
  out.require(!witness.sufficient_condition && witness.cholesky_succeeds, "no sufficiency-only witness");
  out.detail << pd << "/1000 Cholesky-positive; witness alpha=[1, 0.01], A=[0.1, 1], gamma=10: condition "
             << (witness.sufficient_condition ? "holds" : "violated") << ", Cholesky "
             << (witness.cholesky_succeeds ? "succeeds" : "fails");
  return out;
}

Outcome criterion4() {
  Outcome out;
  double worst_fwd = 1e300, worst_phi = 1e300;
  for (std::uint64_t k = 0; k < 10; ++k) {
    const GameSpecd game = sample_game(4000 + k);
    const auto mono = *game.monotonicity();
    const auto phi = theorem1_phi(game);
    const double beta = cocoercivity_beta(phi, mono.eta, mono.lip_f);
    const auto fwd = sample_forward_cocoercivity(game, mono, 1000, k, 1e-9);
    const auto pc = sample_phi_cocoercivity(game, phi, beta, 1000, k + 100, 1e-9);
    worst_fwd = std::min(worst_fwd, fwd.worst_margin);
    worst_phi = std::min(worst_phi, pc.worst_margin);
    out.require(fwd.ok() && fwd.samples == 1000, "forward cocoercivity, game " + std::to_string(k));
    out.require(pc.ok() && pc.samples == 1000, "Phi-norm cocoercivity, game " + std::to_string(k));
  }
  out.detail << "10 games x 1000 pairs; worst margins " << worst_fwd << " (eta/lip_f^2, standard norm), " << worst_phi
             << " (beta, Phi-norm)";
  return out;
}

Outcome criterion5() {
  Outcome out;
  double min_beta = 1e300, worst = 1e300;
  for (std::uint64_t k = 0; k < 10; ++k) {
    const GameSpecd game = sample_game(5000 + k);
    const auto mono = *game.monotonicity();
    const auto phi = theorem1_phi(game);
    const double beta = cocoercivity_beta(phi, mono.eta, mono.lip_f);
    min_beta = std::min(min_beta, beta);
    out.require(beta > 0.5, "beta <= 1/2 on game " + std::to_string(k));
    if (beta <= 0.5) continue;
    const auto avg = sample_averagedness(game, phi, averagedness_theta(beta), 1000, k, 1e-9);
    worst = std::min(worst, avg.worst_margin);
    out.require(avg.ok() && avg.samples == 1000, "averagedness, game " + std::to_string(k));
  }
  // Equal steps alpha = gamma from the equal-step bound, on random games and on random (eta, lip_f, A).
  double min_eq_beta = 1e300;
  for (std::uint64_t k = 0; k < 200; ++k) {
    const GameSpecd game = sample_game(5500 + k);
    const auto mono = *game.monotonicity();
    const auto eq = equal_steps(mono, operator_norm(game.coupling().stacked()), game.num_agents());
    const double beta = cocoercivity_beta(build_phi_s(eq.alphas, eq.gamma, game.coupling()), mono.eta, mono.lip_f);
    min_eq_beta = std::min(min_eq_beta, beta);
    out.require(beta > 0.5, "equal-step beta <= 1/2 on game " + std::to_string(k));
  }
  Rng rng(5999);
  for (int t = 0; t < 1000; ++t) {
    const Index N = rng.integer(1, 5), n = rng.integer(1, 3), m = rng.integer(1, 4);
    const double lip = rng.uniform(0.1, 10);
    const Monotonicity<double> mono{rng.uniform(0.01, 1) * lip, lip};
    std::vector<Matrixd> blocks(static_cast<std::size_t>(N), Matrixd(m, n));
    for (auto& b : blocks) b = Matrixd::NullaryExpr(m, n, [&] { return rng.uniform(-5, 5); });
    const CouplingConstraintd coupling(blocks, Vectord::Zero(m));
    const auto eq = equal_steps(mono, operator_norm(coupling.stacked()), N);
    const double beta = cocoercivity_beta(build_phi_s(eq.alphas, eq.gamma, coupling), mono.eta, mono.lip_f);
    min_eq_beta = std::min(min_eq_beta, beta);
    out.require(beta > 0.5, "equal-step beta <= 1/2 on sample " + std::to_string(t));
  }
  out.detail << "min beta " << min_beta << ", worst averagedness margin " << worst
             << " over 10 games x 1000 pairs; equal-step min beta " << min_eq_beta << " over 1200 cases";
  return out;
}

Outcome criterion6() {
  Outcome out;
  double worst = 0;
  for (std::uint64_t k = 0; k < 100; ++k) {
    const GameSpecd game = sample_game(6000 + k);
    const auto eq = equal_steps(*game.monotonicity(), operator_norm(game.coupling().stacked()), game.num_agents());
    const double tau = eq.gamma;
    const auto phi = build_phi_s(eq.alphas, tau, game.coupling());
    const auto D = build_apa_matrix(tau, game.coupling());
    Rng rng(k);
    SolverState<double> a{sample_point(game, rng), 0, 0};
    SolverState<double> b = a;
    for (int it = 0; it < 500; ++it) {
      a = pfb_step(a, game, phi);
      b = apa_step(b, game, D);
      worst = std::max(worst, inf_norm(a.omega.stacked() - b.omega.stacked()));
    }
  }
  out.require(worst <= 1e-13, "max deviation " + format_real(worst));
  out.detail << "100 games x 500 iterations, max |pfb - apa|_inf = " << worst;
  return out;
}

Outcome criterion7() {
  Outcome out;
  long pairs = 0, failures = 0;
  double worst_gap = 0, worst_mean = 0;
  int runs = 0;
  const std::vector<GraphRecipe> graphs{{GraphKind::cycle, 6}, {GraphKind::complete, 5}};
  for (const auto& recipe : graphs) {
    const CommGraph graph = build_graph(recipe);
    for (std::uint64_t k = 0; k < 4; ++k) {
      const Index n = 1 + static_cast<Index>(k % 2);
      const GameSpecd game = make_game(7000 + 10 * recipe.num_nodes + k, recipe.num_nodes, n, 0);
      const auto steps = theorem1(game);
      SolverConfig config;
      config.record_inclusion_checks = true;
      Rng rng(k);
      const Vectord x0 = rng.in_box(game.collective_box());
      double mean_err = 0;
      const auto result = kns_solve(game, graph, steps.alphas[0], config, x0, std::nullopt,
                                    EstimateConvention::total_at_estimate, [&](const KnsState<double>& s) {
                                      const Vectord mx = aggregate(s.x, game);
                                      const Vectord mv = aggregate(s.v, game);
                                      mean_err = std::max(mean_err, inf_norm(mx - mv));
                                    });
      const auto central = pfb_solve(game, build_phi_s(steps.alphas, steps.gamma, game.coupling()));
      const double gap = inf_norm(result.x - central.point.x);
      worst_gap = std::max(worst_gap, gap);
      worst_mean = std::max(worst_mean, mean_err);
      pairs += result.report.inclusion_checks;
      failures += result.report.inclusion_failures;
      ++runs;
      const std::string tag = to_string(recipe.kind) + " game " + std::to_string(k);
      out.require(result.report.converged, tag + " did not converge");
      out.require(gap <= 1e-5, tag + " differs from pfb by " + format_real(gap));
      out.require(result.report.inclusion_failures == 0, tag + " inclusion failures");
      out.require(mean_err <= 1e-12, tag + " mean tracking error " + format_real(mean_err));
    }
  }
  out.detail << runs << " runs on cycle(6) and complete(5): max gap to pfb " << worst_gap << ", inclusion "
             << pairs - failures << "/" << pairs << " pairs, max |mean(v)-mean(x)| " << worst_mean;
  return out;
}

Outcome criterion8() {
  Outcome out;
  long pairs = 0, failures = 0;
  for (std::uint64_t k = 0; k < 10; ++k) {
    const GameSpecd game = sample_game(8000 + k);
    SolverConfig config;
    config.record_inclusion_checks = true;
    const auto result = pfb_solve(game, theorem1_phi(game), config);
    pairs += result.report.inclusion_checks;
    failures += result.report.inclusion_failures;
    out.require(result.report.inclusion_failures == 0, "game " + std::to_string(k));
  }
  out.detail << pairs - failures << "/" << pairs << " iterate pairs pass at 1e-8 over 10 games";
  return out;
}

Outcome criterion9() {
  Outcome out;
  int traces = 0;
  long steps_checked = 0;
  double worst_increase = 0;
  for (const auto& run : g_runs) {
    if (!run.converged) continue;
    ++traces;
    // Push the final iterate further to get a reference fixed point.
    const Index nx = run.game.stacked_dim();
    SolverState<double> s{PrimalDualPointd::from_stacked(run.iterates.back(), nx), 0, 1};
    for (long it = 0; it < 2'000'000 && s.last_residual > 1e-14; ++it) s = pfb_step(s, run.game, run.phi);
    const Vectord star = s.omega.stacked();
    double prev = run.phi.norm(Vectord(run.iterates.front() - star));
    for (std::size_t k = 1; k < run.iterates.size(); ++k) {
      const double d = run.phi.norm(Vectord(run.iterates[k] - star));
      worst_increase = std::max(worst_increase, d - prev);
      out.require(d <= prev + 1e-10, "trace " + std::to_string(traces - 1) + " step " + std::to_string(k));
      prev = d;
      ++steps_checked;
    }
  }
  out.require(traces == 50, "only " + std::to_string(traces) + " converged traces");
  out.detail << traces << " traces, " << steps_checked << " steps, largest increase of |w^k - w*|_Phi " << worst_increase;
  return out;
}

std::string strip_wall_column(const std::string& csv) {
  std::istringstream in(csv);
  std::string line, out;
  while (std::getline(in, line)) out += line.substr(0, line.rfind(',')) + "\n";
  return out;
}

Outcome criterion10() {
  Outcome out;
  const fs::path manifest_path = fs::path(VGNE_DATA_DIR) / "manifest.yaml";
  const ExperimentManifest manifest = load_manifest(manifest_path);
  const fs::path root = fs::temp_directory_path() / "vgne_acceptance_determinism";
  fs::remove_all(root);
  const int first = run_experiments(manifest, root / "a");
  const int second = run_experiments(manifest, root / "b");
  out.require(first == 0 && second == 0, "manifest entries did not all converge");
  std::size_t identical = 0;
  for (const auto& entry : manifest.entries) {
    const std::string a = read_text_file(root / "a" / entry.output);
    const std::string b = read_text_file(root / "b" / entry.output);
    const bool same = strip_wall_column(a) == strip_wall_column(b);
    identical += same;
    out.require(same, entry.output.string() + " differs");
  }
  out.require(read_text_file(root / "a" / "summary.yaml") == read_text_file(root / "b" / "summary.yaml"),
              "summary differs");
  out.detail << identical << "/" << manifest.entries.size() << " trace CSVs identical modulo wall_ns";
  fs::remove_all(root);
  return out;
}

}  // namespace

int main() {
  const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria{
      {"pFB convergence with step-size bounds", criterion1},
      {"zero / fixed-point equivalence", criterion2},
      {"positive-definiteness condition soundness", criterion3},
      {"cocoercivity certificates", criterion4},
      {"averagedness certificate", criterion5},
      {"APA and pFB iterates coincide", criterion6},
      {"distributed iteration on regular graphs", criterion7},
      {"forward-backward inclusion along pFB", criterion8},
      {"Fejer monotonicity", criterion9},
      {"deterministic manifest runs", criterion10},
  };
  int failed = 0;
  for (std::size_t k = 0; k < criteria.size(); ++k) {
    const auto start = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = criteria[k].second();
    } catch (const std::exception& e) {
      o.pass = false;
      o.detail << "exception: " << e.what();
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    std::printf("criterion %2zu %s  %s: %s (%.1f s)\n", k + 1, o.pass ? "PASS" : "FAIL", criteria[k].first,
                o.detail.str().c_str(), secs);
    std::fflush(stdout);
    failed += !o.pass;
  }
  return failed == 0 ? 0 : 1;
}
