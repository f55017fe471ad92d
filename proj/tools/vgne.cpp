// Command-line front end: solve, verify, bounds, bench, gen.

#include <CLI11.hpp>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include <iostream>
#include <sstream>

#include "vgne/experiments.hpp"
#include "vgne/generator.hpp"
#include "vgne/io.hpp"
#include "vgne/verification.hpp"

namespace fs = std::filesystem;
using namespace vgne;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitError = 1;
constexpr int kExitMaxIters = 2;
constexpr int kExitCheckFailed = 3;

struct Globals {
  std::string log_level = "warn";
  std::string output_dir;
};

fs::path under_output_dir(const Globals& g, const std::string& path) {
  if (g.output_dir.empty() || fs::path(path).is_absolute()) return path;
  return fs::path(g.output_dir) / path;
}

std::string join(const Vectord& v) {
  std::string out = "[";
  for (Index k = 0; k < v.size(); ++k) out += (k ? ", " : "") + format_real(v[k]);
  return out + "]";
}

std::string opt_real(const std::optional<double>& v) { return v ? format_real(*v) : "n/a"; }

struct StepOptions {
  std::vector<double> alphas;
  std::optional<double> gamma;
  double safety = 0.99;
  bool equal_steps = false;

  void add(CLI::App* cmd) {
    cmd->add_option("--alpha", alphas, "Primal step size(s); one value is broadcast to all agents");
    cmd->add_option("--gamma", gamma, "Dual step size");
    cmd->add_option("--safety", safety, "Fraction of the strict step-size bound to use")->check(CLI::Range(0.0, 1.0));
    cmd->add_flag("--equal-steps", equal_steps, "Use alpha_i = gamma from the equal-step bound");
  }

  void apply(SolveRequest& request) const {
    request.safety = safety;
    if (!alphas.empty()) {
      request.policy = StepPolicy::explicit_steps;
      request.alphas = alphas;
      request.gamma = gamma;
    } else if (gamma) {
      throw InvalidArgument("--gamma needs --alpha");
    } else if (equal_steps) {
      request.policy = StepPolicy::equal_ssce;
    }
  }
};

struct GraphOptions {
  std::string file;
  std::string kind;
  std::uint64_t seed = 0;
  long degree = 0;

  void add(CLI::App* cmd) {
    cmd->add_option("--graph", file, "Graph file (kns)");
    cmd->add_option("--graph-kind", kind, "complete, cycle, path, star or random_regular (kns)");
    cmd->add_option("--graph-seed", seed, "Seed for random_regular");
    cmd->add_option("--graph-degree", degree, "Degree for random_regular");
  }

  std::optional<CommGraph> build(Index num_agents) const {
    if (!file.empty()) return load_graph(file);
    if (!kind.empty()) return build_graph({parse_graph_kind(kind), num_agents, degree, seed});
    return std::nullopt;
  }
};

int cmd_solve(const Globals& g, const std::string& spec_path, const std::string& algorithm, const StepOptions& steps,
              const GraphOptions& graph, std::optional<double> tol, std::optional<long> max_iters,
              const std::string& trace, bool unsafe, const std::string& convention, std::optional<std::uint64_t> seed) {
  const GameSpecd spec = load_spec(spec_path);
  SolveRequest request;
  request.algorithm = parse_algorithm(algorithm);
  steps.apply(request);
  if (tol) request.config.residual_tol = *tol;
  if (max_iters) request.config.max_iters = *max_iters;
  request.config.allow_unsafe_steps = unsafe;
  request.start_seed = seed;
  if (convention == "partial") {
    request.convention = EstimateConvention::partial;
  } else if (convention != "total-at-estimate") {
    throw InvalidArgument("--estimate-convention must be partial or total-at-estimate");
  }
  request.graph = graph.build(spec.num_agents());
  if (request.algorithm == Algorithm::kns && !request.graph) {
    throw InvalidArgument("kns needs --graph or --graph-kind");
  }

  spdlog::info("solving {} with {} (N = {}, n = {}, m = {})", spec_path, algorithm, spec.num_agents(), spec.dim(),
               spec.num_constraints());
  const SolveOutcome out = run_solve(spec, request);
  const auto& r = out.report;
  if (!trace.empty()) {
    const fs::path path = under_output_dir(g, trace);
    save_trace_csv(r, path);
    spdlog::info("trace written to {}", path.string());
  }

  std::cout << "status: " << (r.converged ? "converged" : "max_iters") << '\n'
            << "iterations: " << r.iterations << '\n'
            << "final_fp_residual: " << format_real(r.final_fp_residual) << '\n'
            << "final_kkt_residual: " << format_real(r.final_kkt_residual) << '\n'
            << "kkt_met: " << (r.kkt_met ? "true" : "false") << '\n';
  for (const auto& [key, value] : r.config_echo) std::cout << "config." << key << ": " << value << '\n';
  std::cout << "x: " << join(out.point.x) << '\n' << "lambda: " << join(out.point.lambda) << '\n';
  if (out.disagreement.size()) std::cout << "disagreement: " << join(out.disagreement) << '\n';
  return r.converged ? kExitOk : kExitMaxIters;
}

int cmd_bounds(const std::string& spec_path, const StepOptions& steps) {
  const GameSpecd spec = load_spec(spec_path);
  SolveRequest request;
  steps.apply(request);
  const StepSizes<double> used = resolve_steps(spec, request);
  const StepBounds b = compute_bounds(spec, used);
  std::cout << "eta: " << opt_real(b.eta) << '\n'
            << "lip_f: " << opt_real(b.lip_f) << '\n'
            << "coupling_norm: " << format_real(b.coupling_norm) << '\n'
            << "alpha_limit: " << opt_real(b.alpha_limit) << '\n'
            << "alphas: " << join(used.alphas) << '\n'
            << "gamma: " << format_real(used.gamma) << '\n'
            << "gamma_max: " << opt_real(b.gamma_max) << '\n'
            << "ssce_bound: " << opt_real(b.ssce_bound) << '\n'
            << "beta: " << opt_real(b.beta) << '\n'
            << "theta: " << opt_real(b.theta) << '\n'
            << "pd_sufficient_condition: " << (b.sufficient_pd ? "true" : "false") << '\n'
            << "phi_positive_definite: " << (b.cholesky_pd ? "true" : "false") << '\n';
  return kExitOk;
}

int cmd_verify(const std::string& spec_path, const std::string& check, std::uint64_t seed, long samples) {
  const GameSpecd spec = load_spec(spec_path);
  const bool all = check == "all";
  if (!all && check != "kkt" && check != "inclusion" && check != "constants" && check != "equivalence") {
    throw InvalidArgument("--check must be kkt, inclusion, constants, equivalence or all");
  }
  SolveRequest request;
  const StepSizes<double> steps = resolve_steps(spec, request);
  const auto phi = build_phi_s(steps.alphas, steps.gamma, spec.coupling());
  bool ok = true;
  auto report = [&](const std::string& name, bool pass, const std::string& detail) {
    std::cout << name << ": " << (pass ? "PASS" : "FAIL") << "  " << detail << '\n';
    ok = ok && pass;
  };

  if (all || check == "kkt") {
    const auto solved = pfb_solve(spec, phi);
    const KktReport kkt = check_kkt(solved.point, spec);
    std::ostringstream detail;
    detail << "stationarity=" << format_real(kkt.max_stationarity())
           << " primal=" << format_real(kkt.primal_violation) << " dual=" << format_real(kkt.dual_nonneg_violation)
           << " complementarity=" << format_real(kkt.complementarity_gap);
    bool pass = solved.report.converged && kkt.passes(1e-6);
    if (spec.is_quadratic() && oracle_candidate_count(spec) <= 1'000'000) {
      const double gap = (oracle_vgne(spec).x - solved.point.x).lpNorm<Eigen::Infinity>();
      detail << " oracle_gap=" << format_real(gap);
      pass = pass && gap <= 1e-5;
    }
    report("kkt", pass, detail.str());
  }
  if (all || check == "inclusion") {
    SolverConfig config;
    config.record_inclusion_checks = true;
    const auto solved = pfb_solve(spec, phi, config);
    report("inclusion", solved.report.inclusion_failures == 0,
           "pairs=" + std::to_string(solved.report.inclusion_checks) +
               " failures=" + std::to_string(solved.report.inclusion_failures));
  }
  if (all || check == "constants") {
    const SampledConstants est = estimate_constants(spec, samples, seed);
    std::ostringstream detail;
    detail << "eta_hat=" << format_real(est.eta_hat) << " lip_hat=" << format_real(est.lip_hat)
           << " (sampled, not certified)";
    bool pass = est.eta_hat <= est.lip_hat;
    if (const auto mono = resolve_monotonicity(spec)) {
      pass = pass && mono->eta <= est.eta_hat + 1e-9 && est.lip_hat <= mono->lip_f + 1e-9;
      const auto chain = sample_forward_chain(spec, *mono, samples, seed, 1e-10);
      pass = pass && chain.ok();
      detail << " eta=" << format_real(mono->eta) << " lip_f=" << format_real(mono->lip_f)
             << " chain_failures=" << chain.failures;
    }
    report("constants", pass, detail.str());
  }
  if (all || check == "equivalence") {
    if (!spec.is_quadratic()) throw InvalidArgument("equivalence check needs a quadratic cost");
    EquivalenceDetails details;
    const bool pass = check_zer_fix_equivalence(spec, phi, 1e-8, &details, seed);
    report("equivalence", pass,
           "oracle_step=" + format_real(details.oracle_step) +
               " worst_near_fixed_residual=" + format_real(details.worst_near_fixed_residual));
  }
  return ok ? kExitOk : kExitCheckFailed;
}

int cmd_bench(const Globals& g, const std::string& manifest_path) {
  const ExperimentManifest manifest = load_manifest(manifest_path);
  const fs::path out_dir = g.output_dir.empty() ? fs::path(".") : fs::path(g.output_dir);
  spdlog::info("running {} manifest entries into {}", manifest.entries.size(), out_dir.string());
  const int code = run_experiments(manifest, out_dir, [](const std::string& line) { spdlog::info("{}", line); });
  std::cout << "summary: " << (out_dir / "summary.yaml").string() << '\n';
  return code;
}

int cmd_gen(const Globals& g, const GeneratorOptions& options, const std::string& output) {
  const GameSpecd spec = random_game(options);
  if (output.empty()) {
    std::cout << write_spec(spec);
  } else {
    save_spec(spec, under_output_dir(g, output));
  }
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Variational GNE solver for aggregative games"};
  app.require_subcommand(1);
  app.fallthrough();
  Globals globals;
  app.add_option("--log-level", globals.log_level, "trace, debug, info, warn, error or off")
      ->check(CLI::IsMember({"trace", "debug", "info", "warn", "error", "off"}));
  app.add_option("--output-dir", globals.output_dir, "Directory for trace, summary and generated files");

  // solve
  auto* solve = app.add_subcommand("solve", "Compute an equilibrium");
  std::string spec_path, algorithm = "pfb", trace, convention = "total-at-estimate";
  StepOptions solve_steps;
  GraphOptions graph;
  std::optional<double> tol;
  std::optional<long> max_iters;
  std::optional<std::uint64_t> start_seed;
  bool unsafe = false;
  solve->add_option("--spec", spec_path, "Game spec file")->required();
  solve->add_option("--algorithm", algorithm, "pfb, apa or kns")->check(CLI::IsMember({"pfb", "apa", "kns"}));
  solve->add_option("--tol", tol, "Fixed-point residual tolerance");
  solve->add_option("--max-iters", max_iters, "Iteration limit");
  solve->add_option("--trace", trace, "Trace CSV path");
  solve->add_option("--seed", start_seed, "Draw the starting point uniformly from Omega with this seed");
  solve->add_flag("--unsafe", unsafe, "Skip step-size validation");
  solve->add_option("--estimate-convention", convention, "kns gradient convention: partial or total-at-estimate");
  solve_steps.add(solve);
  graph.add(solve);

  // verify
  auto* verify = app.add_subcommand("verify", "Run verification checks on a game");
  std::string verify_spec, check = "all";
  std::uint64_t verify_seed = 0;
  long samples = 1000;
  verify->add_option("--spec", verify_spec, "Game spec file")->required();
  verify->add_option("--check", check, "kkt, inclusion, constants, equivalence or all");
  verify->add_option("--seed", verify_seed, "Sampling seed");
  verify->add_option("--samples", samples, "Sample count for sampled checks");

  // bounds
  auto* bounds = app.add_subcommand("bounds", "Print step-size bounds and convergence constants");
  std::string bounds_spec;
  StepOptions bounds_steps;
  bounds->add_option("--spec", bounds_spec, "Game spec file")->required();
  bounds_steps.add(bounds);

  // bench
  auto* bench = app.add_subcommand("bench", "Run an experiment manifest");
  std::string manifest;
  bench->add_option("--manifest", manifest, "Manifest file")->required();

  // gen
  auto* gen = app.add_subcommand("gen", "Generate a random strictly feasible quadratic game");
  GeneratorOptions gen_options;
  std::string gen_out;
  gen->add_option("--agents", gen_options.agents, "Number of agents")->check(CLI::PositiveNumber);
  gen->add_option("--dim", gen_options.dim, "Decision dimension per agent")->check(CLI::PositiveNumber);
  gen->add_option("--constraints", gen_options.constraints, "Coupling rows")->check(CLI::NonNegativeNumber);
  gen->add_option("--seed", gen_options.seed, "Generator seed");
  gen->add_option("-o,--output", gen_out, "Output spec file (stdout if omitted)");

  CLI11_PARSE(app, argc, argv);

  auto logger = spdlog::stderr_color_mt("vgne");
  spdlog::set_default_logger(logger);
  spdlog::set_level(spdlog::level::from_str(globals.log_level));

  try {
    if (*solve) {
      return cmd_solve(globals, spec_path, algorithm, solve_steps, graph, tol, max_iters, trace, unsafe, convention,
                       start_seed);
    }
    if (*verify) return cmd_verify(verify_spec, check, verify_seed, samples);
    if (*bounds) return cmd_bounds(bounds_spec, bounds_steps);
    if (*bench) return cmd_bench(globals, manifest);
    if (*gen) return cmd_gen(globals, gen_options, gen_out);
  } catch (const std::exception& e) {
    spdlog::error("{}", e.what());
    return kExitError;
  }
  return kExitError;
}
