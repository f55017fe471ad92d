#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "vgne/game.hpp"
#include "vgne/network.hpp"
#include "vgne/report.hpp"
#include "vgne/solvers.hpp"

namespace vgne {

enum class Algorithm { pfb, apa, kns };
enum class StepPolicy { theorem1, equal_ssce, explicit_steps };

Algorithm parse_algorithm(const std::string& name);
std::string to_string(Algorithm algorithm);
StepPolicy parse_step_policy(const std::string& name);
std::string to_string(StepPolicy policy);

struct SolveRequest {
  Algorithm algorithm = Algorithm::pfb;
  StepPolicy policy = StepPolicy::theorem1;
  /// Explicit steps; a single alpha is broadcast to every agent. apa and kns use alphas[0].
  std::vector<double> alphas;
  std::optional<double> gamma;
  double alpha_fraction = 0.9;
  double safety = 0.99;
  /// Required for kns.
  std::optional<CommGraph> graph;
  /// When set, x0 is drawn uniformly from Omega with this seed (lambda0 = 0); otherwise the default start.
  std::optional<std::uint64_t> start_seed;
  EstimateConvention convention = EstimateConvention::total_at_estimate;
  SolverConfig config;
};

/// Step-size bounds of a game for given steps. Entries that do not apply are nullopt.
struct StepBounds {
  std::optional<double> eta;
  std::optional<double> lip_f;
  double coupling_norm = 0;
  /// 2 eta / lip_f^2.
  std::optional<double> alpha_limit;
  std::optional<double> gamma_max;
  std::optional<double> ssce_bound;
  std::optional<double> beta;
  std::optional<double> theta;
  bool sufficient_pd = false;
  bool cholesky_pd = false;
};

/// Monotonicity constants of the spec, or the exact ones of a quadratic game when absent.
std::optional<Monotonicity<double>> resolve_monotonicity(const GameSpecd& spec);

StepBounds compute_bounds(const GameSpecd& spec, const StepSizes<double>& steps);

/// Resolves step sizes according to the request's policy.
StepSizes<double> resolve_steps(const GameSpecd& spec, const SolveRequest& request);

struct SolveOutcome {
  PrimalDualPointd point;
  ConvergenceReport report;
  StepSizes<double> steps;
  StepBounds bounds;
  /// kns only: |sigma_hat_i - sigma(x)| per agent.
  Vectord disagreement;
};

SolveOutcome run_solve(const GameSpecd& spec, const SolveRequest& request);

// ---------------------------------------------------------------------------
// Manifest runner.

struct ManifestEntry {
  std::filesystem::path spec;
  std::filesystem::path output;
  SolveRequest request;
  std::optional<std::filesystem::path> graph_file;
  std::optional<GraphRecipe> graph_recipe;
};

struct ExperimentManifest {
  std::vector<ManifestEntry> entries;
};

/// Spec and graph paths are resolved against `base_dir`; outputs must be unique.
ExperimentManifest parse_manifest(const std::string& text, const std::filesystem::path& base_dir,
                                  const std::string& source = "<string>");
ExperimentManifest load_manifest(const std::filesystem::path& path);

/// Runs every entry, writing <output_dir>/<entry.output> traces and <output_dir>/summary.yaml.
/// Per-entry failures are recorded and the run continues; I/O failures throw.
/// Returns 0 iff every entry converged.
int run_experiments(const ExperimentManifest& manifest, const std::filesystem::path& output_dir,
                    const std::function<void(const std::string&)>& log = {});

}  // namespace vgne
