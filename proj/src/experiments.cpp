#include "vgne/experiments.hpp"

#include <yaml-cpp/yaml.h>

#include <set>

#include "vgne/io.hpp"
#include "vgne/preconditioner.hpp"
#include "vgne/random.hpp"

namespace vgne {

Algorithm parse_algorithm(const std::string& name) {
  if (name == "pfb") return Algorithm::pfb;
  if (name == "apa") return Algorithm::apa;
  if (name == "kns") return Algorithm::kns;
  throw InvalidArgument("unknown algorithm '" + name + "' (expected pfb, apa or kns)");
}

std::string to_string(Algorithm algorithm) {
  switch (algorithm) {
    case Algorithm::pfb:
      return "pfb";
    case Algorithm::apa:
      return "apa";
    case Algorithm::kns:
      return "kns";
  }
  return "?";
}

StepPolicy parse_step_policy(const std::string& name) {
  if (name == "theorem1") return StepPolicy::theorem1;
  if (name == "equal_ssce") return StepPolicy::equal_ssce;
  if (name == "explicit") return StepPolicy::explicit_steps;
  throw InvalidArgument("unknown step policy '" + name + "' (expected theorem1, equal_ssce or explicit)");
}

std::string to_string(StepPolicy policy) {
  switch (policy) {
    case StepPolicy::theorem1:
      return "theorem1";
    case StepPolicy::equal_ssce:
      return "equal_ssce";
    case StepPolicy::explicit_steps:
      return "explicit";
  }
  return "?";
}

std::optional<Monotonicity<double>> resolve_monotonicity(const GameSpecd& spec) {
  if (spec.monotonicity()) return spec.monotonicity();
  if (spec.is_quadratic()) return exact_monotonicity(spec);
  return std::nullopt;
}

StepBounds compute_bounds(const GameSpecd& spec, const StepSizes<double>& steps) {
  StepBounds out;
  out.coupling_norm = operator_norm(spec.coupling().stacked());
  const auto phi = build_phi_s(steps.alphas, steps.gamma, spec.coupling());
  const auto pd = check_positive_definite(phi);
  out.sufficient_pd = pd.sufficient_condition;
  out.cholesky_pd = pd.cholesky_succeeds;
  const auto mono = resolve_monotonicity(spec);
  if (!mono) return out;
  out.eta = mono->eta;
  out.lip_f = mono->lip_f;
  out.alpha_limit = 2 * mono->cocoercivity();
  out.ssce_bound = equal_step_bound(mono->eta, mono->lip_f, out.coupling_norm);
  if (steps.alphas.maxCoeff() < *out.alpha_limit) {
    out.gamma_max = gamma_max(steps.alphas, mono->eta, mono->lip_f, out.coupling_norm);
  }
  if (schur_lambda_min(phi) > 0) {
    out.beta = cocoercivity_beta(phi, mono->eta, mono->lip_f);
    if (*out.beta > 0.5) out.theta = averagedness_theta(*out.beta);
  }
  return out;
}

StepSizes<double> resolve_steps(const GameSpecd& spec, const SolveRequest& request) {
  const Index N = spec.num_agents();
  if (request.policy == StepPolicy::explicit_steps) {
    if (request.alphas.empty()) throw InvalidArgument("explicit step policy needs alpha");
    Vectord alphas(N);
    if (request.alphas.size() == 1) {
      alphas.setConstant(request.alphas.front());
    } else {
      detail::require_size("explicit alphas", N, static_cast<Index>(request.alphas.size()));
      alphas = Vectord::Map(request.alphas.data(), N);
    }
    double gamma = request.gamma.value_or(request.algorithm == Algorithm::apa ? alphas[0] : 1.0);
    return {alphas, gamma};
  }
  const auto mono = resolve_monotonicity(spec);
  if (!mono) {
    throw InvalidArgument("step policy '" + to_string(request.policy) +
                          "' needs monotonicity constants; add them to the spec or use explicit steps");
  }
  const double a = operator_norm(spec.coupling().stacked());
  if (request.policy == StepPolicy::equal_ssce || request.algorithm == Algorithm::apa) {
    return equal_steps(*mono, a, N, request.safety);
  }
  return theorem1_steps(*mono, a, N, request.alpha_fraction, request.safety);
}

SolveOutcome run_solve(const GameSpecd& spec, const SolveRequest& request) {
  SolveOutcome out;
  out.steps = resolve_steps(spec, request);
  out.bounds = compute_bounds(spec, out.steps);

  std::optional<PrimalDualPointd> omega0;
  if (request.start_seed) {
    Rng rng(*request.start_seed);
    omega0 = PrimalDualPointd{rng.in_box(spec.collective_box()), Vectord::Zero(spec.num_constraints())};
  }

  switch (request.algorithm) {
    case Algorithm::pfb: {
      const auto phi = build_phi_s(out.steps.alphas, out.steps.gamma, spec.coupling());
      auto result = pfb_solve(spec, phi, request.config, omega0);
      out.point = std::move(result.point);
      out.report = std::move(result.report);
      break;
    }
    case Algorithm::apa: {
      const double tau = out.steps.alphas[0];
      if (!(out.steps.alphas.array() == tau).all() || out.steps.gamma != tau) {
        throw InvalidArgument("apa needs equal primal and dual steps (alpha_i = gamma = tau)");
      }
      auto result = apa_solve(spec, build_apa_matrix(tau, spec.coupling()), request.config, omega0);
      out.point = std::move(result.point);
      out.report = std::move(result.report);
      break;
    }
    case Algorithm::kns: {
      if (!request.graph) throw InvalidArgument("kns needs a communication graph");
      std::optional<Vectord> x0;
      if (omega0) x0 = omega0->x;
      auto result = kns_solve(spec, *request.graph, out.steps.alphas[0], request.config, x0, std::nullopt,
                              request.convention);
      out.point = PrimalDualPointd{std::move(result.x), Vectord(0)};
      out.report = std::move(result.report);
      out.disagreement = std::move(result.disagreement);
      break;
    }
  }
  return out;
}

// ---------------------------------------------------------------------------

namespace {

std::string mark_of(const std::string& source, const YAML::Node& node) {
  const YAML::Mark m = node.Mark();
  if (m.is_null()) return source + ": ";
  return source + ":" + std::to_string(m.line + 1) + ":" + std::to_string(m.column + 1) + ": ";
}

template <typename T>
T scalar_as(const std::string& source, const YAML::Node& node, const char* what) {
  try {
    return node.as<T>();
  } catch (const YAML::Exception&) {
    throw ParseError(mark_of(source, node) + what + " has the wrong type");
  }
}

void emit_optional(YAML::Emitter& out, const char* key, const std::optional<double>& value) {
  out << YAML::Key << key << YAML::Value;
  if (value) {
    out << *value;
  } else {
    out << YAML::Null;
  }
}

}  // namespace

ExperimentManifest parse_manifest(const std::string& text, const std::filesystem::path& base_dir,
                                  const std::string& source) {
  YAML::Node root;
  try {
    root = YAML::Load(text);
  } catch (const YAML::ParserException& e) {
    throw ParseError(source + ":" + std::to_string(e.mark.line + 1) + ": " + e.msg);
  }
  ExperimentManifest manifest;
  if (root.IsNull()) return manifest;
  YAML::Node list = root.IsMap() ? root["entries"] : root;
  if (!list || list.IsNull()) return manifest;
  if (!list.IsSequence()) throw ParseError(mark_of(source, list) + "entries must be a list");

  std::set<std::string> outputs;
  for (const auto& node : list) {
    if (!node.IsMap()) throw ParseError(mark_of(source, node) + "manifest entry must be a mapping");
    ManifestEntry entry;
    auto need = [&](const char* key) {
      YAML::Node child = node[key];
      if (!child) throw ParseError(mark_of(source, node) + "missing key '" + key + "'");
      return child;
    };
    entry.spec = base_dir / scalar_as<std::string>(source, need("spec"), "spec");
    const YAML::Node out_node = need("output");
    entry.output = scalar_as<std::string>(source, out_node, "output");
    if (!outputs.insert(entry.output.lexically_normal().string()).second) {
      throw ParseError(mark_of(source, out_node) + "duplicate output path '" + entry.output.string() + "'");
    }
    try {
      if (node["algorithm"]) entry.request.algorithm = parse_algorithm(scalar_as<std::string>(source, node["algorithm"], "algorithm"));
      if (node["step_policy"]) {
        entry.request.policy = parse_step_policy(scalar_as<std::string>(source, node["step_policy"], "step_policy"));
      }
    } catch (const InvalidArgument& e) {
      throw ParseError(mark_of(source, node) + e.what());
    }
    if (const YAML::Node a = node["alpha"]) {
      if (a.IsSequence()) {
        entry.request.alphas = scalar_as<std::vector<double>>(source, a, "alpha");
      } else {
        entry.request.alphas = {scalar_as<double>(source, a, "alpha")};
      }
    }
    if (const YAML::Node g = node["gamma"]) entry.request.gamma = scalar_as<double>(source, g, "gamma");
    if (entry.request.policy == StepPolicy::explicit_steps && entry.request.alphas.empty()) {
      throw ParseError(mark_of(source, node) + "explicit step policy needs 'alpha'");
    }
    if (const YAML::Node s = node["seed"]) entry.request.start_seed = scalar_as<std::uint64_t>(source, s, "seed");
    if (const YAML::Node s = node["safety"]) entry.request.safety = scalar_as<double>(source, s, "safety");
    if (const YAML::Node s = node["max_iters"]) entry.request.config.max_iters = scalar_as<long>(source, s, "max_iters");
    if (const YAML::Node s = node["tol"]) entry.request.config.residual_tol = scalar_as<double>(source, s, "tol");
    if (const YAML::Node s = node["trace_every"]) {
      entry.request.config.trace_every = scalar_as<long>(source, s, "trace_every");
    }
    if (const YAML::Node s = node["unsafe"]) entry.request.config.allow_unsafe_steps = scalar_as<bool>(source, s, "unsafe");
    if (const YAML::Node g = node["graph"]) {
      if (g.IsScalar()) {
        entry.graph_file = base_dir / g.Scalar();
      } else if (g.IsMap()) {
        GraphRecipe recipe;
        try {
          recipe.kind = parse_graph_kind(scalar_as<std::string>(source, g["kind"], "graph.kind"));
        } catch (const InvalidArgument& e) {
          throw ParseError(mark_of(source, g) + e.what());
        }
        if (g["num_nodes"]) recipe.num_nodes = scalar_as<long>(source, g["num_nodes"], "graph.num_nodes");
        if (g["degree"]) recipe.degree = scalar_as<long>(source, g["degree"], "graph.degree");
        if (g["seed"]) recipe.seed = scalar_as<std::uint64_t>(source, g["seed"], "graph.seed");
        entry.graph_recipe = recipe;
      } else {
        throw ParseError(mark_of(source, g) + "graph must be a file path or a {kind, ...} mapping");
      }
    }
    manifest.entries.push_back(std::move(entry));
  }
  return manifest;
}

ExperimentManifest load_manifest(const std::filesystem::path& path) {
  return parse_manifest(read_text_file(path), path.parent_path(), path.string());
}

int run_experiments(const ExperimentManifest& manifest, const std::filesystem::path& output_dir,
                    const std::function<void(const std::string&)>& log) {
  YAML::Emitter summary;
  summary.SetDoublePrecision(17);
  summary << YAML::BeginMap << YAML::Key << "entries" << YAML::Value << YAML::BeginSeq;
  bool all_converged = true;

  for (std::size_t k = 0; k < manifest.entries.size(); ++k) {
    const ManifestEntry& entry = manifest.entries[k];
    summary << YAML::BeginMap;
    summary << YAML::Key << "index" << YAML::Value << k;
    summary << YAML::Key << "spec" << YAML::Value << entry.spec.filename().string();
    summary << YAML::Key << "algorithm" << YAML::Value << to_string(entry.request.algorithm);
    summary << YAML::Key << "step_policy" << YAML::Value << to_string(entry.request.policy);
    summary << YAML::Key << "output" << YAML::Value << entry.output.string();

    std::optional<SolveOutcome> outcome;
    std::string failure;
    try {
      const GameSpecd spec = load_spec(entry.spec);
      SolveRequest request = entry.request;
      if (entry.graph_file) request.graph = load_graph(*entry.graph_file);
      if (entry.graph_recipe) {
        GraphRecipe recipe = *entry.graph_recipe;
        if (recipe.num_nodes <= 1) recipe.num_nodes = spec.num_agents();
        request.graph = build_graph(recipe);
      }
      outcome = run_solve(spec, request);
    } catch (const Error& e) {
      failure = e.what();
    } catch (const YAML::Exception& e) {
      failure = e.what();
    }

    if (outcome) {
      // An unwritable trace aborts the whole run.
      save_trace_csv(outcome->report, output_dir / entry.output);
      const auto& r = outcome->report;
      summary << YAML::Key << "status" << YAML::Value << (r.converged ? "converged" : "max_iters");
      summary << YAML::Key << "iterations" << YAML::Value << r.iterations;
      summary << YAML::Key << "final_fp_residual" << YAML::Value << r.final_fp_residual;
      summary << YAML::Key << "final_kkt_residual" << YAML::Value << r.final_kkt_residual;
      summary << YAML::Key << "kkt_met" << YAML::Value << r.kkt_met;
      summary << YAML::Key << "alphas" << YAML::Value << YAML::Flow << YAML::BeginSeq;
      for (Index i = 0; i < outcome->steps.alphas.size(); ++i) summary << outcome->steps.alphas[i];
      summary << YAML::EndSeq;
      summary << YAML::Key << "gamma" << YAML::Value << outcome->steps.gamma;
      const auto& b = outcome->bounds;
      emit_optional(summary, "gamma_max", b.gamma_max);
      emit_optional(summary, "ssce_bound", b.ssce_bound);
      emit_optional(summary, "beta", b.beta);
      emit_optional(summary, "theta", b.theta);
      all_converged = all_converged && r.converged;
      if (log) {
        log("entry " + std::to_string(k) + " (" + entry.spec.filename().string() + ", " +
            to_string(entry.request.algorithm) + "): " + (r.converged ? "converged" : "max_iters") + " after " +
            std::to_string(r.iterations) + " iterations");
      }
    } else {
      summary << YAML::Key << "status" << YAML::Value << "error";
      summary << YAML::Key << "error" << YAML::Value << failure;
      all_converged = false;
      if (log) log("entry " + std::to_string(k) + " failed: " + failure);
    }
    summary << YAML::EndMap;
  }
  summary << YAML::EndSeq << YAML::EndMap;
  write_text_file(output_dir / "summary.yaml", std::string(summary.c_str()) + "\n");
  return all_converged ? 0 : 1;
}

}  // namespace vgne
