#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

namespace vgne {

struct TraceRow {
  long iter = 0;
  double fp_residual = 0;
  double kkt_residual = 0;
  double constraint_violation = 0;
  std::int64_t wall_ns = 0;
};

/// Outcome of an iterative solve.
struct ConvergenceReport {
  bool converged = false;
  /// Final KKT residual at or below the configured kkt_tol.
  bool kkt_met = false;
  long iterations = 0;
  double final_fp_residual = 0;
  double final_kkt_residual = 0;
  std::vector<TraceRow> trace;
  /// Resolved configuration and step sizes, as printable key/value pairs.
  std::vector<std::pair<std::string, std::string>> config_echo;
  /// Iterate pairs checked against the FB inclusion, and how many failed.
  long inclusion_checks = 0;
  long inclusion_failures = 0;
};

}  // namespace vgne
