#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>

#include "vgne/game.hpp"
#include "vgne/network.hpp"
#include "vgne/report.hpp"

namespace vgne {

inline constexpr int kSpecVersion = 1;

/// Parses a game spec document. Errors carry "<source>:<line>:<column>:" prefixes and keep their kind:
/// ParseError for malformed documents, DimensionError for inconsistent sizes, VersionError for an
/// unsupported spec_version, InvalidArgument for violated invariants (q <= 0, lower > upper, ...).
GameSpecd parse_spec(const std::string& text, const std::string& source = "<string>");
GameSpecd load_spec(const std::filesystem::path& path);

/// Canonical rendering: reals with 17 significant digits, so parse_spec(write_spec(s)) == s bit for bit.
std::string write_spec(const GameSpecd& spec);
void save_spec(const GameSpecd& spec, const std::filesystem::path& path);

/// Graph document: num_nodes and edges as 0-based index pairs.
CommGraph parse_graph(const std::string& text, const std::string& source = "<string>");
CommGraph load_graph(const std::filesystem::path& path);
std::string write_graph(const CommGraph& graph);

/// Columns iter,fp_residual_phi,kkt_residual,max_constraint_violation,wall_ns; reals as %.17g.
void write_trace_csv(std::ostream& out, const ConvergenceReport& report);
void save_trace_csv(const ConvergenceReport& report, const std::filesystem::path& path);

/// %.17g, with inf/-inf/nan spelled out.
std::string format_real(double value);

/// Whole file as a string; throws Error when it cannot be read.
std::string read_text_file(const std::filesystem::path& path);
/// Creates parent directories as needed; throws Error on failure.
void write_text_file(const std::filesystem::path& path, const std::string& text);

}  // namespace vgne
