#include "vgne/io.hpp"

#include <yaml-cpp/yaml.h>

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace vgne {

namespace {

class Reader {
 public:
  explicit Reader(std::string source) : source_(std::move(source)) {}

  std::string where(const YAML::Node& node) const {
    const YAML::Mark mark = node.Mark();
    if (mark.is_null()) return source_ + ": ";
    return source_ + ":" + std::to_string(mark.line + 1) + ":" + std::to_string(mark.column + 1) + ": ";
  }

  [[noreturn]] void parse_fail(const YAML::Node& node, const std::string& msg) const {
    throw ParseError(where(node) + msg);
  }
  [[noreturn]] void dim_fail(const YAML::Node& node, const std::string& msg) const {
    throw DimensionError(where(node) + msg);
  }
  [[noreturn]] void arg_fail(const YAML::Node& node, const std::string& msg) const {
    throw InvalidArgument(where(node) + msg);
  }

  YAML::Node require(const YAML::Node& parent, const char* key) const {
    if (!parent.IsMap()) parse_fail(parent, "expected a mapping");
    YAML::Node child = parent[key];
    if (!child) parse_fail(parent, std::string("missing key '") + key + "'");
    return child;
  }

  double real(const YAML::Node& node, const std::string& what) const {
    if (!node.IsScalar()) parse_fail(node, what + " must be a number");
    try {
      return node.as<double>();
    } catch (const YAML::Exception&) {
      parse_fail(node, what + " must be a number, got '" + node.Scalar() + "'");
    }
  }

  long integer(const YAML::Node& node, const std::string& what) const {
    if (!node.IsScalar()) parse_fail(node, what + " must be an integer");
    try {
      return node.as<long>();
    } catch (const YAML::Exception&) {
      parse_fail(node, what + " must be an integer, got '" + node.Scalar() + "'");
    }
  }

  Vectord vector(const YAML::Node& node, const std::string& what, Index expected) const {
    if (!node.IsSequence()) parse_fail(node, what + " must be a list");
    if (expected >= 0 && static_cast<Index>(node.size()) != expected) {
      dim_fail(node, what + ": expected length " + std::to_string(expected) + ", received " +
                         std::to_string(node.size()));
    }
    Vectord v(static_cast<Index>(node.size()));
    for (std::size_t k = 0; k < node.size(); ++k) v[static_cast<Index>(k)] = real(node[k], what);
    return v;
  }

  /// Row-major nested list.
  Matrixd matrix(const YAML::Node& node, const std::string& what, Index rows, Index cols) const {
    if (!node.IsSequence()) parse_fail(node, what + " must be a list of rows");
    if (rows >= 0 && static_cast<Index>(node.size()) != rows) {
      dim_fail(node, what + ": expected " + std::to_string(rows) + " rows, received " + std::to_string(node.size()));
    }
    Matrixd M(static_cast<Index>(node.size()), cols);
    for (std::size_t r = 0; r < node.size(); ++r) {
      M.row(static_cast<Index>(r)) = vector(node[r], what + " row " + std::to_string(r), cols).transpose();
    }
    return M;
  }

  const std::string& source() const { return source_; }

 private:
  std::string source_;
};

YAML::Node load_document(const std::string& text, const std::string& source) {
  try {
    YAML::Node root = YAML::Load(text);
    if (!root.IsMap()) throw ParseError(source + ": document must be a mapping");
    return root;
  } catch (const YAML::ParserException& e) {
    throw ParseError(source + ":" + std::to_string(e.mark.line + 1) + ":" + std::to_string(e.mark.column + 1) + ": " +
                     e.msg);
  }
}

template <typename Fn>
auto rethrow_with_source(const std::string& prefix, Fn&& fn) {
  try {
    return fn();
  } catch (const DimensionError& e) {
    throw DimensionError(prefix + e.what());
  } catch (const InvalidArgument& e) {
    throw InvalidArgument(prefix + e.what());
  }
}

void emit_vector(YAML::Emitter& out, const Vectord& v) {
  out << YAML::Flow << YAML::BeginSeq;
  for (Index k = 0; k < v.size(); ++k) out << v[k];
  out << YAML::EndSeq;
}

void emit_matrix(YAML::Emitter& out, const Matrixd& M) {
  out << YAML::Flow << YAML::BeginSeq;
  for (Index r = 0; r < M.rows(); ++r) emit_vector(out, M.row(r).transpose());
  out << YAML::EndSeq;
}

}  // namespace

std::string format_real(double value) {
  if (std::isnan(value)) return "nan";
  if (std::isinf(value)) return value > 0 ? "inf" : "-inf";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", value);
  return buf;
}

std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open '" + path.string() + "' for reading");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text_file(const std::filesystem::path& path, const std::string& text) {
  if (path.has_parent_path()) {
    std::error_code ec;
    std::filesystem::create_directories(path.parent_path(), ec);
    if (ec) throw Error("cannot create directory '" + path.parent_path().string() + "': " + ec.message());
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot open '" + path.string() + "' for writing");
  out << text;
  if (!out) throw Error("failed writing '" + path.string() + "'");
}

GameSpecd parse_spec(const std::string& text, const std::string& source) {
  const Reader rd(source);
  const YAML::Node root = load_document(text, source);

  const YAML::Node version = root["spec_version"];
  if (!version) throw VersionError(rd.where(root) + "missing spec_version");
  long v = 0;
  try {
    v = version.as<long>();
  } catch (const YAML::Exception&) {
    throw VersionError(rd.where(version) + "spec_version must be an integer, got '" + version.Scalar() + "'");
  }
  if (v != kSpecVersion) {
    throw VersionError(rd.where(version) + "unsupported spec_version " + std::to_string(v) + " (supported: " +
                       std::to_string(kSpecVersion) + ")");
  }

  const YAML::Node n_node = rd.require(root, "num_agents");
  const long N = rd.integer(n_node, "num_agents");
  if (N < 1) rd.arg_fail(n_node, "num_agents must be >= 1");
  const YAML::Node d_node = rd.require(root, "decision_dim");
  const long n = rd.integer(d_node, "decision_dim");
  if (n < 1) rd.arg_fail(d_node, "decision_dim must be >= 1");

  const YAML::Node sets = rd.require(root, "local_sets");
  if (!sets.IsSequence()) rd.parse_fail(sets, "local_sets must be a list");
  if (static_cast<long>(sets.size()) != N) {
    rd.dim_fail(sets, "local_sets: expected " + std::to_string(N) + " entries, received " + std::to_string(sets.size()));
  }
  std::vector<BoxSetd> boxes;
  for (long i = 0; i < N; ++i) {
    const YAML::Node entry = sets[static_cast<std::size_t>(i)];
    const std::string tag = "local_sets[" + std::to_string(i) + "]";
    Vectord lo = rd.vector(rd.require(entry, "lower"), tag + ".lower", n);
    Vectord hi = rd.vector(rd.require(entry, "upper"), tag + ".upper", n);
    for (Index j = 0; j < n; ++j) {
      if (!(lo[j] <= hi[j])) rd.arg_fail(entry, tag + ": lower > upper in coordinate " + std::to_string(j));
    }
    boxes.emplace_back(std::move(lo), std::move(hi));
  }

  const YAML::Node cost_node = rd.require(root, "cost");
  if (!cost_node.IsMap() || cost_node.size() != 1) {
    rd.parse_fail(cost_node, "cost must have exactly one of 'quadratic' or 'external'");
  }
  CostModel<double> cost;
  if (const YAML::Node quad = cost_node["quadratic"]) {
    QuadraticCostd qc;
    const YAML::Node q_node = rd.require(quad, "q");
    qc.q = rd.vector(q_node, "cost.quadratic.q", N);
    for (long i = 0; i < N; ++i) {
      if (!(qc.q[i] > 0)) rd.arg_fail(q_node[static_cast<std::size_t>(i)], "q[" + std::to_string(i) + "] must be > 0");
    }
    qc.c = rd.matrix(rd.require(quad, "c"), "cost.quadratic.c", n, n);
    const YAML::Node d_list = rd.require(quad, "d");
    if (!d_list.IsSequence()) rd.parse_fail(d_list, "cost.quadratic.d must be a list");
    if (static_cast<long>(d_list.size()) != N) {
      rd.dim_fail(d_list, "cost.quadratic.d: expected " + std::to_string(N) + " entries, received " +
                              std::to_string(d_list.size()));
    }
    for (long i = 0; i < N; ++i) {
      qc.d.push_back(rd.vector(d_list[static_cast<std::size_t>(i)], "cost.quadratic.d[" + std::to_string(i) + "]", n));
    }
    cost = std::move(qc);
  } else if (const YAML::Node ext = cost_node["external"]) {
    OracleCostd oc;
    const YAML::Node name = rd.require(ext, "name");
    if (!name.IsScalar()) rd.parse_fail(name, "cost.external.name must be a string");
    oc.label = name.Scalar();
    cost = std::move(oc);
  } else {
    rd.parse_fail(cost_node, "cost must have exactly one of 'quadratic' or 'external'");
  }

  std::vector<Matrixd> blocks;
  Vectord b(0);
  if (const YAML::Node coupling = root["coupling"]) {
    b = rd.vector(rd.require(coupling, "b"), "coupling.b", -1);
    const Index m = b.size();
    const YAML::Node a_list = rd.require(coupling, "A_blocks");
    if (!a_list.IsSequence()) rd.parse_fail(a_list, "coupling.A_blocks must be a list");
    if (static_cast<long>(a_list.size()) != N) {
      rd.dim_fail(a_list, "coupling.A_blocks: expected " + std::to_string(N) + " blocks, received " +
                              std::to_string(a_list.size()));
    }
    for (long i = 0; i < N; ++i) {
      const YAML::Node block = a_list[static_cast<std::size_t>(i)];
      if (!block.IsSequence()) rd.parse_fail(block, "coupling.A_blocks[" + std::to_string(i) + "] must be a list of rows");
      if (static_cast<Index>(block.size()) != m) {
        rd.dim_fail(block, "coupling.A_blocks[" + std::to_string(i) + "] of agent " + std::to_string(i) + " has " +
                               std::to_string(block.size()) + " rows, expected " + std::to_string(m) +
                               " (length of b)");
      }
      blocks.push_back(rd.matrix(block, "coupling.A_blocks[" + std::to_string(i) + "]", m, n));
    }
  } else {
    blocks.assign(static_cast<std::size_t>(N), Matrixd(0, n));
  }

  std::optional<Monotonicity<double>> mono;
  if (const YAML::Node mn = root["monotonicity"]) {
    const double eta = rd.real(rd.require(mn, "eta"), "monotonicity.eta");
    const double lip = rd.real(rd.require(mn, "lip_f"), "monotonicity.lip_f");
    if (!(eta > 0) || !(lip > 0)) rd.arg_fail(mn, "monotonicity constants must be positive");
    if (eta > lip) rd.arg_fail(mn, "monotonicity.eta must not exceed monotonicity.lip_f");
    mono = Monotonicity<double>{eta, lip};
  }

  return rethrow_with_source(source + ": ", [&] {
    return GameSpecd(N, n, std::move(boxes), std::move(cost), CouplingConstraintd(std::move(blocks), std::move(b)), mono);
  });
}

GameSpecd load_spec(const std::filesystem::path& path) { return parse_spec(read_text_file(path), path.string()); }

std::string write_spec(const GameSpecd& spec) {
  YAML::Emitter out;
  out.SetDoublePrecision(17);
  out << YAML::BeginMap;
  out << YAML::Key << "spec_version" << YAML::Value << kSpecVersion;
  out << YAML::Key << "num_agents" << YAML::Value << spec.num_agents();
  out << YAML::Key << "decision_dim" << YAML::Value << spec.dim();

  out << YAML::Key << "local_sets" << YAML::Value << YAML::BeginSeq;
  for (const auto& box : spec.local_sets()) {
    out << YAML::BeginMap;
    out << YAML::Key << "lower" << YAML::Value;
    emit_vector(out, box.lower());
    out << YAML::Key << "upper" << YAML::Value;
    emit_vector(out, box.upper());
    out << YAML::EndMap;
  }
  out << YAML::EndSeq;

  out << YAML::Key << "cost" << YAML::Value << YAML::BeginMap;
  if (spec.is_quadratic()) {
    const auto& q = spec.quadratic();
    out << YAML::Key << "quadratic" << YAML::Value << YAML::BeginMap;
    out << YAML::Key << "q" << YAML::Value;
    emit_vector(out, q.q);
    out << YAML::Key << "c" << YAML::Value;
    emit_matrix(out, q.c);
    out << YAML::Key << "d" << YAML::Value << YAML::BeginSeq;
    for (const auto& di : q.d) emit_vector(out, di);
    out << YAML::EndSeq << YAML::EndMap;
  } else {
    out << YAML::Key << "external" << YAML::Value << YAML::BeginMap;
    out << YAML::Key << "name" << YAML::Value << std::get<OracleCostd>(spec.cost()).label;
    out << YAML::EndMap;
  }
  out << YAML::EndMap;

  if (spec.num_constraints() > 0) {
    out << YAML::Key << "coupling" << YAML::Value << YAML::BeginMap;
    out << YAML::Key << "A_blocks" << YAML::Value << YAML::BeginSeq;
    for (const auto& block : spec.coupling().blocks()) emit_matrix(out, block);
    out << YAML::EndSeq;
    out << YAML::Key << "b" << YAML::Value;
    emit_vector(out, spec.coupling().b());
    out << YAML::EndMap;
  }

  if (const auto& mono = spec.monotonicity()) {
    out << YAML::Key << "monotonicity" << YAML::Value << YAML::BeginMap;
    out << YAML::Key << "eta" << YAML::Value << mono->eta;
    out << YAML::Key << "lip_f" << YAML::Value << mono->lip_f;
    out << YAML::EndMap;
  }
  out << YAML::EndMap;
  return std::string(out.c_str()) + "\n";
}

void save_spec(const GameSpecd& spec, const std::filesystem::path& path) { write_text_file(path, write_spec(spec)); }

CommGraph parse_graph(const std::string& text, const std::string& source) {
  const Reader rd(source);
  const YAML::Node root = load_document(text, source);
  const YAML::Node nn = rd.require(root, "num_nodes");
  const long num_nodes = rd.integer(nn, "num_nodes");
  if (num_nodes < 1) rd.arg_fail(nn, "num_nodes must be >= 1");
  std::vector<CommGraph::Edge> edges;
  if (const YAML::Node list = root["edges"]) {
    if (!list.IsSequence()) rd.parse_fail(list, "edges must be a list of [i, j] pairs");
    for (const auto& e : list) {
      if (!e.IsSequence() || e.size() != 2) rd.parse_fail(e, "each edge must be a pair [i, j]");
      const long i = rd.integer(e[0], "edge endpoint");
      const long j = rd.integer(e[1], "edge endpoint");
      if (i < 0 || j < 0 || i >= num_nodes || j >= num_nodes) rd.arg_fail(e, "edge endpoint out of range");
      if (i == j) rd.arg_fail(e, "self-loop at node " + std::to_string(i));
      edges.emplace_back(i, j);
    }
  }
  return CommGraph(num_nodes, edges);
}

CommGraph load_graph(const std::filesystem::path& path) { return parse_graph(read_text_file(path), path.string()); }

std::string write_graph(const CommGraph& graph) {
  YAML::Emitter out;
  out << YAML::BeginMap;
  out << YAML::Key << "num_nodes" << YAML::Value << graph.num_nodes();
  out << YAML::Key << "edges" << YAML::Value << YAML::BeginSeq;
  for (const auto& [i, j] : graph.edges()) out << YAML::Flow << YAML::BeginSeq << i << j << YAML::EndSeq;
  out << YAML::EndSeq << YAML::EndMap;
  return std::string(out.c_str()) + "\n";
}

void write_trace_csv(std::ostream& out, const ConvergenceReport& report) {
  out << "iter,fp_residual_phi,kkt_residual,max_constraint_violation,wall_ns\n";
  for (const auto& row : report.trace) {
    out << row.iter << ',' << format_real(row.fp_residual) << ',' << format_real(row.kkt_residual) << ','
        << format_real(row.constraint_violation) << ',' << row.wall_ns << '\n';
  }
}

void save_trace_csv(const ConvergenceReport& report, const std::filesystem::path& path) {
  std::ostringstream ss;
  write_trace_csv(ss, report);
  write_text_file(path, ss.str());
}

}  // namespace vgne
