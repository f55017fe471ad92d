#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "vgne/game.hpp"

namespace vgne {

/// Undirected simple graph over agents 0..N-1.
class CommGraph {
 public:
  using Edge = std::pair<Index, Index>;

  CommGraph() = default;
  /// Edges are unordered pairs; duplicates are merged, self-loops are rejected.
  CommGraph(Index num_nodes, const std::vector<Edge>& edges);

  Index num_nodes() const { return num_nodes_; }
  /// Sorted edge list with first < second.
  const std::vector<Edge>& edges() const { return edges_; }
  /// Sorted neighbors of node i (i itself excluded).
  const std::vector<Index>& neighbors(Index i) const { return neighbors_[static_cast<std::size_t>(i)]; }
  Index degree(Index i) const { return static_cast<Index>(neighbors(i).size()); }

  bool is_regular() const;
  bool is_connected() const;

  template <typename Scalar = double>
  Matrix<Scalar> degree_matrix() const {
    Matrix<Scalar> D = Matrix<Scalar>::Zero(num_nodes_, num_nodes_);
    for (Index i = 0; i < num_nodes_; ++i) D(i, i) = static_cast<Scalar>(degree(i));
    return D;
  }

  template <typename Scalar = double>
  Matrix<Scalar> adjacency_matrix() const {
    Matrix<Scalar> E = Matrix<Scalar>::Zero(num_nodes_, num_nodes_);
    for (const auto& [i, j] : edges_) {
      E(i, j) = Scalar(1);
      E(j, i) = Scalar(1);
    }
    return E;
  }

  /// L = D - E.
  template <typename Scalar = double>
  Matrix<Scalar> laplacian() const {
    return degree_matrix<Scalar>() - adjacency_matrix<Scalar>();
  }

  /// W = (I + D)^{-1} (I + E).
  template <typename Scalar = double>
  Matrix<Scalar> mixing_matrix() const {
    Matrix<Scalar> W = adjacency_matrix<Scalar>();
    W.diagonal().setOnes();
    for (Index i = 0; i < num_nodes_; ++i) W.row(i) /= static_cast<Scalar>(degree(i) + 1);
    return W;
  }

 private:
  Index num_nodes_ = 0;
  std::vector<Edge> edges_;
  std::vector<std::vector<Index>> neighbors_;
};

/// (W (x) I_n) v: each block replaced by the average of itself and its neighbors' blocks.
template <typename Scalar>
Vector<Scalar> mix(const Vector<Scalar>& v, const CommGraph& graph, Index n) {
  if (n < 1) throw InvalidArgument("mix: block dimension must be positive");
  detail::require_size("mix: v", graph.num_nodes() * n, v.size());
  Vector<Scalar> out(v.size());
  for (Index i = 0; i < graph.num_nodes(); ++i) {
    auto block = out.segment(i * n, n);
    block = v.segment(i * n, n);
    for (Index j : graph.neighbors(i)) block += v.segment(j * n, n);
    block /= static_cast<Scalar>(graph.degree(i) + 1);
  }
  return out;
}

enum class GraphKind { complete, cycle, path, star, random_regular };

struct GraphRecipe {
  GraphKind kind = GraphKind::complete;
  Index num_nodes = 1;
  /// Degree for random_regular.
  Index degree = 0;
  std::uint64_t seed = 0;
};

GraphKind parse_graph_kind(const std::string& name);
std::string to_string(GraphKind kind);

/// Deterministic graph construction. random_regular resamples up to 100 times until connected.
CommGraph build_graph(const GraphRecipe& recipe);

}  // namespace vgne
