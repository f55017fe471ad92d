#include "vgne/network.hpp"

#include <algorithm>
#include <queue>
#include <set>

#include "vgne/random.hpp"

namespace vgne {

CommGraph::CommGraph(Index num_nodes, const std::vector<Edge>& edges) : num_nodes_(num_nodes) {
  if (num_nodes < 1) throw InvalidArgument("CommGraph: num_nodes must be >= 1");
  std::set<Edge> unique;
  for (auto [i, j] : edges) {
    if (i < 0 || j < 0 || i >= num_nodes || j >= num_nodes) {
      throw InvalidArgument("CommGraph: edge (" + std::to_string(i) + ", " + std::to_string(j) + ") out of range");
    }
    if (i == j) throw InvalidArgument("CommGraph: self-loop at node " + std::to_string(i));
    unique.insert({std::min(i, j), std::max(i, j)});
  }
  edges_.assign(unique.begin(), unique.end());
  neighbors_.assign(static_cast<std::size_t>(num_nodes), {});
  for (const auto& [i, j] : edges_) {
    neighbors_[static_cast<std::size_t>(i)].push_back(j);
    neighbors_[static_cast<std::size_t>(j)].push_back(i);
  }
  for (auto& nb : neighbors_) std::sort(nb.begin(), nb.end());
}

bool CommGraph::is_regular() const {
  for (Index i = 1; i < num_nodes_; ++i) {
    if (degree(i) != degree(0)) return false;
  }
  return true;
}

bool CommGraph::is_connected() const {
  if (num_nodes_ <= 1) return true;
  std::vector<char> seen(static_cast<std::size_t>(num_nodes_), 0);
  std::queue<Index> frontier;
  frontier.push(0);
  seen[0] = 1;
  Index count = 1;
  while (!frontier.empty()) {
    const Index i = frontier.front();
    frontier.pop();
    for (Index j : neighbors(i)) {
      if (!seen[static_cast<std::size_t>(j)]) {
        seen[static_cast<std::size_t>(j)] = 1;
        ++count;
        frontier.push(j);
      }
    }
  }
  return count == num_nodes_;
}

GraphKind parse_graph_kind(const std::string& name) {
  if (name == "complete") return GraphKind::complete;
  if (name == "cycle") return GraphKind::cycle;
  if (name == "path") return GraphKind::path;
  if (name == "star") return GraphKind::star;
  if (name == "random_regular") return GraphKind::random_regular;
  throw InvalidArgument("unknown graph kind '" + name + "'");
}

std::string to_string(GraphKind kind) {
  switch (kind) {
    case GraphKind::complete:
      return "complete";
    case GraphKind::cycle:
      return "cycle";
    case GraphKind::path:
      return "path";
    case GraphKind::star:
      return "star";
    case GraphKind::random_regular:
      return "random_regular";
  }
  return "unknown";
}

namespace {

// Pairs stubs uniformly among the pairs that keep the graph simple; restarts when stuck.
std::vector<CommGraph::Edge> sample_regular_edges(Index n, Index d, Rng& rng) {
  constexpr int kRestarts = 1000;
  for (int attempt = 0; attempt < kRestarts; ++attempt) {
    std::vector<Index> stubs;
    stubs.reserve(static_cast<std::size_t>(n * d));
    for (Index i = 0; i < n; ++i) {
      for (Index k = 0; k < d; ++k) stubs.push_back(i);
    }
    std::set<CommGraph::Edge> edges;
    bool stuck = false;
    while (!stubs.empty() && !stuck) {
      std::vector<std::pair<std::size_t, std::size_t>> valid;
      for (std::size_t a = 0; a < stubs.size(); ++a) {
        for (std::size_t b = a + 1; b < stubs.size(); ++b) {
          const Index u = std::min(stubs[a], stubs[b]);
          const Index v = std::max(stubs[a], stubs[b]);
          if (u != v && !edges.count({u, v})) valid.emplace_back(a, b);
        }
      }
      if (valid.empty()) {
        stuck = true;
        break;
      }
      const auto [a, b] = valid[rng.below(valid.size())];
      edges.insert({std::min(stubs[a], stubs[b]), std::max(stubs[a], stubs[b])});
      stubs.erase(stubs.begin() + static_cast<std::ptrdiff_t>(b));
      stubs.erase(stubs.begin() + static_cast<std::ptrdiff_t>(a));
    }
    if (!stuck) return {edges.begin(), edges.end()};
  }
  throw NumericalError("build_graph: could not pair stubs into a simple regular graph");
}

}  // namespace

CommGraph build_graph(const GraphRecipe& recipe) {
  const Index n = recipe.num_nodes;
  if (n < 1) throw InvalidArgument("build_graph: num_nodes must be >= 1");
  std::vector<CommGraph::Edge> edges;
  switch (recipe.kind) {
    case GraphKind::complete:
      for (Index i = 0; i < n; ++i) {
        for (Index j = i + 1; j < n; ++j) edges.emplace_back(i, j);
      }
      return CommGraph(n, edges);
    case GraphKind::cycle:
      if (n < 3) throw InvalidArgument("build_graph: cycle needs at least 3 nodes");
      for (Index i = 0; i < n; ++i) edges.emplace_back(i, (i + 1) % n);
      return CommGraph(n, edges);
    case GraphKind::path:
      for (Index i = 0; i + 1 < n; ++i) edges.emplace_back(i, i + 1);
      return CommGraph(n, edges);
    case GraphKind::star:
      for (Index i = 1; i < n; ++i) edges.emplace_back(0, i);
      return CommGraph(n, edges);
    case GraphKind::random_regular: {
      const Index d = recipe.degree;
      if (d < 1 || d >= n) throw InvalidArgument("build_graph: random_regular needs 1 <= degree < num_nodes");
      if ((d * n) % 2 != 0) throw InvalidArgument("build_graph: random_regular needs degree * num_nodes even");
      Rng rng(recipe.seed);
      for (int attempt = 0; attempt < 100; ++attempt) {
        CommGraph g(n, sample_regular_edges(n, d, rng));
        if (g.is_connected()) return g;
      }
      throw NumericalError("build_graph: no connected regular graph after 100 samples");
    }
  }
  throw InvalidArgument("build_graph: unknown kind");
}

}  // namespace vgne
