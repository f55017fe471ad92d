#include "doctest.h"

#include "fixtures.hpp"
#include "vgne/network.hpp"
#include "vgne/random.hpp"

using namespace vgne;
using fixtures::vec;

TEST_CASE("mix worked examples") {
  const auto k3 = build_graph({GraphKind::complete, 3});
  CHECK(mix(vec({3, 6, 9}), k3, 1) == vec({6, 6, 6}));
  const CommGraph empty(3, {});
  CHECK(mix(vec({1, 2, 3}), empty, 1) == vec({1, 2, 3}));
  const auto path = build_graph({GraphKind::path, 3});
  CHECK(mix(vec({0, 3, 6}), path, 1) == vec({1.5, 3, 4.5}));
  CHECK_THROWS_AS(mix(vec({1, 2}), path, 1), DimensionError);
}

TEST_CASE("mix agrees with the Kronecker form") {
  Rng rng(1);
  const auto g = build_graph({GraphKind::random_regular, 8, 3, 5});
  const Index n = 2;
  const Matrixd W = g.mixing_matrix();
  const Vectord v = rng.uniform_vector(8 * n, -1, 1);
  Vectord expected = Vectord::Zero(8 * n);
  for (Index i = 0; i < 8; ++i)
    for (Index j = 0; j < 8; ++j) expected.segment(i * n, n) += W(i, j) * v.segment(j * n, n);
  CHECK((mix(v, g, n) - expected).lpNorm<Eigen::Infinity>() <= 1e-15);
}

TEST_CASE("build_graph") {
  const auto cycle = build_graph({GraphKind::cycle, 4});
  for (Index i = 0; i < 4; ++i) CHECK(cycle.degree(i) == 2);
  const auto k5 = build_graph({GraphKind::complete, 5});
  for (Index i = 0; i < 5; ++i) CHECK(k5.degree(i) == 4);
  Eigen::SelfAdjointEigenSolver<Matrixd> eig(k5.laplacian());
  int zeros = 0;
  for (Index i = 0; i < 5; ++i) zeros += std::abs(eig.eigenvalues()[i]) < 1e-10;
  CHECK(zeros == 1);
  const auto p2 = build_graph({GraphKind::path, 2});
  CHECK(p2.edges().size() == 1);

  const auto a = build_graph({GraphKind::random_regular, 10, 3, 42});
  const auto b = build_graph({GraphKind::random_regular, 10, 3, 42});
  CHECK(a.edges() == b.edges());
  CHECK(a.is_regular());
  CHECK(a.is_connected());
  CHECK_THROWS_AS(build_graph({GraphKind::random_regular, 5, 3, 1}), InvalidArgument);
  CHECK_THROWS_AS(build_graph({GraphKind::random_regular, 5, 5, 1}), InvalidArgument);
  CHECK_THROWS_AS(build_graph({GraphKind::cycle, 2}), InvalidArgument);
  CHECK(parse_graph_kind("random_regular") == GraphKind::random_regular);
  CHECK(to_string(GraphKind::star) == "star");
  CHECK_THROWS_AS(parse_graph_kind("torus"), InvalidArgument);
  CHECK_THROWS_AS(CommGraph(3, {{1, 1}}), InvalidArgument);
  CHECK_THROWS_AS(CommGraph(3, {{0, 3}}), InvalidArgument);
  CHECK(CommGraph(3, {{0, 1}, {1, 0}}).edges().size() == 1);
}

TEST_CASE("graph matrices") {
  for (auto kind : {GraphKind::complete, GraphKind::cycle, GraphKind::path, GraphKind::star}) {
    const auto g = build_graph({kind, 6});
    const Matrixd E = g.adjacency_matrix();
    CHECK(E == E.transpose());
    CHECK(E.diagonal().isZero(0));
    CHECK((g.laplacian() * Vectord::Ones(6)).isZero(0));
    CHECK((g.mixing_matrix().rowwise().sum() - Vectord::Ones(6)).lpNorm<Eigen::Infinity>() <= 1e-14);
    for (Index i = 0; i < 6; ++i)
      for (Index j : g.neighbors(i)) CHECK(j != i);
  }
}

TEST_CASE("W is doubly stochastic on regular graphs only") {
  for (auto recipe : {GraphRecipe{GraphKind::cycle, 7}, GraphRecipe{GraphKind::complete, 5},
                      GraphRecipe{GraphKind::random_regular, 12, 4, 3}}) {
    const auto g = build_graph(recipe);
    CHECK((g.mixing_matrix().colwise().sum().transpose() - Vectord::Ones(g.num_nodes())).lpNorm<Eigen::Infinity>() <=
          1e-14);
    // Second-largest singular value below one on connected regular graphs.
    Eigen::JacobiSVD<Matrixd> svd(g.mixing_matrix());
    CHECK(svd.singularValues()(1) < 1 - 1e-12);
  }
  const auto star = build_graph({GraphKind::star, 5});
  CHECK_FALSE(star.is_regular());
  CHECK((star.mixing_matrix().colwise().sum().transpose() - Vectord::Ones(5)).lpNorm<Eigen::Infinity>() > 1e-3);
}

TEST_CASE("consensus states are invariant under mixing") {
  Rng rng(4);
  const auto g = build_graph({GraphKind::star, 6});
  const Vectord s = rng.uniform_vector(3, -1, 1);
  const Vectord v = s.replicate(6, 1);
  CHECK((mix(v, g, 3) - v).lpNorm<Eigen::Infinity>() <= 1e-15);
}
