#include "doctest.h"

#include <cmath>

#include "fixtures.hpp"
#include "vgne/random.hpp"
#include "vgne/verification.hpp"

using namespace vgne;
using fixtures::mat;
using fixtures::vec;

namespace {

GameSpecd two_by_two() {
  QuadraticCostd cost{vec({1, 1}), Matrixd::Zero(2, 2), {Vectord::Zero(2), Vectord::Zero(2)}};
  return GameSpecd(2, 2, {BoxSetd::uniform(2, -1, 1), BoxSetd::uniform(2, -1, 1)}, cost, CouplingConstraintd::none(2, 2));
}

}  // namespace

TEST_CASE("aggregate averages agent blocks") {
  CHECK(aggregate(vec({1, 3}), fixtures::scalar_game({1, 1}, 0, {0, 0}, -5, 5)) == vec({2}));
  const auto spec3 = fixtures::random_spec(1, 3, 2, 0);
  CHECK(aggregate(Vectord(Vectord::Zero(6)), spec3) == vec({0, 0}));
  CHECK(aggregate(vec({1, 2, 3, 4}), two_by_two()) == vec({2, 3}));
}

TEST_CASE("aggregate rejects wrong length with expected and received") {
  try {
    aggregate(vec({1, 2, 3}), two_by_two());
    FAIL("expected DimensionError");
  } catch (const DimensionError& e) {
    CHECK(e.expected() == 4);
    CHECK(e.received() == 3);
  }
}

TEST_CASE("aggregate is linear") {
  const auto spec = fixtures::random_spec(7, 4, 2, 0);
  Rng rng(3);
  for (int t = 0; t < 20; ++t) {
    const Vectord x = rng.uniform_vector(8, -5, 5);
    const Vectord y = rng.uniform_vector(8, -5, 5);
    const double a = rng.uniform(-2, 2), b = rng.uniform(-2, 2);
    const Vectord lhs = aggregate(Vectord(a * x + b * y), spec);
    const Vectord rhs = a * aggregate(x, spec) + b * aggregate(y, spec);
    CHECK((lhs - rhs).lpNorm<Eigen::Infinity>() <= 1e-14);
  }
}

TEST_CASE("pseudo_gradient worked examples") {
  CHECK(pseudo_gradient(vec({5, -5}), fixtures::scalar_game({1, 1}, 0, {0, 0}, -10, 10)) == vec({5, -5}));
  CHECK(pseudo_gradient(vec({1}), fixtures::scalar_game({2}, 1, {3}, -10, 10)) == vec({7}));
}

TEST_CASE("pseudo_gradient of a single agent matches finite differences of its cost") {
  // J(x) = x^2 + x*x + 3x with N = 1, so dJ/dx = 2x + 2x + 3 at x = 1 is 7.
  const auto spec = fixtures::scalar_game({2}, 1, {3}, -10, 10);
  auto J = [](double x) { return 0.5 * 2 * x * x + (x + 3) * x; };
  const double h = 1e-6;
  CHECK(pseudo_gradient(vec({1}), spec)[0] == doctest::Approx((J(1 + h) - J(1 - h)) / (2 * h)).epsilon(1e-8));
}

TEST_CASE("pseudo_gradient at the oracle equilibrium is a variational inequality solution") {
  const auto spec = fixtures::random_spec(11, 3, 2, 0);
  const auto star = oracle_vgne(spec);
  const Vectord g = pseudo_gradient(star.x, spec);
  Rng rng(5);
  const auto box = spec.collective_box();
  for (int t = 0; t < 200; ++t) {
    const Vectord y = rng.in_box(box);
    CHECK((y - star.x).dot(g) >= -1e-9);
  }
}

TEST_CASE("oracle cost pseudo_gradient matches finite differences of the supplied cost") {
  // f_i(x_i, s) = 1/4 |x_i|^4 + sin(s)^T x_i, N = 3, n = 2; J_i depends on x_i also through s.
  const Index N = 3, n = 2;
  OracleCostd oracle;
  oracle.label = "quartic";
  oracle.cost = [](Index, const Vectord& xi, const Vectord& s) {
    return 0.25 * xi.squaredNorm() * xi.squaredNorm() + s.array().sin().matrix().dot(xi);
  };
  oracle.partial_gradient = [](Index, const Vectord& xi, const Vectord& s) {
    return Vectord(xi.squaredNorm() * xi + s.array().sin().matrix());
  };
  oracle.total_gradient = [N](Index, const Vectord& xi, const Vectord& s) {
    return Vectord(xi.squaredNorm() * xi + s.array().sin().matrix() +
                   (s.array().cos() * xi.array()).matrix() / static_cast<double>(N));
  };
  std::vector<BoxSetd> boxes(N, BoxSetd::uniform(n, -2, 2));
  const GameSpecd spec(N, n, boxes, oracle, CouplingConstraintd::none(N, n));

  Rng rng(17);
  int worst_ok = 0;
  for (int t = 0; t < 100; ++t) {
    const Vectord x = rng.uniform_vector(N * n, -2, 2);
    const Vectord g = pseudo_gradient(x, spec);
    Vectord fd(N * n);
    const double h = 1e-6;
    for (Index i = 0; i < N; ++i) {
      for (Index j = 0; j < n; ++j) {
        Vectord xp = x, xm = x;
        xp[i * n + j] += h;
        xm[i * n + j] -= h;
        auto J = [&](const Vectord& z) { return oracle.cost(i, z.segment(i * n, n), aggregate(z, spec)); };
        fd[i * n + j] = (J(xp) - J(xm)) / (2 * h);
      }
    }
    const double rel = (g - fd).norm() / std::max(1.0, g.norm());
    if (rel <= 1e-5) ++worst_ok;
  }
  CHECK(worst_ok == 100);
}

TEST_CASE("oracle cost returning the wrong dimension or NaN is rejected") {
  OracleCostd bad;
  bad.label = "bad";
  bad.total_gradient = [](Index, const Vectord&, const Vectord&) { return Vectord(Vectord::Zero(3)); };
  const GameSpecd spec(1, 2, {BoxSetd::uniform(2, 0, 1)}, bad, CouplingConstraintd::none(1, 2));
  CHECK_THROWS_AS(pseudo_gradient(vec({0.5, 0.5}), spec), DimensionError);

  OracleCostd nan;
  nan.label = "nan";
  nan.total_gradient = [](Index, const Vectord&, const Vectord&) { return vec({NAN, 0}); };
  const GameSpecd spec2(1, 2, {BoxSetd::uniform(2, 0, 1)}, nan, CouplingConstraintd::none(1, 2));
  CHECK_THROWS_AS(pseudo_gradient(vec({0.5, 0.5}), spec2), NonFiniteError);
}

TEST_CASE("extended_pseudo_gradient worked examples") {
  const auto spec = fixtures::scalar_game({1, 1}, 1, {0, 0}, -10, 10);
  CHECK(extended_pseudo_gradient(vec({1, 1}), vec({2, 4}), spec) == vec({3, 5}));

  // With z_i = sigma(x) the partial convention drops exactly the (1/N) c^T x_i blocks.
  const auto g = fixtures::random_spec(4, 3, 2, 0);
  const auto& quad = g.quadratic();
  Rng rng(9);
  const Vectord x = rng.uniform_vector(6, -1, 1);
  const Vectord s = aggregate(x, g);
  const Vectord z = s.replicate(3, 1);
  const Vectord diff = pseudo_gradient(x, g) - extended_pseudo_gradient(x, z, g, EstimateConvention::partial);
  for (Index i = 0; i < 3; ++i) {
    const Vectord expected = quad.c.transpose() * x.segment(i * 2, 2) / 3.0;
    CHECK((diff.segment(i * 2, 2) - expected).lpNorm<Eigen::Infinity>() <= 1e-14);
  }
  const Vectord total = extended_pseudo_gradient(x, z, g, EstimateConvention::total_at_estimate);
  CHECK((total - pseudo_gradient(x, g)).lpNorm<Eigen::Infinity>() <= 1e-14);
}

TEST_CASE("extended_pseudo_gradient ignores estimates when c = 0") {
  const auto spec = fixtures::scalar_game({1, 2, 3}, 0, {1, -1, 0.5}, -10, 10);
  Rng rng(2);
  const Vectord x = rng.uniform_vector(3, -5, 5);
  for (int t = 0; t < 20; ++t) {
    const Vectord z = rng.uniform_vector(3, -100, 100);
    CHECK(extended_pseudo_gradient(x, z, spec) == pseudo_gradient(x, spec));
    CHECK(extended_pseudo_gradient(x, z, spec, EstimateConvention::total_at_estimate) == pseudo_gradient(x, spec));
  }
}

TEST_CASE("strong monotonicity of random quadratic games exceeds min q") {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const Index N = 2 + static_cast<Index>(seed % 9);
    const Index n = 1 + static_cast<Index>(seed % 4);
    const auto spec = fixtures::random_spec(seed, N, n, 0);
    const auto [H, h] = affine_form(spec);
    Eigen::SelfAdjointEigenSolver<Matrixd> eig(0.5 * (H + H.transpose()));
    CHECK(eig.eigenvalues().minCoeff() >= spec.quadratic().q.minCoeff() - 1e-12);
    // F(x) = H x + h on a random point.
    Rng rng(seed);
    const Vectord x = rng.uniform_vector(N * n, -2, 2);
    CHECK((H * x + h - pseudo_gradient(x, spec)).lpNorm<Eigen::Infinity>() <= 1e-12);
  }
}

TEST_CASE("feasibility_check") {
  const Matrixd A = mat(1, 2, {1, 1});
  const auto spec = fixtures::scalar_game({1, 1}, 0, {0, 0}, -1, 1, A, vec({1}));
  auto inner = feasibility_check(PrimalDualPointd{vec({0, 0}), vec({0})}, spec, 1e-9);
  CHECK(inner.feasible());
  CHECK(inner.margin() == doctest::Approx(1));

  auto out = feasibility_check(PrimalDualPointd{vec({1.5, 0}), vec({0})}, spec, 1e-9);
  CHECK_FALSE(out.feasible());
  REQUIRE(out.box_violations.size() == 1);
  CHECK(out.box_violations[0].index == 0);
  CHECK(out.box_violations[0].amount == doctest::Approx(0.5));

  auto neg = feasibility_check(PrimalDualPointd{vec({0, 0}), vec({-1})}, spec, 1e-9);
  CHECK(neg.dual_violations.size() == 1);

  const auto game = fixtures::random_spec(21, 4, 2, 3);
  CHECK(feasibility_check(oracle_vgne(game), game, 1e-6).feasible());
}

TEST_CASE("GameSpec invariants") {
  QuadraticCostd cost{vec({1}), Matrixd::Zero(1, 1), {vec({0})}};
  CHECK_THROWS_AS(BoxSetd(vec({1}), vec({0})), InvalidArgument);
  CHECK_THROWS_AS(GameSpecd(1, 1, {}, cost, CouplingConstraintd::none(1, 1)), DimensionError);
  QuadraticCostd bad_q{vec({0}), Matrixd::Zero(1, 1), {vec({0})}};
  CHECK_THROWS_AS(GameSpecd(1, 1, {BoxSetd::uniform(1, 0, 1)}, bad_q, CouplingConstraintd::none(1, 1)),
                  InvalidArgument);
  CHECK_THROWS_AS(GameSpecd(1, 1, {BoxSetd::uniform(1, 0, 1)}, cost, CouplingConstraintd::none(1, 1),
                            Monotonicity<double>{2.0, 1.0}),
                  InvalidArgument);
  CHECK_THROWS_AS(CouplingConstraintd({Matrixd(1, 1), Matrixd(2, 1)}, vec({0})), DimensionError);
  // Unbounded boxes are allowed for modelling.
  GameSpecd open(1, 1, {BoxSetd::whole_space(1)}, cost, CouplingConstraintd::none(1, 1));
  CHECK_FALSE(open.bounded());
}
