#include "oracles.hpp"
#include "scpi/errors.hpp"
#include "scpi/qp.hpp"

#include <doctest.h>

#include <cmath>
#include <random>

using namespace scpi;
using scpi::testing::Profiled;
using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

struct Case {
  ConstraintSpec spec;
  const char* name;
};

double oracle_objective(const Profiled& p, const ConstraintSpec& spec) {
  switch (spec.p) {
    case Norm::None: return testing::ols_oracle(p).objective;
    case Norm::L1:
      return spec.nonnegative() ? testing::simplex_oracle(p, *spec.Q).objective
                                : testing::lasso_oracle(p, *spec.Q).objective;
    case Norm::L2: return testing::ridge_oracle(p, *spec.Q).objective;
    case Norm::L1L2: return testing::l1l2_oracle(p, *spec.Q, *spec.Q2).objective;
  }
  return NAN;
}

}  // namespace

TEST_SUITE("qp") {
  TEST_CASE("singleton simplex gives weight one regardless of data") {
    const auto in = testing::random_instance(6, 1, 0, 3);
    const QpSolution s = solve_wls(in.A, in.B, in.C, in.V, materialize(preset(Preset::Simplex), 1, 0));
    REQUIRE(s.status == SolveStatus::Optimal);
    CHECK(s.x(0) == doctest::Approx(1.0).epsilon(1e-9));
  }

  TEST_CASE("ols with square nonsingular B interpolates") {
    MatrixXd B(3, 3);
    B << 2, 1, 0, 1, 3, 1, 0, 1, 4;
    const VectorXd A = Eigen::Vector3d(1.0, -2.0, 0.5);
    const QpSolution s =
        solve_wls(A, B, MatrixXd(3, 0), VectorXd::Ones(3), materialize(preset(Preset::Ols), 3, 0));
    CHECK(s.x.isApprox(B.lu().solve(A), 1e-12));
    CHECK(s.objective == doctest::Approx(0.0).epsilon(1e-20));
  }

  TEST_CASE("three-donor simplex fixture matches the grid oracle") {
    // Exhaustive grid over the simplex at step 1e-3, refined around the best node.
    const auto in = testing::random_instance(8, 3, 0, 11);
    const Profiled p = testing::profile(in.A, in.B, in.C, in.V);
    const QpSolution s = solve_wls(in.A, in.B, in.C, in.V, materialize(preset(Preset::Simplex), 3, 0));
    REQUIRE(s.status == SolveStatus::Optimal);
    double best = INFINITY;
    Eigen::Vector3d best_w;
    const int n = 1000;
    for (int i = 0; i <= n; ++i)
      for (int j = 0; i + j <= n; ++j) {
        const Eigen::Vector3d w(i / double(n), j / double(n), (n - i - j) / double(n));
        const double f = testing::objective(p, w);
        if (f < best) {
          best = f;
          best_w = w;
        }
      }
    // The grid optimum is within a 1e-3 cell of the true optimum; its gap bounds the solver's error.
    CHECK(s.objective <= best + 1e-12);
    CHECK(best - s.objective <= 1e-4);
    const double exact = testing::simplex_oracle(p, 1.0).objective;
    CHECK(std::abs(s.objective - exact) <= 1e-6);
    CHECK((s.x.head(3) - best_w).lpNorm<Eigen::Infinity>() <= 2e-2);
  }

  TEST_CASE("three-donor lasso fixture matches the grid oracle") {
    const auto in = testing::random_instance(8, 3, 0, 29);
    const Profiled p = testing::profile(in.A, in.B, in.C, in.V);
    const QpSolution s = solve_wls(in.A, in.B, in.C, in.V, materialize(preset(Preset::Lasso, 1.0), 3, 0));
    REQUIRE(s.status == SolveStatus::Optimal);
    const auto grid = testing::lasso_grid_oracle3(p, 1.0, 2e-5);
    CHECK(s.objective <= grid.objective + 1e-9);
    CHECK(std::abs(s.objective - grid.objective) <= 1e-4);
    CHECK(std::abs(s.objective - testing::lasso_oracle(p, 1.0).objective) <= 1e-6);
  }

  TEST_CASE("random instances agree with enumeration oracles") {
    const Case cases[] = {
        {preset(Preset::Ols), "ols"},
        {preset(Preset::Simplex), "simplex"},
        {preset(Preset::Lasso, 0.7), "lasso"},
        {preset(Preset::Ridge, 0.6), "ridge"},
        {preset(Preset::L1L2, 1.0, 0.8), "L1-L2"},
        {preset(Preset::Simplex, 2.0), "simplex Q=2"},
    };
    for (const auto& c : cases) {
      for (std::uint64_t seed = 0; seed < 20; ++seed) {
        CAPTURE(c.name);
        CAPTURE(seed);
        const std::size_t J = 2 + seed % 3;
        const std::size_t K = seed % 2;
        const auto in = testing::random_instance(6 + seed % 5, J, K, 1000 + seed);
        const ConstraintSystem cs = materialize(c.spec, J, K);
        const QpSolution s = solve_wls(in.A, in.B, in.C, in.V, cs);
        REQUIRE(s.status == SolveStatus::Optimal);
        CHECK(cs.contains(s.x, 1e-7));
        const double oracle = oracle_objective(testing::profile(in.A, in.B, in.C, in.V), c.spec);
        CHECK(std::abs(s.objective - oracle) <= 1e-6);
      }
    }
  }

  TEST_CASE("empty L1-L2 set is reported infeasible") {
    const auto in = testing::random_instance(8, 4, 0, 5);
    // ||w||_2 >= 1/sqrt(4) = 0.5 on the simplex.
    CHECK_THROWS_AS(solve_wls(in.A, in.B, in.C, in.V, materialize(preset(Preset::L1L2, 1.0, 0.4), 4, 0)), Error);
  }

  TEST_CASE("level set degenerates to the origin when G = 0") {
    const MatrixXd Q = (MatrixXd(2, 2) << 2, 0.5, 0.5, 1).finished();
    const ConstraintSystem cs = materialize(preset(Preset::Simplex), 2, 0);
    const LevelSetProblem lsp(Q, cs, Eigen::Vector2d(0.5, 0.5));
    for (Sense sense : {Sense::Min, Sense::Max}) {
      const QpSolution s = lsp.solve(Eigen::Vector2d(1.0, -0.3), VectorXd::Zero(2), sense);
      REQUIRE(s.status == SolveStatus::Optimal);
      CHECK(std::abs(s.objective) <= 1e-6);
    }
  }

  TEST_CASE("disk geometry: max 2 and min 0 for G = c = e1") {
    const ConstraintSystem cs = materialize(preset(Preset::Ols), 2, 0);
    const LevelSetProblem lsp(MatrixXd::Identity(2, 2), cs, VectorXd::Zero(2));
    const Eigen::Vector2d e1(1.0, 0.0);
    CHECK(lsp.solve(e1, e1, Sense::Max).objective == doctest::Approx(2.0).epsilon(1e-8));
    CHECK(std::abs(lsp.solve(e1, e1, Sense::Min).objective) <= 1e-8);
  }

  TEST_CASE("disk geometry over random G") {
    const ConstraintSystem cs = materialize(preset(Preset::Ols), 2, 0);
    const LevelSetProblem lsp(MatrixXd::Identity(2, 2), cs, VectorXd::Zero(2));
    std::mt19937_64 rng(7);
    std::normal_distribution<double> z;
    for (int i = 0; i < 100; ++i) {
      const Eigen::Vector2d G(z(rng), z(rng));
      const Eigen::Vector2d c(z(rng), z(rng));
      // Disk centred at G with radius ||G||.
      const double hi = c.dot(G) + c.norm() * G.norm();
      const double lo = c.dot(G) - c.norm() * G.norm();
      CHECK(lsp.solve(c, G, Sense::Max).objective == doctest::Approx(hi).epsilon(1e-6));
      CHECK(lsp.solve(c, G, Sense::Min).objective == doctest::Approx(lo).epsilon(1e-6));
    }
  }

  TEST_CASE("level set with simplex constraints stays in the tangent cone") {
    // Centre on a vertex: delta must keep w = e1 + delta on the simplex.
    const ConstraintSystem cs = materialize(preset(Preset::Simplex), 2, 0);
    const LevelSetProblem lsp(MatrixXd::Identity(2, 2), cs, Eigen::Vector2d(1.0, 0.0));
    const Eigen::Vector2d G(1.0, 1.0);
    // Feasible directions are t(-1, 1), t in [0, 1]; on the disk, t(-1,1) needs 2t^2 <= 0 -> only t = 0.
    const QpSolution s = lsp.solve(Eigen::Vector2d(0.0, 1.0), G, Sense::Max);
    REQUIRE(s.status == SolveStatus::Optimal);
    // No interior point exists, so the residual tolerance 1e-8 only pins the value to about its square root.
    CHECK(std::abs(s.objective) <= 1e-3);
    // With G = (-1, 1) the level set reaches t = 1.
    const QpSolution t = lsp.solve(Eigen::Vector2d(0.0, 1.0), Eigen::Vector2d(-1.0, 1.0), Sense::Max);
    REQUIRE(t.status == SolveStatus::Optimal);
    CHECK(t.objective == doctest::Approx(1.0).epsilon(1e-6));
  }

  TEST_CASE("singular Qhat without constraints is unbounded along its kernel") {
    MatrixXd Q = MatrixXd::Zero(2, 2);
    Q(0, 0) = 1.0;
    const ConstraintSystem cs = materialize(preset(Preset::Ols), 2, 0);
    const QpSolution s =
        solve_linear_over_level_set(Eigen::Vector2d(0.0, 1.0), Q, Eigen::Vector2d(1.0, 0.0), cs, VectorXd::Zero(2),
                                    Sense::Max);
    CHECK(s.status == SolveStatus::Unbounded);
  }
}
