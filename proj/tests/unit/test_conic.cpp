#include "scpi/conic.hpp"
#include "scpi/errors.hpp"

#include <doctest.h>

#include <cmath>

using namespace scpi;
using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

ConicProblem empty_problem(Eigen::Index n) {
  ConicProblem p;
  p.q = VectorXd::Zero(n);
  p.A = MatrixXd::Zero(0, n);
  p.b = VectorXd::Zero(0);
  return p;
}

void check_certificate(const ConicProblem& p, const ConicSolution& s) {
  const KktResiduals r = kkt_residuals(p, s.x, s.y, s.z, s.s);
  CHECK(r.primal < 1e-6);
  CHECK(r.dual < 1e-6);
  CHECK(std::abs(r.gap) < 1e-6);
}

}  // namespace

TEST_SUITE("conic") {
  TEST_CASE("linear program on the nonnegative orthant") {
    // min x1 + 2 x2  s.t.  x >= 0, x1 + x2 >= 1
    ConicProblem p = empty_problem(2);
    p.q << 1.0, 2.0;
    p.G.resize(3, 2);
    p.G << -1, 0, 0, -1, -1, -1;
    p.h = VectorXd::Zero(3);
    p.h(2) = -1.0;
    p.dims.nonneg = 3;
    const ConicSolution s = solve_conic(p);
    REQUIRE(s.status == SolveStatus::Optimal);
    CHECK(s.objective == doctest::Approx(1.0).epsilon(1e-7));
    CHECK(s.x(0) == doctest::Approx(1.0).epsilon(1e-6));
    check_certificate(p, s);
  }

  TEST_CASE("second-order cone with fixed tail") {
    // min t  s.t.  ||(x1, x2)|| <= t, x1 = 3, x2 = 4
    ConicProblem p = empty_problem(3);
    p.q << 1.0, 0.0, 0.0;
    p.A.resize(2, 3);
    p.A << 0, 1, 0, 0, 0, 1;
    p.b = Eigen::Vector2d(3.0, 4.0);
    p.G = -MatrixXd::Identity(3, 3);
    p.h = VectorXd::Zero(3);
    p.dims.soc = {3};
    const ConicSolution s = solve_conic(p);
    REQUIRE(s.status == SolveStatus::Optimal);
    CHECK(s.x(0) == doctest::Approx(5.0).epsilon(1e-7));
    check_certificate(p, s);
  }

  TEST_CASE("quadratic objective projected onto a ball") {
    // min 1/2 ||x - c||^2  s.t.  ||x|| <= 1, c = (3, 4): solution c / 5
    ConicProblem p = empty_problem(2);
    p.P = MatrixXd::Identity(2, 2);
    p.q << -3.0, -4.0;
    p.G = MatrixXd::Zero(3, 2);
    p.G.bottomRows(2) = -MatrixXd::Identity(2, 2);
    p.h = VectorXd::Zero(3);
    p.h(0) = 1.0;
    p.dims.soc = {3};
    const ConicSolution s = solve_conic(p);
    REQUIRE(s.status == SolveStatus::Optimal);
    CHECK(s.x(0) == doctest::Approx(0.6).epsilon(1e-6));
    CHECK(s.x(1) == doctest::Approx(0.8).epsilon(1e-6));
    check_certificate(p, s);
  }

  TEST_CASE("mixed cones with an equality") {
    // min 1/2 ||x||^2 - x3  s.t.  x1 + x2 = 1, x >= 0, ||(x1, x2, x3)|| <= 1
    ConicProblem p = empty_problem(3);
    p.P = MatrixXd::Identity(3, 3);
    p.q << 0.0, 0.0, -1.0;
    p.A = MatrixXd(1, 3);
    p.A << 1, 1, 0;
    p.b = VectorXd::Ones(1);
    p.G = MatrixXd::Zero(7, 3);
    p.G.topRows(3) = -MatrixXd::Identity(3, 3);
    p.G.bottomRows(3) = -MatrixXd::Identity(3, 3);
    p.h = VectorXd::Zero(7);
    p.h(3) = 1.0;
    p.dims.nonneg = 3;
    p.dims.soc = {4};
    const ConicSolution s = solve_conic(p);
    REQUIRE(s.status == SolveStatus::Optimal);
    // x1 = x2 = 1/2 by symmetry and x3 = min(1, sqrt(1/2)).
    CHECK(s.x(0) == doctest::Approx(0.5).epsilon(1e-6));
    CHECK(s.x(2) == doctest::Approx(std::sqrt(0.5)).epsilon(1e-6));
    check_certificate(p, s);
  }

  TEST_CASE("primal infeasible") {
    // x >= 1 and x <= 0
    ConicProblem p = empty_problem(1);
    p.q << 1.0;
    p.G.resize(2, 1);
    p.G << -1, 1;
    p.h = Eigen::Vector2d(-1.0, 0.0);
    p.dims.nonneg = 2;
    CHECK(solve_conic(p).status == SolveStatus::Infeasible);
  }

  TEST_CASE("unbounded below") {
    // min -x  s.t.  x >= 0
    ConicProblem p = empty_problem(1);
    p.q << -1.0;
    p.G = -MatrixXd::Identity(1, 1);
    p.h = VectorXd::Zero(1);
    p.dims.nonneg = 1;
    CHECK(solve_conic(p).status == SolveStatus::Unbounded);
  }

  TEST_CASE("shape validation") {
    ConicProblem p = empty_problem(2);
    p.G = MatrixXd::Identity(3, 2);
    p.h = VectorXd::Zero(2);
    p.dims.nonneg = 3;
    CHECK_THROWS_AS(p.validate(), Error);
  }
}
