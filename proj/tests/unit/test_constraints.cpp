#include "scpi/constraints.hpp"
#include "scpi/errors.hpp"

#include <doctest.h>

#include <cmath>
#include <limits>

using namespace scpi;

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

template <class F>
ErrorCode code_of(F&& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected an scpi::Error");
  return ErrorCode::ConfigError;
}

}  // namespace

TEST_SUITE("constraints") {
  TEST_CASE("simplex preset is the default set") {
    RawConstraintOptions raw;
    raw.name = "simplex";
    raw.Q = 1.0;
    const ConstraintSpec s = from_options(raw);
    CHECK(s.p == Norm::L1);
    CHECK(s.dir == Direction::Equal);
    CHECK(s.nonnegative());
    CHECK(*s.Q == 1.0);
    CHECK(s.describe() == "{w >= 0 : ||w||_1 == 1}");
    const ConstraintSpec d;
    CHECK(d.p == s.p);
    CHECK(d.dir == s.dir);
    CHECK(*d.Q == *s.Q);
  }

  TEST_CASE("manual l2 ball with free sign") {
    RawConstraintOptions raw;
    raw.p = "L2";
    raw.dir = "<=";
    raw.Q = 1.0;
    raw.lb = -kInf;
    const ConstraintSpec s = from_options(raw);
    CHECK(s.p == Norm::L2);
    CHECK(s.dir == Direction::LessEqual);
    CHECK_FALSE(s.nonnegative());
    const ConstraintSystem cs = materialize(s, 3, 0);
    CHECK(cs.d_eq() == 0);
    REQUIRE(cs.d_in() == 1);
    CHECK(cs.in[0].f == TermFunction::L2);
  }

  TEST_CASE("ols has no constraints") {
    RawConstraintOptions raw;
    raw.name = "ols";
    const ConstraintSystem cs = materialize(from_options(raw), 4, 2);
    CHECK(cs.empty());
    CHECK(cs.d == 6);
  }

  TEST_CASE("simplex encoding with J = 3") {
    const ConstraintSystem cs = materialize(preset(Preset::Simplex), 3, 1);
    Eigen::VectorXd beta(4);
    beta << 0.2, 0.3, 0.4, 7.0;
    const Eigen::VectorXd eq = cs.m_eq(beta);
    REQUIRE(eq.size() == 1);
    CHECK(eq(0) == doctest::Approx(0.2 + 0.3 + 0.4 - 1.0));
    const Eigen::VectorXd in = cs.m_in(beta);
    REQUIRE(in.size() == 3);
    CHECK(in(0) == -0.2);
    CHECK(in(1) == -0.3);
    CHECK(in(2) == -0.4);
    CHECK(cs.all_linear());
    CHECK(cs.grad_in(1, beta) == Eigen::Vector4d(0, -1, 0, 0));
  }

  TEST_CASE("ridge encoding with J = 2") {
    const ConstraintSystem cs = materialize(preset(Preset::Ridge, 1.0), 2, 0);
    REQUIRE(cs.d_in() == 1);
    const Eigen::Vector2d beta(3.0, 4.0);
    CHECK(cs.m_in(beta)(0) == doctest::Approx(4.0));
    CHECK(cs.grad_in(0, beta).isApprox(Eigen::Vector2d(0.6, 0.8)));
    CHECK_FALSE(cs.in[0].linear());
    CHECK(cs.has_nonlinear_inequality());
  }

  TEST_CASE("lasso and L1-L2 presets") {
    const ConstraintSystem lasso = materialize(preset(Preset::Lasso, 1.0), 3, 0);
    REQUIRE(lasso.d_in() == 1);
    CHECK(lasso.in[0].f == TermFunction::L1);
    CHECK(lasso.contains(Eigen::Vector3d(0.5, -0.5, 0.0)));
    CHECK_FALSE(lasso.contains(Eigen::Vector3d(0.5, -0.6, 0.0)));

    const ConstraintSystem l1l2 = materialize(preset(Preset::L1L2, 1.0, 0.8), 3, 0);
    CHECK(l1l2.d_eq() == 1);
    CHECK(l1l2.d_in() == 4);
    CHECK(l1l2.contains(Eigen::Vector3d(0.5, 0.5, 0.0)));
    CHECK_FALSE(l1l2.contains(Eigen::Vector3d(0.9, 0.1, 0.0)));
  }

  TEST_CASE("covariate coefficients are never constrained") {
    const ConstraintSystem cs = materialize(preset(Preset::Simplex), 2, 2);
    Eigen::Vector4d beta(0.5, 0.5, -100.0, 1e6);
    CHECK(cs.contains(beta));
  }

  TEST_CASE("inconsistent constraint options") {
    RawConstraintOptions raw;
    raw.name = "simplex";
    raw.p = "L2";
    CHECK(code_of([&] { from_options(raw); }) == ErrorCode::InconsistentSpec);

    raw = {};
    raw.name = "ols";
    raw.Q = 1.0;
    CHECK(code_of([&] { from_options(raw); }) == ErrorCode::InconsistentSpec);

    raw = {};
    raw.p = "L1";
    raw.dir = "==";
    raw.Q = 1.0;
    raw.lb = -kInf;
    CHECK(code_of([&] { from_options(raw); }) == ErrorCode::InconsistentSpec);

    raw = {};
    raw.p = "L1";
    raw.lb = 0.5;
    raw.Q = 1.0;
    CHECK(code_of([&] { from_options(raw); }) == ErrorCode::InconsistentSpec);

    raw = {};
    raw.p = "L2";
    CHECK(code_of([&] { from_options(raw); }) == ErrorCode::MissingQ);

    raw = {};
    raw.name = "nonsense";
    CHECK(code_of([&] { from_options(raw); }) == ErrorCode::InconsistentSpec);
  }

  TEST_CASE("unresolved tuning cannot be materialized") {
    CHECK(code_of([] { materialize(preset(Preset::Ridge), 3, 0); }) == ErrorCode::MissingQ);
  }

  TEST_CASE("l1 subgradient is zero at zero coordinates") {
    const ConstraintTerm t{TermFunction::L1, 0, 1.0, false};
    const Eigen::Vector3d beta(0.5, 0.0, -2.0);
    CHECK(t.gradient(beta, 3) == Eigen::Vector3d(1, 0, -1));
    CHECK(t.eval(beta, 3) == doctest::Approx(1.5));
  }
}
