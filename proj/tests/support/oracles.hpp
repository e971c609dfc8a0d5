#pragma once

#include <Eigen/Dense>

#include <cstdint>

namespace scpi::testing {

/// Weighted LS data with the covariate block already profiled out:
/// objective(w) = ||a - Bt w||^2 with a, Bt residualized on sqrt(V) C.
struct Profiled {
  Eigen::VectorXd a;
  Eigen::MatrixXd Bt;
  double offset = 0.0;
};

Profiled profile(const Eigen::VectorXd& A, const Eigen::MatrixXd& B, const Eigen::MatrixXd& C,
                 const Eigen::VectorXd& V);

double objective(const Profiled& p, const Eigen::VectorXd& w);

struct Oracle {
  Eigen::VectorXd w;
  double objective = 0.0;
};

/// Normal equations solved by an LDLT factorization.
Oracle ols_oracle(const Profiled& p);
/// Enumerates supports; exact for full-rank designs.
Oracle simplex_oracle(const Profiled& p, double Q);
/// Enumerates sign patterns with the l1 constraint active or not.
Oracle lasso_oracle(const Profiled& p, double Q);
/// Bisection on the multiplier of the l2 ball.
Oracle ridge_oracle(const Profiled& p, double Q);
/// Supports of the simplex combined with an active or inactive l2 ball.
Oracle l1l2_oracle(const Profiled& p, double Q, double Q2);
/// Dense grid over the l1 ball in R^3 followed by a finer local grid.
Oracle lasso_grid_oracle3(const Profiled& p, double Q, double step);

/// Random instance with entries in [-1, 1].
struct Instance {
  Eigen::VectorXd A;
  Eigen::MatrixXd B;
  Eigen::MatrixXd C;
  Eigen::VectorXd V;
};

Instance random_instance(std::size_t T0, std::size_t J, std::size_t K, std::uint64_t seed);

}  // namespace scpi::testing
