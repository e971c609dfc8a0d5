#pragma once

#include <Eigen/Dense>

#include <vector>

namespace scpi {

/// Minimum-norm least-squares coefficients; `rank_deficient` is set when X lacks full column rank.
Eigen::VectorXd least_squares(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, bool* rank_deficient = nullptr);

/// Weighted least squares with nonnegative weights v.
Eigen::VectorXd weighted_least_squares(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, const Eigen::VectorXd& v,
                                       bool* rank_deficient = nullptr);

/// Type-7 (linear interpolation) sample quantile. Infinite entries are allowed.
double quantile(std::vector<double> values, double p);

/// Sample variance with denominator n - 1.
double sample_variance(const Eigen::VectorXd& x);

/// All distinct monomials of degree 1..order in the columns of X (degree-1 terms first).
Eigen::MatrixXd polynomial_terms(const Eigen::MatrixXd& X, int order);

/// X shifted down by k rows; the first k rows repeat the first observation.
Eigen::MatrixXd lag_rows(const Eigen::MatrixXd& X, int k);

/// Row-wise first differences; the first row repeats the first available difference.
Eigen::MatrixXd first_difference(const Eigen::MatrixXd& X);

/// Symmetric square root via eigendecomposition with negative eigenvalues set to zero.
/// `min_eig_ratio` receives the smallest eigenvalue divided by the largest before flooring.
Eigen::MatrixXd psd_sqrt(const Eigen::MatrixXd& S, double* min_eig_ratio = nullptr);

}  // namespace scpi
