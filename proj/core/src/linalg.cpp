#include "scpi/linalg.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/QR>

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>

namespace scpi {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

VectorXd least_squares(const MatrixXd& X, const VectorXd& y, bool* rank_deficient) {
  if (X.cols() == 0) {
    if (rank_deficient) *rank_deficient = false;
    return VectorXd::Zero(0);
  }
  Eigen::CompleteOrthogonalDecomposition<MatrixXd> cod(X);
  if (rank_deficient) *rank_deficient = cod.rank() < X.cols();
  return cod.solve(y);
}

VectorXd weighted_least_squares(const MatrixXd& X, const VectorXd& y, const VectorXd& v, bool* rank_deficient) {
  const VectorXd sv = v.cwiseSqrt();
  return least_squares(sv.asDiagonal() * X, sv.cwiseProduct(y), rank_deficient);
}

double quantile(std::vector<double> values, double p) {
  if (values.empty()) return std::numeric_limits<double>::quiet_NaN();
  std::sort(values.begin(), values.end());
  const double h = (static_cast<double>(values.size()) - 1.0) * p;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const auto hi = std::min(lo + 1, values.size() - 1);
  const double a = values[lo];
  const double b = values[hi];
  const double frac = h - static_cast<double>(lo);
  if (frac == 0.0 || a == b) return a;
  if (std::isinf(a)) return a;
  if (std::isinf(b)) return b;
  return a + frac * (b - a);
}

double sample_variance(const VectorXd& x) {
  const Index n = x.size();
  if (n < 2) return 0.0;
  const double mean = x.mean();
  return (x.array() - mean).square().sum() / static_cast<double>(n - 1);
}

MatrixXd polynomial_terms(const MatrixXd& X, int order) {
  std::vector<VectorXd> cols;
  const Index k = X.cols();
  // Monomials as nondecreasing index tuples, generated degree by degree.
  std::function<void(int, Index, VectorXd)> rec = [&](int remaining, Index start, VectorXd acc) {
    if (remaining == 0) {
      cols.push_back(std::move(acc));
      return;
    }
    for (Index j = start; j < k; ++j) rec(remaining - 1, j, acc.cwiseProduct(X.col(j)));
  };
  for (int deg = 1; deg <= order; ++deg) rec(deg, 0, VectorXd::Ones(X.rows()));
  MatrixXd out(X.rows(), static_cast<Index>(cols.size()));
  for (std::size_t i = 0; i < cols.size(); ++i) out.col(static_cast<Index>(i)) = cols[i];
  return out;
}

MatrixXd lag_rows(const MatrixXd& X, int k) {
  const Index n = X.rows();
  MatrixXd out(n, X.cols());
  for (Index t = 0; t < n; ++t) out.row(t) = X.row(std::max<Index>(t - k, 0));
  return out;
}

MatrixXd first_difference(const MatrixXd& X) {
  const Index n = X.rows();
  MatrixXd out = MatrixXd::Zero(n, X.cols());
  if (n < 2) return out;
  for (Index t = 1; t < n; ++t) out.row(t) = X.row(t) - X.row(t - 1);
  out.row(0) = out.row(1);
  return out;
}

MatrixXd psd_sqrt(const MatrixXd& S, double* min_eig_ratio) {
  Eigen::SelfAdjointEigenSolver<MatrixXd> es(0.5 * (S + S.transpose()));
  const VectorXd lam = es.eigenvalues();
  if (min_eig_ratio) {
    const double lmax = lam.maxCoeff();
    *min_eig_ratio = lmax > 0.0 ? lam.minCoeff() / lmax : 0.0;
  }
  const VectorXd root = lam.cwiseMax(0.0).cwiseSqrt();
  return es.eigenvectors() * root.asDiagonal() * es.eigenvectors().transpose();
}

}  // namespace scpi
