#include "oracles.hpp"

#include <cmath>
#include <limits>
#include <random>

namespace scpi::testing {

using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kFeasTol = 1e-10;

// Minimizes ||a - Bs w||^2 subject to 1'w = Q via the bordered KKT system.
VectorXd equality_ls(const MatrixXd& Bs, const VectorXd& a, double Q, double ridge = 0.0) {
  const Eigen::Index n = Bs.cols();
  MatrixXd K = MatrixXd::Zero(n + 1, n + 1);
  K.topLeftCorner(n, n) = 2.0 * (Bs.transpose() * Bs + ridge * MatrixXd::Identity(n, n));
  K.block(0, n, n, 1).setOnes();
  K.block(n, 0, 1, n).setOnes();
  VectorXd rhs(n + 1);
  rhs.head(n) = 2.0 * Bs.transpose() * a;
  rhs(n) = Q;
  return K.fullPivLu().solve(rhs).head(n);
}

VectorXd scatter(const VectorXd& ws, const std::vector<Eigen::Index>& idx, Eigen::Index J) {
  VectorXd w = VectorXd::Zero(J);
  for (std::size_t i = 0; i < idx.size(); ++i) w(idx[i]) = ws(static_cast<Eigen::Index>(i));
  return w;
}

MatrixXd columns(const MatrixXd& B, const std::vector<Eigen::Index>& idx) {
  MatrixXd out(B.rows(), static_cast<Eigen::Index>(idx.size()));
  for (std::size_t i = 0; i < idx.size(); ++i) out.col(static_cast<Eigen::Index>(i)) = B.col(idx[i]);
  return out;
}

void keep_best(const Profiled& p, const VectorXd& w, Oracle& best) {
  const double f = objective(p, w);
  if (f < best.objective) {
    best.objective = f;
    best.w = w;
  }
}

}  // namespace

Profiled profile(const VectorXd& A, const MatrixXd& B, const MatrixXd& C, const VectorXd& V) {
  const VectorXd s = V.cwiseSqrt();
  VectorXd a = s.asDiagonal() * A;
  MatrixXd Bt = s.asDiagonal() * B;
  if (C.cols() > 0) {
    const MatrixXd Ct = s.asDiagonal() * C;
    const Eigen::HouseholderQR<MatrixXd> qr(Ct);
    const MatrixXd Qm = qr.householderQ() * MatrixXd::Identity(Ct.rows(), Ct.cols());
    a -= Qm * (Qm.transpose() * a);
    Bt -= Qm * (Qm.transpose() * Bt);
  }
  return {a, Bt, 0.0};
}

double objective(const Profiled& p, const VectorXd& w) { return (p.a - p.Bt * w).squaredNorm() + p.offset; }

Oracle ols_oracle(const Profiled& p) {
  const VectorXd w = (p.Bt.transpose() * p.Bt).ldlt().solve(p.Bt.transpose() * p.a);
  return {w, objective(p, w)};
}

Oracle simplex_oracle(const Profiled& p, double Q) {
  const Eigen::Index J = p.Bt.cols();
  Oracle best{VectorXd::Zero(J), kInf};
  for (unsigned mask = 1; mask < (1u << J); ++mask) {
    std::vector<Eigen::Index> idx;
    for (Eigen::Index j = 0; j < J; ++j)
      if (mask & (1u << j)) idx.push_back(j);
    const VectorXd ws = equality_ls(columns(p.Bt, idx), p.a, Q);
    if (ws.minCoeff() < -kFeasTol) continue;
    keep_best(p, scatter(ws, idx, J), best);
  }
  return best;
}

Oracle lasso_oracle(const Profiled& p, double Q) {
  const Eigen::Index J = p.Bt.cols();
  Oracle best{VectorXd::Zero(J), objective(p, VectorXd::Zero(J))};
  unsigned total = 1;
  for (Eigen::Index j = 0; j < J; ++j) total *= 3;
  for (unsigned code = 1; code < total; ++code) {
    std::vector<Eigen::Index> idx;
    std::vector<double> sign;
    unsigned c = code;
    for (Eigen::Index j = 0; j < J; ++j, c /= 3) {
      if (c % 3 == 0) continue;
      idx.push_back(j);
      sign.push_back(c % 3 == 1 ? 1.0 : -1.0);
    }
    const Eigen::Index n = static_cast<Eigen::Index>(idx.size());
    MatrixXd Bs = columns(p.Bt, idx);
    // Substitute v = sign .* w so the active l1 constraint reads 1'v = Q.
    for (Eigen::Index i = 0; i < n; ++i) Bs.col(i) *= sign[static_cast<std::size_t>(i)];
    const VectorXd free = (Bs.transpose() * Bs).ldlt().solve(Bs.transpose() * p.a);
    const VectorXd active = equality_ls(Bs, p.a, Q);
    for (const VectorXd* v : {&free, &active}) {
      if (!v->allFinite() || v->minCoeff() < -kFeasTol || v->sum() > Q + kFeasTol) continue;
      VectorXd w = VectorXd::Zero(J);
      for (Eigen::Index i = 0; i < n; ++i) w(idx[static_cast<std::size_t>(i)]) = sign[static_cast<std::size_t>(i)] * (*v)(i);
      keep_best(p, w, best);
    }
  }
  return best;
}

Oracle ridge_oracle(const Profiled& p, double Q) {
  const MatrixXd H = p.Bt.transpose() * p.Bt;
  const VectorXd g = p.Bt.transpose() * p.a;
  const Eigen::SelfAdjointEigenSolver<MatrixXd> es(H);
  const VectorXd d = es.eigenvalues();
  const VectorXd gt = es.eigenvectors().transpose() * g;
  auto w_of = [&](double lambda) {
    VectorXd z(d.size());
    for (Eigen::Index i = 0; i < d.size(); ++i) z(i) = (d(i) + lambda) > 0 ? gt(i) / (d(i) + lambda) : 0.0;
    return VectorXd(es.eigenvectors() * z);
  };
  const VectorXd w0 = w_of(0.0);
  if (w0.norm() <= Q) return {w0, objective(p, w0)};
  double lo = 0.0;
  double hi = 1.0;
  while (w_of(hi).norm() > Q) hi *= 2.0;
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    (w_of(mid).norm() > Q ? lo : hi) = mid;
  }
  const VectorXd w = w_of(hi);
  return {w, objective(p, w)};
}

Oracle l1l2_oracle(const Profiled& p, double Q, double Q2) {
  const Eigen::Index J = p.Bt.cols();
  Oracle best{VectorXd::Zero(J), kInf};
  for (unsigned mask = 1; mask < (1u << J); ++mask) {
    std::vector<Eigen::Index> idx;
    for (Eigen::Index j = 0; j < J; ++j)
      if (mask & (1u << j)) idx.push_back(j);
    const MatrixXd Bs = columns(p.Bt, idx);
    VectorXd ws = equality_ls(Bs, p.a, Q);
    if (ws.norm() > Q2) {
      // Ball active: the norm of the ridge-penalized equality solution decreases in lambda.
      const double floor_norm = Q / std::sqrt(static_cast<double>(idx.size()));
      if (floor_norm > Q2 + kFeasTol) continue;
      double lo = 0.0;
      double hi = 1.0;
      while (equality_ls(Bs, p.a, Q, hi).norm() > Q2 && hi < 1e12) hi *= 2.0;
      for (int it = 0; it < 200; ++it) {
        const double mid = 0.5 * (lo + hi);
        (equality_ls(Bs, p.a, Q, mid).norm() > Q2 ? lo : hi) = mid;
      }
      ws = equality_ls(Bs, p.a, Q, hi);
    }
    if (ws.minCoeff() < -kFeasTol || ws.norm() > Q2 + 1e-8) continue;
    keep_best(p, scatter(ws, idx, J), best);
  }
  return best;
}

Oracle lasso_grid_oracle3(const Profiled& p, double Q, double step) {
  Oracle best{VectorXd::Zero(3), kInf};
  auto scan = [&](const Eigen::Vector3d& center, double half, double h) {
    const int n = static_cast<int>(std::ceil(half / h));
    Eigen::Vector3d w;
    Oracle local = best;
    for (int i = -n; i <= n; ++i)
      for (int j = -n; j <= n; ++j)
        for (int k = -n; k <= n; ++k) {
          w = center + h * Eigen::Vector3d(i, j, k);
          if (w.lpNorm<1>() > Q + 1e-12) continue;
          const double f = objective(p, w);
          if (f < local.objective) {
            local.objective = f;
            local.w = w;
          }
        }
    best = local;
  };
  scan(Eigen::Vector3d::Zero(), Q, 0.02);
  for (double h = 0.002; h >= step * 0.999; h /= 10.0) scan(best.w, 20.0 * h, h);
  return best;
}

Instance random_instance(std::size_t T0, std::size_t J, std::size_t K, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::uniform_real_distribution<double> pos(0.5, 1.5);
  const auto n = static_cast<Eigen::Index>(T0);
  Instance in;
  in.A.resize(n);
  in.B.resize(n, static_cast<Eigen::Index>(J));
  in.C.resize(n, static_cast<Eigen::Index>(K));
  in.V.resize(n);
  for (Eigen::Index t = 0; t < n; ++t) {
    in.A(t) = u(rng);
    for (Eigen::Index j = 0; j < in.B.cols(); ++j) in.B(t, j) = u(rng);
    for (Eigen::Index k = 0; k < in.C.cols(); ++k) in.C(t, k) = u(rng);
    in.V(t) = pos(rng);
  }
  return in;
}

}  // namespace scpi::testing
