#include "scpi/conic.hpp"

#include "scpi/errors.hpp"

#include <Eigen/LU>

#include <algorithm>
#include <cmath>
#include <limits>
#include <ostream>

namespace scpi {
namespace {

constexpr const char* kModule = "qp_solver";
constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kStep = 0.99;

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

struct Block {
  Index begin;
  Index size;
};

std::vector<Block> soc_blocks(const ConeDims& dims) {
  std::vector<Block> out;
  Index at = static_cast<Index>(dims.nonneg);
  for (auto q : dims.soc) {
    out.push_back({at, static_cast<Index>(q)});
    at += static_cast<Index>(q);
  }
  return out;
}

/// Nesterov-Todd scaling W with W z = W^{-1} s = lambda.
struct Scaling {
  VectorXd d;                  // nonnegative orthant: W = diag(d)
  std::vector<VectorXd> wbar;  // SOC: W = beta * H(wbar)
  std::vector<double> beta;
  VectorXd lambda;
};

double soc_residual(const VectorXd& x, const Block& b) {
  const double x0 = x(b.begin);
  const double r = x.segment(b.begin + 1, b.size - 1).norm();
  return (x0 - r) * (x0 + r);
}

// H(w) X = [w0 X0 + w1'X1 ; w1 X0 + X1 + w1 (w1'X1) / (1 + w0)], applied in place to the rows of a block.
void apply_H(const VectorXd& w, Eigen::Ref<MatrixXd> X) {
  const Index q = w.size();
  const double w0 = w(0);
  const auto w1 = w.tail(q - 1);
  const Eigen::RowVectorXd x0 = X.row(0);
  const Eigen::RowVectorXd w1x1 = w1.transpose() * X.bottomRows(q - 1);
  X.row(0) = w0 * x0 + w1x1;
  X.bottomRows(q - 1) += w1 * (x0 + w1x1 / (1.0 + w0));
}

void flip_tail(Eigen::Ref<MatrixXd> X) { X.bottomRows(X.rows() - 1) *= -1.0; }

/// X <- W X (inverse=false) or X <- W^{-1} X (inverse=true), row blocks following the cone layout.
void apply_scaling(const Scaling& W, const ConeDims& dims, const std::vector<Block>& blocks, Eigen::Ref<MatrixXd> X,
                   bool inverse) {
  const Index l = static_cast<Index>(dims.nonneg);
  if (l > 0) {
    if (inverse) {
      X.topRows(l).array().colwise() /= W.d.array();
    } else {
      X.topRows(l).array().colwise() *= W.d.array();
    }
  }
  for (std::size_t k = 0; k < blocks.size(); ++k) {
    auto Xb = X.middleRows(blocks[k].begin, blocks[k].size);
    if (inverse) {
      // H(w)^{-1} = J H(w) J
      flip_tail(Xb);
      apply_H(W.wbar[k], Xb);
      flip_tail(Xb);
      Xb /= W.beta[k];
    } else {
      apply_H(W.wbar[k], Xb);
      Xb *= W.beta[k];
    }
  }
}

VectorXd scaled(const Scaling& W, const ConeDims& dims, const std::vector<Block>& blocks, VectorXd v, bool inverse) {
  Eigen::Map<MatrixXd> m(v.data(), v.size(), 1);
  apply_scaling(W, dims, blocks, m, inverse);
  return v;
}

Scaling compute_scaling(const VectorXd& s, const VectorXd& z, const ConeDims& dims, const std::vector<Block>& blocks) {
  Scaling W;
  const Index l = static_cast<Index>(dims.nonneg);
  W.d = (s.head(l).array() / z.head(l).array()).sqrt();
  for (const auto& b : blocks) {
    const double sn = std::sqrt(soc_residual(s, b));
    const double zn = std::sqrt(soc_residual(z, b));
    VectorXd sb = s.segment(b.begin, b.size) / sn;
    VectorXd zb = z.segment(b.begin, b.size) / zn;
    const double gamma = std::sqrt((1.0 + sb.dot(zb)) / 2.0);
    VectorXd wb = sb;
    wb(0) += zb(0);
    wb.tail(b.size - 1) -= zb.tail(b.size - 1);
    wb /= 2.0 * gamma;
    W.wbar.push_back(std::move(wb));
    W.beta.push_back(std::sqrt(sn / zn));
  }
  W.lambda = scaled(W, dims, blocks, z, false);
  return W;
}

VectorXd jordan(const VectorXd& u, const VectorXd& v, const ConeDims& dims, const std::vector<Block>& blocks) {
  VectorXd out(u.size());
  const Index l = static_cast<Index>(dims.nonneg);
  out.head(l) = u.head(l).cwiseProduct(v.head(l));
  for (const auto& b : blocks) {
    const auto ub = u.segment(b.begin, b.size);
    const auto vb = v.segment(b.begin, b.size);
    out(b.begin) = ub.dot(vb);
    out.segment(b.begin + 1, b.size - 1) = ub(0) * vb.tail(b.size - 1) + vb(0) * ub.tail(b.size - 1);
  }
  return out;
}

/// Solves lambda o x = r for x.
VectorXd jordan_solve(const VectorXd& lam, const VectorXd& r, const ConeDims& dims, const std::vector<Block>& blocks) {
  VectorXd x(r.size());
  const Index l = static_cast<Index>(dims.nonneg);
  x.head(l) = r.head(l).cwiseQuotient(lam.head(l));
  for (const auto& b : blocks) {
    const double l0 = lam(b.begin);
    const auto l1 = lam.segment(b.begin + 1, b.size - 1);
    const double r0 = r(b.begin);
    const auto r1 = r.segment(b.begin + 1, b.size - 1);
    const double det = soc_residual(lam, b);
    const double x0 = (l0 * r0 - l1.dot(r1)) / det;
    x(b.begin) = x0;
    x.segment(b.begin + 1, b.size - 1) = (r1 - x0 * l1) / l0;
  }
  return x;
}

VectorXd identity(const ConeDims& dims, const std::vector<Block>& blocks, Index m) {
  VectorXd e = VectorXd::Zero(m);
  e.head(static_cast<Index>(dims.nonneg)).setOnes();
  for (const auto& b : blocks) e(b.begin) = 1.0;
  return e;
}

/// Smallest t with x + t e in the cone (negative when x is interior).
double cone_violation(const VectorXd& x, const ConeDims& dims, const std::vector<Block>& blocks) {
  double t = -kInf;
  const Index l = static_cast<Index>(dims.nonneg);
  if (l > 0) t = std::max(t, -x.head(l).minCoeff());
  for (const auto& b : blocks) t = std::max(t, x.segment(b.begin + 1, b.size - 1).norm() - x(b.begin));
  return t;
}

/// Largest alpha with x + alpha dx in the cone, for x in its interior.
double max_step(const VectorXd& x, const VectorXd& dx, const ConeDims& dims, const std::vector<Block>& blocks) {
  double alpha = kInf;
  const Index l = static_cast<Index>(dims.nonneg);
  for (Index i = 0; i < l; ++i)
    if (dx(i) < 0.0) alpha = std::min(alpha, -x(i) / dx(i));
  for (const auto& b : blocks) {
    const double x0 = x(b.begin);
    const double d0 = dx(b.begin);
    const auto x1 = x.segment(b.begin + 1, b.size - 1);
    const auto d1 = dx.segment(b.begin + 1, b.size - 1);
    const double a = d0 * d0 - d1.squaredNorm();
    const double bb = 2.0 * (x0 * d0 - x1.dot(d1));
    const double c = std::max(soc_residual(x, b), 0.0);
    double root = kInf;
    if (std::abs(a) <= 1e-300) {
      if (bb < 0.0) root = -c / bb;
    } else {
      const double disc = bb * bb - 4.0 * a * c;
      if (disc >= 0.0) {
        const double sq = std::sqrt(disc);
        const double qq = -0.5 * (bb + (bb >= 0.0 ? sq : -sq));
        const double r1 = qq / a;
        const double r2 = qq != 0.0 ? c / qq : kInf;
        for (double r : {r1, r2})
          if (r > 0.0) root = std::min(root, r);
      }
    }
    // The leading component must stay nonnegative as well.
    if (d0 < 0.0) root = std::min(root, -x0 / d0);
    alpha = std::min(alpha, root);
  }
  return alpha;
}

/// Augmented Newton system [P A' G'; A 0 0; G 0 -W2] with static regularization and iterative refinement.
class KktSystem {
 public:
  KktSystem(const ConicProblem& prob, const MatrixXd& W2)
      : n_(static_cast<Index>(prob.n())), p_(prob.A.rows()), m_(prob.G.rows()) {
    const Index N = n_ + p_ + m_;
    K_.setZero(N, N);
    if (prob.P.size() > 0) K_.topLeftCorner(n_, n_) = prob.P;
    if (p_ > 0) {
      K_.block(0, n_, n_, p_) = prob.A.transpose();
      K_.block(n_, 0, p_, n_) = prob.A;
    }
    if (m_ > 0) {
      K_.block(0, n_ + p_, n_, m_) = prob.G.transpose();
      K_.block(n_ + p_, 0, m_, n_) = prob.G;
      K_.bottomRightCorner(m_, m_) = -W2;
    }
    double scale = 1.0;
    if (n_ > 0 && N > n_) scale = std::max(scale, K_.topRows(n_).cwiseAbs().maxCoeff());
    if (prob.P.size() > 0) scale = std::max(scale, prob.P.cwiseAbs().maxCoeff());
    const double reg = 1e-13 * scale;
    MatrixXd Kreg = K_;
    Kreg.diagonal().head(n_).array() += reg;
    Kreg.diagonal().tail(p_ + m_).array() -= reg;
    lu_.compute(Kreg);
  }

  /// Solves K [x; y; z] = [r1; r2; r3].
  void solve(const VectorXd& r1, const VectorXd& r2, const VectorXd& r3, VectorXd& x, VectorXd& y,
             VectorXd& z) const {
    VectorXd rhs(n_ + p_ + m_);
    rhs << r1, r2, r3;
    VectorXd sol = lu_.solve(rhs);
    for (int it = 0; it < 5; ++it) {
      VectorXd res = rhs - K_ * sol;
      if (res.lpNorm<Eigen::Infinity>() <= 1e-14 * (1.0 + rhs.lpNorm<Eigen::Infinity>())) break;
      sol += lu_.solve(res);
    }
    x = sol.head(n_);
    y = sol.segment(n_, p_);
    z = sol.tail(m_);
  }

 private:
  Index n_;
  Index p_;
  Index m_;
  MatrixXd K_;
  Eigen::PartialPivLU<MatrixXd> lu_;
};

double objective(const ConicProblem& prob, const VectorXd& x) {
  double f = prob.q.dot(x);
  if (prob.P.size() > 0) f += 0.5 * x.dot(prob.P * x);
  return f;
}

}  // namespace

std::size_t ConeDims::rows() const {
  std::size_t m = nonneg;
  for (auto q : soc) m += q;
  return m;
}

void ConicProblem::validate() const {
  const auto nn = q.size();
  auto bad = [](const std::string& msg) { throw Error(ErrorCode::NumericalFailure, kModule, msg); };
  if (P.size() > 0 && (P.rows() != nn || P.cols() != nn)) bad("P must be n x n");
  if (P.size() > 0) {
    const double asym = (P - P.transpose()).cwiseAbs().maxCoeff();
    if (asym > 1e-10 * std::max(1.0, P.cwiseAbs().maxCoeff())) bad("P is not symmetric");
  }
  if (A.rows() > 0 && A.cols() != nn) bad("A must have n columns");
  if (A.rows() != b.size()) bad("A and b disagree");
  if (G.rows() > 0 && G.cols() != nn) bad("G must have n columns");
  if (G.rows() != h.size()) bad("G and h disagree");
  if (static_cast<std::size_t>(G.rows()) != dims.rows()) bad("cone dimensions do not match G");
  for (auto s : dims.soc)
    if (s < 1) bad("empty second-order cone");
}

std::string to_string(SolveStatus s) {
  switch (s) {
    case SolveStatus::Optimal: return "optimal";
    case SolveStatus::Infeasible: return "infeasible";
    case SolveStatus::Unbounded: return "unbounded";
    case SolveStatus::MaxIter: return "max_iter";
  }
  return "?";
}

double KktResiduals::max() const { return std::max({primal, dual, std::abs(gap)}); }

KktResiduals kkt_residuals(const ConicProblem& prob, const VectorXd& x, const VectorXd& y, const VectorXd& z,
                           const VectorXd& s) {
  KktResiduals r;
  VectorXd rx = prob.q;
  if (prob.P.size() > 0) rx += prob.P * x;
  if (prob.A.rows() > 0) {
    rx += prob.A.transpose() * y;
    r.primal = (prob.A * x - prob.b).lpNorm<Eigen::Infinity>();
  }
  if (prob.G.rows() > 0) {
    rx += prob.G.transpose() * z;
    r.primal = std::max(r.primal, (prob.G * x + s - prob.h).lpNorm<Eigen::Infinity>());
    r.gap = s.dot(z);
  }
  r.dual = rx.lpNorm<Eigen::Infinity>();
  return r;
}

ConicSolution solve_conic(const ConicProblem& prob, const SolverSettings& settings) {
  prob.validate();
  const Index n = static_cast<Index>(prob.n());
  const Index p = prob.A.rows();
  const Index m = prob.G.rows();
  const auto& dims = prob.dims;
  const auto blocks = soc_blocks(dims);

  ConicSolution sol;
  sol.y = VectorXd::Zero(p);
  sol.z = VectorXd::Zero(m);
  sol.s = VectorXd::Zero(m);

  if (m == 0) {
    KktSystem kkt(prob, MatrixXd::Zero(0, 0));
    VectorXd unused;
    kkt.solve(-prob.q, prob.b, VectorXd::Zero(0), sol.x, sol.y, unused);
    sol.kkt = kkt_residuals(prob, sol.x, sol.y, sol.z, sol.s);
    sol.objective = objective(prob, sol.x);
    sol.status = sol.kkt.max() <= settings.feastol * std::max(1.0, prob.q.lpNorm<Eigen::Infinity>())
                     ? SolveStatus::Optimal
                     : SolveStatus::Unbounded;
    return sol;
  }

  const VectorXd e = identity(dims, blocks, m);
  const double degree = static_cast<double>(dims.degree());
  const double resx0 = std::max(1.0, prob.q.norm());
  const double resy0 = std::max(1.0, prob.b.norm());
  const double resz0 = std::max(1.0, prob.h.norm());

  // Starting point: least-squares solution of the KKT system with W = I, shifted into the cone.
  VectorXd x, y, z, s;
  {
    // [P A' G'; A 0 0; G 0 -I][x; y; z] = [-q; b; h]: then s = h - G x = -z.
    KktSystem kkt(prob, MatrixXd::Identity(m, m));
    kkt.solve(-prob.q, prob.b, prob.h, x, y, z);
    s = -z;
    const double ts = cone_violation(s, dims, blocks);
    if (ts >= -1e-8 * std::max(s.norm(), 1.0)) s += (1.0 + ts) * e;
    const double tz = cone_violation(z, dims, blocks);
    if (tz >= -1e-8 * std::max(z.norm(), 1.0)) z += (1.0 + tz) * e;
  }

  auto finish = [&](SolveStatus status, int iters) {
    sol.status = status;
    sol.x = x;
    sol.y = y;
    sol.z = z;
    sol.s = s;
    sol.iterations = iters;
    sol.objective = objective(prob, x);
    sol.kkt = kkt_residuals(prob, x, y, z, s);
    return sol;
  };

  double last_pres = kInf;
  double min_dres = kInf;
  struct Iterate {
    VectorXd x, y, z, s;
    double score = kInf;
    int iter = 0;
  } best;
  auto finish_best = [&]() {
    x = best.x;
    y = best.y;
    z = best.z;
    s = best.s;
    return finish(SolveStatus::Optimal, best.iter);
  };
  for (int iter = 0;; ++iter) {
    VectorXd rx = prob.q + prob.G.transpose() * z;
    if (prob.P.size() > 0) rx += prob.P * x;
    if (p > 0) rx += prob.A.transpose() * y;
    const VectorXd ry = p > 0 ? VectorXd(prob.A * x - prob.b) : VectorXd::Zero(0);
    const VectorXd rz = prob.G * x + s - prob.h;

    const double gap = s.dot(z);
    const double pcost = objective(prob, x);
    const double dcost = pcost + y.dot(ry) + z.dot(rz) - gap;
    double relgap = kInf;
    if (pcost < 0.0) {
      relgap = gap / -pcost;
    } else if (dcost > 0.0) {
      relgap = gap / dcost;
    }
    const double pres = std::max(p > 0 ? ry.norm() / resy0 : 0.0, rz.norm() / resz0);
    const double dres = rx.norm() / resx0;
    if (std::isfinite(pres) && std::isfinite(dres)) {
      last_pres = pres;
      min_dres = std::min(min_dres, dres);
    }

    if (settings.log)
      *settings.log << "iter " << iter << " pcost " << pcost << " dcost " << dcost << " gap " << gap << " pres "
                    << pres << " dres " << dres << '\n';

    if (!std::isfinite(pcost) || !std::isfinite(gap) || !std::isfinite(pres) || !std::isfinite(dres)) break;
    if (pres <= settings.feastol && dres <= settings.feastol &&
        (gap <= settings.abstol || relgap <= settings.reltol))
      return finish(SolveStatus::Optimal, iter);
    if (x.norm() > settings.divergence) return finish(SolveStatus::Unbounded, iter);
    const double score = std::max({pres, dres, std::min(gap, relgap)});
    if (score < best.score) {
      best = {x, y, z, s, score, iter};
    } else if (iter - best.iter >= 5 && best.score <= settings.reduced_tol) {
      // Rounding errors dominate: further steps only degrade the iterate.
      return finish_best();
    }
    if (iter >= settings.max_iter) break;

    const Scaling W = compute_scaling(s, z, dims, blocks);
    MatrixXd W2 = MatrixXd::Identity(m, m);
    apply_scaling(W, dims, blocks, W2, false);
    apply_scaling(W, dims, blocks, W2, false);
    W2 = 0.5 * (W2 + W2.transpose()).eval();
    const KktSystem kkt(prob, W2);

    // Solves the linearized system for a complementarity right-hand side rc:
    //   P dx + A'dy + G'dz = -rx,  A dx = -ry,  G dx + ds = -rz,  lambda o (W dz + W^{-1} ds) = rc.
    // With ct = lambda \ rc: ds = W (ct - W dz) and G dx - W^2 dz = -rz - W ct.
    auto newton = [&](const VectorXd& rc, VectorXd& dx, VectorXd& dy, VectorXd& dz, VectorXd& ds) {
      const VectorXd ct = jordan_solve(W.lambda, rc, dims, blocks);
      const VectorXd Wct = scaled(W, dims, blocks, ct, false);
      kkt.solve(-rx, -ry, -rz - Wct, dx, dy, dz);
      const VectorXd wdz = scaled(W, dims, blocks, dz, false);
      ds = scaled(W, dims, blocks, VectorXd(ct - wdz), false);
    };

    VectorXd dxa, dya, dza, dsa;
    newton(-jordan(W.lambda, W.lambda, dims, blocks), dxa, dya, dza, dsa);
    const double alpha_aff =
        std::min({1.0, max_step(s, dsa, dims, blocks), max_step(z, dza, dims, blocks)});
    const double mu = gap / degree;
    const double sigma = std::pow(1.0 - alpha_aff, 3.0);

    const VectorXd dsa_s = scaled(W, dims, blocks, dsa, true);
    const VectorXd dza_s = scaled(W, dims, blocks, dza, false);
    const VectorXd rc = -jordan(W.lambda, W.lambda, dims, blocks) - jordan(dsa_s, dza_s, dims, blocks) +
                        sigma * mu * e;
    VectorXd dx, dy, dz, ds;
    newton(rc, dx, dy, dz, ds);
    const double amax = std::min(max_step(s, ds, dims, blocks), max_step(z, dz, dims, blocks));
    const double alpha = std::min(1.0, kStep * amax);
    if (!(alpha > 1e-14)) break;

    x += alpha * dx;
    y += alpha * dy;
    z += alpha * dz;
    s += alpha * ds;
  }

  if (best.score <= settings.reduced_tol) return finish_best();
  const double loose = std::sqrt(settings.feastol);
  // Dual residual driven to zero while the primal residual stalls: no feasible point.
  if (last_pres > loose && min_dres <= loose) return finish(SolveStatus::Infeasible, settings.max_iter);
  return finish(SolveStatus::MaxIter, settings.max_iter);
}

}  // namespace scpi
