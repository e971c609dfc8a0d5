#include "scpi/qp.hpp"

#include "scpi/errors.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/QR>

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>

namespace scpi {
namespace {

constexpr const char* kModule = "qp_solver";
constexpr double kInf = std::numeric_limits<double>::infinity();

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

/// Conic rows of a constraint system evaluated at offset + x, over variables (x, aux).
struct Rows {
  MatrixXd Aeq;
  VectorXd beq;
  MatrixXd Gin;
  VectorXd hin;
  std::vector<std::pair<MatrixXd, VectorXd>> soc;
  std::size_t n_aux = 0;
};

Rows constraint_rows(const ConstraintSystem& cs, const VectorXd& offset, bool relax_sphere) {
  const auto J = static_cast<Index>(cs.J);
  const auto d = static_cast<Index>(cs.d);
  std::size_t n_l1 = 0;
  for (const auto& t : cs.in)
    if (t.f == TermFunction::L1) ++n_l1;
  for (const auto& t : cs.eq)
    if (t.f == TermFunction::L1) throw Error(ErrorCode::InconsistentSpec, kModule, "L1 equality needs sign constraints");

  Rows r;
  r.n_aux = n_l1 * cs.J;
  const Index n = d + static_cast<Index>(r.n_aux);
  const VectorXd w0 = offset.head(J);

  std::vector<Eigen::RowVectorXd> eq_rows, in_rows;
  std::vector<double> eq_rhs, in_rhs;
  Index aux_at = d;

  auto add_ball = [&](double bound) {
    MatrixXd Gb = MatrixXd::Zero(J + 1, n);
    VectorXd hb(J + 1);
    hb(0) = bound;
    hb.tail(J) = w0;
    Gb.block(1, 0, J, J) = -MatrixXd::Identity(J, J);
    r.soc.emplace_back(std::move(Gb), std::move(hb));
  };

  for (const auto& t : cs.eq) {
    Eigen::RowVectorXd row = Eigen::RowVectorXd::Zero(n);
    switch (t.f) {
      case TermFunction::Sum:
        row.head(J).setOnes();
        eq_rows.push_back(row);
        eq_rhs.push_back(t.bound - w0.sum());
        break;
      case TermFunction::NegCoord:
        row(static_cast<Index>(t.index)) = -1.0;
        eq_rows.push_back(row);
        eq_rhs.push_back(t.bound + w0(static_cast<Index>(t.index)));
        break;
      case TermFunction::L2:
        if (!relax_sphere) throw Error(ErrorCode::NumericalFailure, kModule, "sphere constraint reached the conic builder");
        add_ball(t.bound);
        break;
      case TermFunction::L1: break;
    }
  }
  for (const auto& t : cs.in) {
    Eigen::RowVectorXd row = Eigen::RowVectorXd::Zero(n);
    switch (t.f) {
      case TermFunction::Sum:
        row.head(J).setOnes();
        in_rows.push_back(row);
        in_rhs.push_back(t.bound - w0.sum());
        break;
      case TermFunction::NegCoord:
        row(static_cast<Index>(t.index)) = -1.0;
        in_rows.push_back(row);
        in_rhs.push_back(t.bound + w0(static_cast<Index>(t.index)));
        break;
      case TermFunction::L2: add_ball(t.bound); break;
      case TermFunction::L1: {
        // |offset_j + x_j| <= aux_j, sum_j aux_j <= bound
        for (Index j = 0; j < J; ++j) {
          Eigen::RowVectorXd up = Eigen::RowVectorXd::Zero(n);
          up(j) = 1.0;
          up(aux_at + j) = -1.0;
          in_rows.push_back(up);
          in_rhs.push_back(-w0(j));
          Eigen::RowVectorXd dn = Eigen::RowVectorXd::Zero(n);
          dn(j) = -1.0;
          dn(aux_at + j) = -1.0;
          in_rows.push_back(dn);
          in_rhs.push_back(w0(j));
        }
        Eigen::RowVectorXd total = Eigen::RowVectorXd::Zero(n);
        total.segment(aux_at, J).setOnes();
        in_rows.push_back(total);
        in_rhs.push_back(t.bound);
        aux_at += J;
        break;
      }
    }
  }

  r.Aeq.resize(static_cast<Index>(eq_rows.size()), n);
  r.beq.resize(static_cast<Index>(eq_rows.size()));
  for (std::size_t i = 0; i < eq_rows.size(); ++i) {
    r.Aeq.row(static_cast<Index>(i)) = eq_rows[i];
    r.beq(static_cast<Index>(i)) = eq_rhs[i];
  }
  r.Gin.resize(static_cast<Index>(in_rows.size()), n);
  r.hin.resize(static_cast<Index>(in_rows.size()));
  for (std::size_t i = 0; i < in_rows.size(); ++i) {
    r.Gin.row(static_cast<Index>(i)) = in_rows[i];
    r.hin(static_cast<Index>(i)) = in_rhs[i];
  }
  return r;
}

/// Assembles the cone rows: nonnegative rows first, then each SOC block.
void assemble_cones(ConicProblem& prob, const MatrixXd& Gin, const VectorXd& hin,
                    const std::vector<std::pair<MatrixXd, VectorXd>>& soc) {
  Index m = Gin.rows();
  for (const auto& [Gb, hb] : soc) m += Gb.rows();
  const Index n = static_cast<Index>(prob.q.size());
  prob.G.setZero(m, n);
  prob.h.setZero(m);
  prob.G.topRows(Gin.rows()) = Gin;
  prob.h.head(Gin.rows()) = hin;
  prob.dims.nonneg = static_cast<std::size_t>(Gin.rows());
  prob.dims.soc.clear();
  Index at = Gin.rows();
  for (const auto& [Gb, hb] : soc) {
    prob.G.middleRows(at, Gb.rows()) = Gb;
    prob.h.segment(at, Gb.rows()) = hb;
    prob.dims.soc.push_back(static_cast<std::size_t>(Gb.rows()));
    at += Gb.rows();
  }
}

/// Row equilibration: each equality and nonnegative row to unit max-norm, each SOC block by one factor.
void equilibrate(ConicProblem& prob) {
  auto row_scale = [](const Eigen::RowVectorXd& row) {
    const double s = row.cwiseAbs().maxCoeff();
    return s > 0.0 ? s : 1.0;
  };
  for (Index i = 0; i < prob.A.rows(); ++i) {
    const double s = row_scale(prob.A.row(i));
    prob.A.row(i) /= s;
    prob.b(i) /= s;
  }
  const Index l = static_cast<Index>(prob.dims.nonneg);
  for (Index i = 0; i < l; ++i) {
    const double s = row_scale(prob.G.row(i));
    prob.G.row(i) /= s;
    prob.h(i) /= s;
  }
  Index at = l;
  for (auto q : prob.dims.soc) {
    const Index qq = static_cast<Index>(q);
    double s = prob.G.middleRows(at, qq).cwiseAbs().maxCoeff();
    if (!(s > 0.0)) s = 1.0;
    prob.G.middleRows(at, qq) /= s;
    prob.h.segment(at, qq) /= s;
    at += qq;
  }
}

double wls_objective(const VectorXd& A, const MatrixXd& Z, const VectorXd& V, const VectorXd& beta) {
  const VectorXd r = A - Z * beta;
  return r.dot(V.cwiseProduct(r));
}

/// Minimizer on the sphere ||w||_2 = Q with the covariate block profiled out (trust-region secular equation).
VectorXd sphere_solution(const VectorXd& Av, const MatrixXd& Bv, const MatrixXd& Cv, double Q,
                         std::vector<std::string>& notes) {
  const Index J = Bv.cols();
  MatrixXd Bt = Bv;
  VectorXd At = Av;
  Eigen::CompleteOrthogonalDecomposition<MatrixXd> cod;
  if (Cv.cols() > 0) {
    cod.compute(Cv);
    Bt = Bv - Cv * cod.solve(Bv);
    At = Av - Cv * cod.solve(Av);
  }
  Eigen::SelfAdjointEigenSolver<MatrixXd> es(Bt.transpose() * Bt);
  const VectorXd lam = es.eigenvalues();
  const VectorXd bvec = es.eigenvectors().transpose() * (Bt.transpose() * At);
  auto norm_at = [&](double mu) {
    double s = 0.0;
    for (Index i = 0; i < J; ++i) s += bvec(i) * bvec(i) / ((lam(i) + mu) * (lam(i) + mu));
    return std::sqrt(s);
  };
  const double lmin = lam(0);
  const double scale = std::max(1.0, lam.cwiseAbs().maxCoeff());
  double lo = -lmin + 1e-15 * scale;
  double hi = 0.0;
  if (const double m0 = std::max(0.0, lo); norm_at(m0) > Q) {
    // Ball active: the multiplier is nonnegative.
    lo = m0;
    hi = scale;
    while (norm_at(hi) > Q) hi *= 2.0;
  } else if (norm_at(lo) < Q) {
    // Hard case: the multiplier sits at -lambda_min and the gap is filled along its eigenvector.
    notes.emplace_back("sphere fit hit the hard case of the trust-region equation");
    VectorXd y = VectorXd::Zero(J);
    for (Index i = 1; i < J; ++i) y(i) = bvec(i) / (lam(i) - lmin);
    const double rest = Q * Q - y.squaredNorm();
    y(0) = std::sqrt(std::max(rest, 0.0));
    return es.eigenvectors() * y;
  }
  for (int it = 0; it < 300 && hi - lo > 1e-16 * scale; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (norm_at(mid) > Q) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  const double mu = 0.5 * (lo + hi);
  VectorXd y(J);
  for (Index i = 0; i < J; ++i) y(i) = bvec(i) / (lam(i) + mu);
  return es.eigenvectors() * y;
}


/// min ||Av - Zv x||^2 subject to E x = f by the null-space method; nullopt if E x = f is inconsistent.
std::optional<VectorXd> equality_ls(const VectorXd& Av, const MatrixXd& Zv, const MatrixXd& E, const VectorXd& f) {
  const Index d = Zv.cols();
  if (E.rows() == 0) return Eigen::CompleteOrthogonalDecomposition<MatrixXd>(Zv).solve(Av).eval();
  Eigen::ColPivHouseholderQR<MatrixXd> qr(E.transpose());
  const Index r = qr.rank();
  const VectorXd xp = Eigen::CompleteOrthogonalDecomposition<MatrixXd>(E).solve(f);
  if ((E * xp - f).norm() > 1e-10 * (1.0 + f.norm())) return std::nullopt;
  if (r == d) return xp;
  const MatrixXd Qf = qr.householderQ();
  const MatrixXd N = Qf.rightCols(d - r);
  const VectorXd y = Eigen::CompleteOrthogonalDecomposition<MatrixXd>(Zv * N).solve(Av - Zv * xp);
  return (xp + N * y).eval();
}

/// Re-solves on the active set guessed from an approximate optimum x; keeps the best feasible point.
/// Returns true when x was replaced.
bool polish(const VectorXd& Av, const MatrixXd& Zv, const ConstraintSystem& cs, VectorXd& x, double obj_tol,
            std::vector<std::string>& notes) {
  const auto J = static_cast<Index>(cs.J);
  const Index d = Zv.cols();
  const double wscale = std::max(1.0, x.head(J).cwiseAbs().maxCoeff());
  auto obj = [&](const VectorXd& v) { return (Av - Zv * v).squaredNorm(); };
  double best = obj(x);
  bool replaced = false;

  auto consider = [&](const std::optional<VectorXd>& cand) {
    if (!cand || !cand->allFinite() || !cs.contains(*cand, 1e-10 * wscale)) return;
    const double o = obj(*cand);
    if (o <= best + obj_tol) {
      best = std::min(best, o);
      x = *cand;
      replaced = true;
    }
  };

  for (double tau : {1e-9, 1e-7, 1e-5, 1e-3}) {
    const double tol = tau * wscale;
    std::vector<Eigen::RowVectorXd> rows;
    std::vector<double> rhs;
    bool nonlinear_active = false;
    auto fix_coord = [&](Index j, double value) {
      Eigen::RowVectorXd row = Eigen::RowVectorXd::Zero(d);
      row(j) = 1.0;
      rows.push_back(row);
      rhs.push_back(value);
    };
    auto add = [&](const ConstraintTerm& t, bool active) {
      switch (t.f) {
        case TermFunction::Sum:
          if (active) {
            Eigen::RowVectorXd row = Eigen::RowVectorXd::Zero(d);
            row.head(J).setOnes();
            rows.push_back(row);
            rhs.push_back(t.bound);
          }
          break;
        case TermFunction::NegCoord:
          if (active) fix_coord(static_cast<Index>(t.index), -t.bound);
          break;
        case TermFunction::L1:
          if (active) {
            Eigen::RowVectorXd row = Eigen::RowVectorXd::Zero(d);
            for (Index j = 0; j < J; ++j) {
              if (std::abs(x(j)) <= tol) {
                fix_coord(j, 0.0);
              } else {
                row(j) = x(j) > 0.0 ? 1.0 : -1.0;
              }
            }
            rows.push_back(row);
            rhs.push_back(t.bound);
          }
          break;
        case TermFunction::L2:
          if (active) nonlinear_active = true;
          break;
      }
    };
    for (const auto& t : cs.eq) add(t, true);
    for (const auto& t : cs.in) add(t, t.eval(x, cs.J) >= -tol * static_cast<double>(J));
    if (nonlinear_active) break;
    MatrixXd E(static_cast<Index>(rows.size()), d);
    VectorXd f(static_cast<Index>(rows.size()));
    for (std::size_t i = 0; i < rows.size(); ++i) {
      E.row(static_cast<Index>(i)) = rows[i];
      f(static_cast<Index>(i)) = rhs[i];
    }
    consider(equality_ls(Av, Zv, E, f));
  }
  if (replaced) notes.emplace_back("polished on the active set");
  return replaced;
}
}  // namespace

QpSolution solve_wls(const VectorXd& A, const MatrixXd& B, const MatrixXd& C, const VectorXd& V,
                     const ConstraintSystem& cs, const SolverSettings& settings) {
  const Index J = B.cols();
  const Index KM = C.cols();
  const Index d = J + KM;
  if (A.size() != B.rows() || C.rows() != B.rows() || V.size() != A.size())
    throw Error(ErrorCode::NumericalFailure, kModule, "inconsistent dimensions in the fit problem");
  if (static_cast<Index>(cs.J) != J || static_cast<Index>(cs.d) != d)
    throw Error(ErrorCode::NumericalFailure, kModule, "constraint system does not match the design");

  MatrixXd Z(A.size(), d);
  Z << B, C;
  const VectorXd sqrtV = V.cwiseSqrt();
  const MatrixXd Zv = sqrtV.asDiagonal() * Z;
  const VectorXd Av = sqrtV.cwiseProduct(A);

  QpSolution out;
  Eigen::CompleteOrthogonalDecomposition<MatrixXd> zcod(Zv);
  if (zcod.rank() < d) out.notes.emplace_back("objective is not strictly convex; the optimum may not be unique");

  if (cs.empty()) {
    out.x = zcod.solve(Av);
    out.objective = wls_objective(A, Z, V, out.x);
    out.status = SolveStatus::Optimal;
    return out;
  }

  bool sphere = false;
  double sphere_radius = 0.0;
  ConstraintSystem work = cs;
  for (auto it = work.eq.begin(); it != work.eq.end();) {
    if (it->f == TermFunction::L2) {
      sphere = true;
      sphere_radius = it->bound;
      work.in.push_back({TermFunction::L2, 0, it->bound, false});
      it = work.eq.erase(it);
    } else {
      ++it;
    }
  }

  VectorXd sc(d);
  for (Index k = 0; k < d; ++k) {
    const double nrm = Zv.col(k).norm();
    sc(k) = nrm > 0.0 ? nrm : 1.0;
  }
  double f0 = Av.squaredNorm();
  if (!(f0 > 0.0)) f0 = 1.0;
  const MatrixXd Zs = Zv * sc.cwiseInverse().asDiagonal();

  Rows rows = constraint_rows(work, VectorXd::Zero(d), false);
  const Index n = d + static_cast<Index>(rows.n_aux);

  ConicProblem prob;
  prob.P = MatrixXd::Zero(n, n);
  prob.P.topLeftCorner(d, d) = 2.0 * (Zs.transpose() * Zs) / f0;
  prob.q = VectorXd::Zero(n);
  prob.q.head(d) = -2.0 * (Zs.transpose() * Av) / f0;
  const VectorXd inv_sc = sc.cwiseInverse();
  auto scale_cols = [&](MatrixXd& M) {
    if (M.rows() > 0) M.leftCols(d) = M.leftCols(d) * inv_sc.asDiagonal();
  };
  scale_cols(rows.Aeq);
  scale_cols(rows.Gin);
  for (auto& blk : rows.soc) scale_cols(blk.first);
  prob.A = rows.Aeq;
  prob.b = rows.beq;
  assemble_cones(prob, rows.Gin, rows.hin, rows.soc);
  equilibrate(prob);

  const ConicSolution cs_sol = solve_conic(prob, settings);
  out.iterations = cs_sol.iterations;
  out.kkt = cs_sol.kkt;
  out.status = cs_sol.status;
  if (cs_sol.status == SolveStatus::Infeasible)
    throw Error(ErrorCode::Infeasible, kModule, "the constraint set is empty");
  if (cs_sol.status != SolveStatus::Optimal)
    throw Error(ErrorCode::NumericalFailure, kModule,
                "fit did not converge (" + to_string(cs_sol.status) + ", residual " + std::to_string(cs_sol.kkt.max()) +
                    ")");
  out.x = cs_sol.x.head(d).cwiseProduct(inv_sc);

  // Interior-point iterates are accurate in objective, not in the weights; refine on the active set.
  const double obj_tol = 1e-9 * f0;
  const bool ball_only = !sphere && work.eq.empty() && work.in.size() == 1 && work.in[0].f == TermFunction::L2;
  if (ball_only) {
    // The unconstrained minimizer if it lies in the ball, otherwise the minimizer on the sphere.
    const double radius = work.in[0].bound;
    VectorXd cand = zcod.solve(Av);
    if (cand.head(J).norm() > radius) {
      const MatrixXd Bv = Zv.leftCols(J);
      const MatrixXd Cv = Zv.rightCols(KM);
      cand.head(J) = sphere_solution(Av, Bv, Cv, radius, out.notes);
      if (KM > 0) cand.tail(KM) = Eigen::CompleteOrthogonalDecomposition<MatrixXd>(Cv).solve(Av - Bv * cand.head(J));
    }
    if (cand.allFinite() && (Av - Zv * cand).squaredNorm() <= (Av - Zv * out.x).squaredNorm() + obj_tol) {
      out.x = cand;
      out.notes.emplace_back("polished in closed form");
    }
  } else if (!sphere) {
    polish(Av, Zv, work, out.x, obj_tol, out.notes);
  }

  if (sphere) {
    const double wn = out.x.head(J).norm();
    if (wn < sphere_radius * (1.0 - 1e-7)) {
      out.notes.emplace_back("L2 constraint slack in the ball problem; re-solved on the sphere");
      const MatrixXd Bv = Zv.leftCols(J);
      const MatrixXd Cv = Zv.rightCols(KM);
      VectorXd w = sphere_solution(Av, Bv, Cv, sphere_radius, out.notes);
      out.x.head(J) = w;
      if (KM > 0) {
        Eigen::CompleteOrthogonalDecomposition<MatrixXd> ccod(Cv);
        out.x.tail(KM) = ccod.solve(Av - Bv * w);
      }
      out.kkt = {};
      out.iterations = 0;
    }
  }
  out.objective = wls_objective(A, Z, V, out.x);
  return out;
}

LevelSetProblem::LevelSetProblem(const MatrixXd& Qhat, const ConstraintSystem& cs, const VectorXd& center,
                                 const SolverSettings& settings)
    : Qhat_(Qhat), unconstrained_(cs.empty()), settings_(settings) {
  const Index d = Qhat.rows();
  if (Qhat.cols() != d || center.size() != d || static_cast<Index>(cs.d) != d)
    throw Error(ErrorCode::NumericalFailure, kModule, "level-set problem dimensions disagree");
  const double diag_max = std::max(Qhat.diagonal().maxCoeff(), 0.0);
  scale_.resize(d);
  for (Index j = 0; j < d; ++j) {
    const double q = Qhat(j, j);
    scale_(j) = q > 1e-14 * diag_max && q > 0.0 ? 1.0 / std::sqrt(q) : 1.0;
  }
  const MatrixXd Qt = scale_.asDiagonal() * (0.5 * (Qhat + Qhat.transpose())) * scale_.asDiagonal();
  Eigen::SelfAdjointEigenSolver<MatrixXd> es(Qt);
  const VectorXd lam = es.eigenvalues();
  const double lmax = std::max(lam.maxCoeff(), 0.0);
  std::vector<Index> keep, drop;
  for (Index i = 0; i < d; ++i) (lam(i) > 1e-12 * lmax && lam(i) > 0.0 ? keep : drop).push_back(i);
  L_.resize(static_cast<Index>(keep.size()), d);
  Qpinv_ = MatrixXd::Zero(d, d);
  for (std::size_t k = 0; k < keep.size(); ++k) {
    const auto i = keep[k];
    L_.row(static_cast<Index>(k)) = std::sqrt(lam(i)) * es.eigenvectors().col(i).transpose();
    Qpinv_ += es.eigenvectors().col(i) * es.eigenvectors().col(i).transpose() / lam(i);
  }
  null_.resize(d, static_cast<Index>(drop.size()));
  for (std::size_t k = 0; k < drop.size(); ++k) null_.col(static_cast<Index>(k)) = es.eigenvectors().col(drop[k]);

  Rows rows = constraint_rows(cs, center, true);
  Aeq_ = std::move(rows.Aeq);
  beq_ = std::move(rows.beq);
  Gin_ = std::move(rows.Gin);
  hin_ = std::move(rows.hin);
  soc_ = std::move(rows.soc);
  n_aux_ = rows.n_aux;
}

QpSolution LevelSetProblem::solve(const VectorXd& c, const VectorXd& G, Sense sense) const {
  const Index d = Qhat_.rows();
  QpSolution out;
  out.x = VectorXd::Zero(d);
  out.status = SolveStatus::Optimal;
  const double sign = sense == Sense::Min ? 1.0 : -1.0;

  const VectorXd ct = scale_.cwiseProduct(c);
  const VectorXd Gt = scale_.cwiseProduct(G);
  const double cn = ct.norm();
  if (!(cn > 0.0)) return out;

  const bool c_in_null = null_.cols() > 0 && (null_.transpose() * ct).norm() > 1e-9 * cn;
  const double gn = Gt.norm();
  if (!(gn > 0.0)) {
    // Level set collapses to ker(Qhat).
    if (!c_in_null) return out;
    out.notes.emplace_back("zero draw with a singular Qhat");
    if (unconstrained_) {
      out.status = SolveStatus::Unbounded;
      out.objective = sense == Sense::Min ? -kInf : kInf;
    }
    return out;
  }

  if (unconstrained_) {
    if (c_in_null) {
      out.status = SolveStatus::Unbounded;
      out.objective = sense == Sense::Min ? -kInf : kInf;
      return out;
    }
    const VectorXd Qc = Qpinv_ * ct;
    const VectorXd QG = Qpinv_ * Gt;
    const double cQc = ct.dot(Qc);
    const double GQG = Gt.dot(QG);
    const double rad = std::sqrt(std::max(cQc * GQG, 0.0));
    const double dir = sense == Sense::Min ? -1.0 : 1.0;
    out.objective = ct.dot(QG) + dir * rad;
    VectorXd xi = QG;
    if (cQc > 0.0) xi += dir * std::sqrt(GQG / cQc) * Qc;
    out.x = scale_.cwiseProduct(xi);
    return out;
  }

  // delta = g * diag(scale) * eta so that the level set has unit scale in eta.
  const double g = gn;
  const Index n = d + static_cast<Index>(n_aux_);
  VectorXd colscale = VectorXd::Ones(n);
  colscale.head(d) = g * scale_;
  auto scale_cols = [&](const MatrixXd& M) {
    MatrixXd out_m = M;
    if (out_m.rows() > 0) out_m = out_m * colscale.asDiagonal();
    return out_m;
  };

  ConicProblem prob;
  prob.q = VectorXd::Zero(n);
  prob.q.head(d) = sign * ct / cn;
  prob.A = scale_cols(Aeq_);
  prob.b = beq_;
  std::vector<std::pair<MatrixXd, VectorXd>> soc;
  soc.reserve(soc_.size() + 1);
  for (const auto& [Gb, hb] : soc_) soc.emplace_back(scale_cols(Gb), hb);
  {
    const Index r = L_.rows();
    MatrixXd Gb = MatrixXd::Zero(r + 2, n);
    const Eigen::RowVectorXd gdir = Gt.transpose() / g;
    Gb.block(0, 0, 1, d) = -2.0 * gdir;
    Gb.block(1, 0, 1, d) = -2.0 * gdir;
    Gb.block(2, 0, r, d) = -2.0 * L_;
    VectorXd hb = VectorXd::Zero(r + 2);
    hb(0) = 1.0;
    hb(1) = -1.0;
    soc.emplace_back(std::move(Gb), std::move(hb));
  }
  assemble_cones(prob, scale_cols(Gin_), hin_, soc);
  const Index ell_at = prob.G.rows() - (L_.rows() + 2);
  ConicProblem base = prob;
  equilibrate(prob);

  ConicSolution sol = solve_conic(prob, settings_);
  // delta = 0 is always feasible, so a failure means the set has no interior (e.g. a tangent cone meeting the
  // ellipsoid only at the origin). Retry with the ellipsoid relaxed to x'Lx <= 2 g'x + eta.
  for (double eta : {1e-12, 1e-10, 1e-8}) {
    if (sol.status == SolveStatus::Optimal || sol.status == SolveStatus::Unbounded) break;
    ConicProblem relaxed = base;
    relaxed.h(ell_at) += eta;
    relaxed.h(ell_at + 1) += eta;
    equilibrate(relaxed);
    sol = solve_conic(relaxed, settings_);
    if (sol.status == SolveStatus::Optimal) out.notes.emplace_back("level set relaxed by " + std::to_string(eta));
  }
  out.status = sol.status;
  out.kkt = sol.kkt;
  out.iterations = sol.iterations;
  if (sol.status == SolveStatus::Unbounded) {
    out.objective = sense == Sense::Min ? -kInf : kInf;
    return out;
  }
  const VectorXd eta = sol.x.head(d);
  out.x = colscale.head(d).cwiseProduct(eta);
  out.objective = c.dot(out.x);
  return out;
}

QpSolution solve_linear_over_level_set(const VectorXd& c, const MatrixXd& Qhat, const VectorXd& G,
                                       const ConstraintSystem& cs, const VectorXd& center, Sense sense,
                                       const SolverSettings& settings) {
  return LevelSetProblem(Qhat, cs, center, settings).solve(c, G, sense);
}

}  // namespace scpi
