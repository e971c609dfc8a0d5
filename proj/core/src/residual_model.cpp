#include "scpi/linalg.hpp"
#include "scpi/uncertainty.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace scpi {
namespace {

constexpr const char* kModule = "uncertainty";
constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

double sample_sd(const VectorXd& x) { return std::sqrt(sample_variance(x)); }

double sample_cov(const VectorXd& x, const VectorXd& y) {
  const Index n = x.size();
  if (n < 2) return 0.0;
  return (x.array() - x.mean()).matrix().dot((y.array() - y.mean()).matrix()) / static_cast<double>(n - 1);
}

MatrixXd hcat(const std::vector<MatrixXd>& parts, Index rows) {
  Index cols = 0;
  for (const auto& p : parts) cols += p.cols();
  MatrixXd out(rows, cols);
  Index c = 0;
  for (const auto& p : parts) {
    if (p.cols() == 0) continue;
    out.middleCols(c, p.cols()) = p;
    c += p.cols();
  }
  return out;
}

/// Polynomial terms of order `order` followed by lags 1..`lags` of X.
MatrixXd expand(const MatrixXd& X, int order, int lags) {
  std::vector<MatrixXd> parts;
  if (order > 0 && X.cols() > 0) parts.push_back(polynomial_terms(X, order));
  for (int k = 1; k <= lags; ++k) parts.push_back(lag_rows(X, k));
  return hcat(parts, X.rows());
}

/// Columns of C that belong to feature l (its own terms plus the common constant).
std::vector<Index> feature_c_columns(const ScMatrices& m, std::size_t l, bool* has_constant) {
  std::vector<Index> cols;
  bool constant = false;
  for (std::size_t c = 0; c < m.c_columns.size(); ++c) {
    const auto& col = m.c_columns[c];
    if (col.feature == -1 || col.feature == static_cast<int>(l)) {
      cols.push_back(static_cast<Index>(c));
      if (col.term == CovariateTerm::Constant) constant = true;
    }
  }
  if (has_constant) *has_constant = constant;
  return cols;
}

VectorXd floor_variance(VectorXd v, double floor_value, bool* floored) {
  for (Index i = 0; i < v.size(); ++i)
    if (!(v(i) > 0.0) && !std::isnan(v(i))) {
      v(i) = floor_value;
      if (floored) *floored = true;
    }
  return v;
}

}  // namespace

double rho_formula(double C, double T, bool cointegrated) {
  const double c = cointegrated ? 1.0 : 0.5;
  return C * std::pow(std::log(T), c) / std::sqrt(T);
}

double compute_rho(const ScMatrices& m, const FitResult& fit, RhoConstant choice, bool cointegrated) {
  const double su = sample_sd(fit.u_hat);
  double sb_min = std::numeric_limits<double>::infinity();
  double sb_max = 0.0;
  double cov_max = 0.0;
  for (Index j = 0; j < m.B.cols(); ++j) {
    const double sb = sample_sd(m.B.col(j));
    if (!(sb > 0.0))
      throw Error(ErrorCode::ZeroDonorVariance, kModule, "donor '" + m.donors[static_cast<std::size_t>(j)] +
                                                             "' has zero variance in the pre-treatment features");
    sb_min = std::min(sb_min, sb);
    sb_max = std::max(sb_max, sb);
    cov_max = std::max(cov_max, std::abs(sample_cov(m.B.col(j), fit.u_hat)));
  }
  double C = 0.0;
  switch (choice) {
    case RhoConstant::C1: C = su / sb_min; break;
    case RhoConstant::C2: C = sb_max * su / (sb_min * sb_min); break;
    case RhoConstant::C3: C = cov_max / (sb_min * sb_min); break;
  }
  return rho_formula(C, static_cast<double>(m.T0 * m.M), cointegrated);
}

VectorXd regularized_weights(const VectorXd& w, double rho) {
  VectorXd out = w;
  for (Index j = 0; j < w.size(); ++j)
    if (!(w(j) > rho)) out(j) = 0.0;
  return out;
}

MatrixXd build_b_star(const ScMatrices& m, const std::vector<std::size_t>& selected) {
  const auto T0 = static_cast<Index>(m.T0);
  const auto k = static_cast<Index>(selected.size());
  MatrixXd out = MatrixXd::Zero(T0 * static_cast<Index>(m.M), k * static_cast<Index>(m.M));
  for (std::size_t l = 0; l < m.M; ++l) {
    const auto r0 = static_cast<Index>(m.block_begin(l));
    MatrixXd blk(T0, k);
    for (Index i = 0; i < k; ++i) blk.col(i) = m.B.block(r0, static_cast<Index>(selected[static_cast<std::size_t>(i)]), T0, 1);
    if (m.cointegrated) blk = first_difference(blk);
    out.block(r0, static_cast<Index>(l) * k, T0, k) = blk;
  }
  return out;
}

VectorXd leverage(const MatrixXd& Z, const VectorXd& V) {
  const MatrixXd ZV = V.asDiagonal() * Z;
  const MatrixXd Q = Z.transpose() * ZV;
  Eigen::CompleteOrthogonalDecomposition<MatrixXd> cod(Q);
  const MatrixXd Qp = cod.pseudoInverse();
  VectorXd lev(Z.rows());
  for (Index i = 0; i < Z.rows(); ++i) lev(i) = Z.row(i) * Qp * ZV.row(i).transpose();
  return lev;
}

VectorXd variance_correction(VarianceCorrection type, const VectorXd& lev, double df, Diagnostics* diag) {
  const Index n = lev.size();
  const auto nd = static_cast<double>(n);
  VectorXd vc = VectorXd::Ones(n);
  if (type == VarianceCorrection::HC0) return vc;
  if (type == VarianceCorrection::HC1) {
    if (nd - df > 0.0) {
      vc.setConstant(nd / (nd - df));
    } else if (diag) {
      diag->warn("HC1 correction undefined (df >= T0*M); using vc = 1");
    }
    return vc;
  }
  std::size_t capped = 0;
  for (Index i = 0; i < n; ++i) {
    const double h = lev(i);
    if (h >= 1.0 - 1e-10) {
      ++capped;
      continue;
    }
    switch (type) {
      case VarianceCorrection::HC2: vc(i) = 1.0 / (1.0 - h); break;
      case VarianceCorrection::HC3: vc(i) = 1.0 / ((1.0 - h) * (1.0 - h)); break;
      case VarianceCorrection::HC4: {
        const double delta = df > 0.0 ? std::min(4.0, nd * h / df) : 4.0;
        vc(i) = std::pow(1.0 - h, -delta);
        break;
      }
      default: break;
    }
  }
  if (capped > 0 && diag)
    diag->warn("LeverageOne: " + std::to_string(capped) + " observation(s) with unit leverage; vc set to 1");
  return vc;
}

void estimate_u_moments(const ScMatrices& m, const FitResult& fit, const UncertaintyConfig& cfg, InSampleModel& model,
                        Diagnostics& diag) {
  const auto n = static_cast<Index>(m.T0 * m.M);
  const auto T0 = static_cast<Index>(m.T0);
  const VectorXd& u = fit.u_hat;

  if (!cfg.u_missp) {
    model.E_u_hat = VectorXd::Zero(n);
    model.D_u.resize(n, 0);
  } else if (cfg.u_design) {
    if (cfg.u_design->rows() != n)
      throw Error(ErrorCode::InvalidConfig, kModule, "u_design must have T0*M = " + std::to_string(n) + " rows");
    model.D_u = *cfg.u_design;
  } else if (cfg.u_order == 0 && cfg.u_lags == 0) {
    model.E_u_hat.resize(n);
    for (std::size_t l = 0; l < m.M; ++l) {
      const auto r0 = static_cast<Index>(m.block_begin(l));
      model.E_u_hat.segment(r0, T0).setConstant(u.segment(r0, T0).mean());
    }
    model.D_u = MatrixXd::Zero(n, static_cast<Index>(m.M));
    for (std::size_t l = 0; l < m.M; ++l)
      model.D_u.block(static_cast<Index>(m.block_begin(l)), static_cast<Index>(l), T0, 1).setOnes();
  } else {
    const auto k = static_cast<Index>(model.selected.size());
    std::vector<MatrixXd> blocks;
    Index width = 0;
    for (std::size_t l = 0; l < m.M; ++l) {
      const MatrixXd Bl = model.B_star.block(static_cast<Index>(m.block_begin(l)), static_cast<Index>(l) * k, T0, k);
      blocks.push_back(expand(Bl, cfg.u_order, cfg.u_lags));
      width += blocks.back().cols();
    }
    MatrixXd Dx = MatrixXd::Zero(n, width);
    Index c = 0;
    for (std::size_t l = 0; l < m.M; ++l) {
      Dx.block(static_cast<Index>(m.block_begin(l)), c, T0, blocks[l].cols()) = blocks[l];
      c += blocks[l].cols();
    }
    std::vector<MatrixXd> parts{Dx, m.C};
    // Intercept for every feature block that has no constant among its covariates.
    MatrixXd icpt(n, 0);
    for (std::size_t l = 0; l < m.M; ++l) {
      bool has_constant = false;
      feature_c_columns(m, l, &has_constant);
      if (has_constant) continue;
      icpt.conservativeResize(n, icpt.cols() + 1);
      icpt.col(icpt.cols() - 1).setZero();
      icpt.block(static_cast<Index>(m.block_begin(l)), icpt.cols() - 1, T0, 1).setOnes();
    }
    parts.push_back(icpt);
    model.D_u = hcat(parts, n);
  }

  if (cfg.u_missp && model.E_u_hat.size() != n) {
    bool deficient = false;
    const VectorXd coef = least_squares(model.D_u, u, &deficient);
    if (deficient) diag.warn("SingularDesign: residual design D_u is rank deficient; minimum-norm fit used");
    model.E_u_hat = model.D_u * coef;
  }

  const MatrixXd Z = m.Z();
  const VectorXd lev = leverage(Z, m.V);
  model.vc = variance_correction(cfg.u_sigma, lev, fit.df_hat, &diag);
  model.V_u_hat = model.vc.cwiseProduct((u - model.E_u_hat).array().square().matrix());
}

OosDesign build_e_design(const ScMatrices& m, const UncertaintyConfig& cfg, const std::vector<std::size_t>& selected) {
  const auto T0 = static_cast<Index>(m.T0);
  const auto T1 = static_cast<Index>(m.T1);
  OosDesign d;
  if (cfg.e_design) {
    if (cfg.e_design->rows() != T0 + T1)
      throw Error(ErrorCode::InvalidConfig, kModule, "e_design must have T0 + T1 = " + std::to_string(T0 + T1) + " rows");
    d.pre = cfg.e_design->topRows(T0);
    d.post = cfg.e_design->bottomRows(T1);
    return d;
  }
  if (cfg.e_order == 0 && cfg.e_lags == 0) {
    d.mean_only = true;
    d.pre = MatrixXd::Ones(T0, 1);
    d.post = MatrixXd::Ones(T1, 1);
    return d;
  }
  const MatrixXd& series = m.donor_series[0];
  MatrixXd X(T0 + T1, static_cast<Index>(selected.size()));
  for (std::size_t i = 0; i < selected.size(); ++i) X.col(static_cast<Index>(i)) = series.col(static_cast<Index>(selected[i]));
  if (m.cointegrated) X = first_difference(X);
  const MatrixXd Xe = expand(X, cfg.e_order, cfg.e_lags);

  bool has_constant = false;
  const std::vector<Index> ccols = feature_c_columns(m, 0, &has_constant);
  const auto kc = static_cast<Index>(ccols.size());
  MatrixXd Cfull(T0 + T1, kc + (has_constant ? 0 : 1));
  for (Index i = 0; i < kc; ++i) {
    const Index c = ccols[static_cast<std::size_t>(i)];
    Cfull.block(0, i, T0, 1) = m.C.block(0, c, T0, 1);
    Cfull.block(T0, i, T1, 1) = m.P.col(static_cast<Index>(m.J) + c);
  }
  if (!has_constant) Cfull.col(kc).setOnes();
  const MatrixXd full = hcat({Xe, Cfull}, T0 + T1);
  d.pre = full.topRows(T0);
  d.post = full.bottomRows(T1);
  return d;
}

double gaussian_half_width(double sigma2, double alpha, std::size_t L) {
  return std::sqrt(2.0 * std::max(sigma2, 0.0) * std::log(2.0 * static_cast<double>(L) / alpha));
}

VectorXd quantile_regression(const MatrixXd& X, const VectorXd& y, double q, int max_iter) {
  VectorXd b = least_squares(X, y);
  VectorXd r = y - X * b;
  const double scale = std::max(r.cwiseAbs().mean(), y.cwiseAbs().mean());
  const double eps = 1e-6 * (scale > 0.0 ? scale : 1.0);
  for (int it = 0; it < max_iter; ++it) {
    VectorXd wts(y.size());
    for (Index i = 0; i < y.size(); ++i) wts(i) = (r(i) > 0.0 ? q : 1.0 - q) / std::max(std::abs(r(i)), eps);
    const VectorXd nb = weighted_least_squares(X, y, wts);
    const double change = (nb - b).norm();
    b = nb;
    r = y - X * b;
    if (change <= 1e-12 * (1.0 + b.norm())) break;
  }
  return b;
}

OutOfSampleBounds out_of_sample_bounds(const VectorXd& e, const OosDesign& design, OosMethod method, double alpha,
                                       bool joint, std::size_t L, Diagnostics& diag) {
  const Index T1 = design.post.rows();
  OutOfSampleBounds out;
  out.joint = joint;
  out.L = joint ? std::max<std::size_t>(L, 1) : 1;
  out.alpha = alpha;
  out.M2_L.resize(T1);
  out.M2_U.resize(T1);
  out.sigma_H = VectorXd::Constant(T1, kNaN);

  const double uncond_var = sample_variance(e);
  VectorXd E_pre, var_pre, var_post;
  if (design.mean_only) {
    E_pre = VectorXd::Constant(e.size(), e.mean());
    out.E_hat = VectorXd::Constant(T1, e.mean());
    var_pre = VectorXd::Constant(e.size(), uncond_var);
    var_post = VectorXd::Constant(T1, uncond_var);
  } else {
    bool deficient = false;
    const VectorXd mcoef = least_squares(design.pre, e, &deficient);
    if (deficient) diag.warn("SingularDesign: out-of-sample design D_e is rank deficient; minimum-norm fit used");
    E_pre = design.pre * mcoef;
    out.E_hat = design.post * mcoef;
    const VectorXd r2 = (e - E_pre).array().square().matrix();
    const VectorXd vcoef = least_squares(design.pre, r2);
    bool floored = false;
    var_pre = floor_variance(design.pre * vcoef, uncond_var, &floored);
    var_post = floor_variance(design.post * vcoef, uncond_var, &floored);
    if (floored) diag.warn("NegativeVarianceFit: nonpositive fitted variance floored at the unconditional variance");
  }

  switch (method) {
    case OosMethod::Gaussian: {
      for (Index t = 0; t < T1; ++t) {
        const double hw = gaussian_half_width(var_post(t), alpha, out.L);
        out.sigma_H(t) = std::sqrt(var_post(t));
        out.M2_L(t) = out.E_hat(t) - hw;
        out.M2_U(t) = out.E_hat(t) + hw;
      }
      break;
    }
    case OosMethod::Ls: {
      const double a = alpha / static_cast<double>(out.L);
      std::vector<double> z(static_cast<std::size_t>(e.size()));
      for (Index i = 0; i < e.size(); ++i) {
        const double sd = std::sqrt(std::max(var_pre(i), 0.0));
        z[static_cast<std::size_t>(i)] = sd > 0.0 ? (e(i) - E_pre(i)) / sd : 0.0;
      }
      const double qlo = quantile(z, a / 2.0);
      const double qhi = quantile(z, 1.0 - a / 2.0);
      for (Index t = 0; t < T1; ++t) {
        const double sd = std::sqrt(std::max(var_post(t), 0.0));
        out.sigma_H(t) = sd;
        out.M2_L(t) = out.E_hat(t) + sd * qlo;
        out.M2_U(t) = out.E_hat(t) + sd * qhi;
      }
      break;
    }
    case OosMethod::Qreg: {
      const double a = alpha / static_cast<double>(out.L);
      const VectorXd blo = quantile_regression(design.pre, e, a / 2.0);
      const VectorXd bhi = quantile_regression(design.pre, e, 1.0 - a / 2.0);
      out.M2_L = design.post * blo;
      out.M2_U = design.post * bhi;
      std::size_t crossed = 0;
      for (Index t = 0; t < T1; ++t)
        if (out.M2_U(t) < out.M2_L(t)) {
          std::swap(out.M2_L(t), out.M2_U(t));
          ++crossed;
        }
      if (crossed > 0) diag.warn("QregCrossing: fitted quantiles crossed at " + std::to_string(crossed) + " period(s); swapped");
      break;
    }
  }
  return out;
}

}  // namespace scpi
