#include "scpi/uncertainty.hpp"

#include "scpi/linalg.hpp"

#include <Eigen/Eigenvalues>

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

std::string lower(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return s;
}

const Bounds& pick(const std::vector<Bounds>& b, std::size_t t) { return b.size() == 1 ? b.front() : b[t]; }

void check_override(const std::optional<std::vector<Bounds>>& b, std::size_t T1, const char* what) {
  if (b && b->size() != 1 && b->size() != T1)
    throw Error(ErrorCode::MissingBounds, kModule,
                std::string(what) + " must hold one pair or one pair per post period (" + std::to_string(T1) + ")");
}

}  // namespace

std::string to_string(VarianceCorrection vc) {
  switch (vc) {
    case VarianceCorrection::HC0: return "HC0";
    case VarianceCorrection::HC1: return "HC1";
    case VarianceCorrection::HC2: return "HC2";
    case VarianceCorrection::HC3: return "HC3";
    case VarianceCorrection::HC4: return "HC4";
  }
  return "?";
}

std::string to_string(OosMethod m) {
  switch (m) {
    case OosMethod::Gaussian: return "gaussian";
    case OosMethod::Ls: return "ls";
    case OosMethod::Qreg: return "qreg";
  }
  return "?";
}

std::string to_string(RhoConstant c) {
  switch (c) {
    case RhoConstant::C1: return "C1";
    case RhoConstant::C2: return "C2";
    case RhoConstant::C3: return "C3";
  }
  return "?";
}

VarianceCorrection parse_variance_correction(const std::string& s) {
  const std::string v = lower(s);
  if (v == "hc0") return VarianceCorrection::HC0;
  if (v == "hc1") return VarianceCorrection::HC1;
  if (v == "hc2") return VarianceCorrection::HC2;
  if (v == "hc3") return VarianceCorrection::HC3;
  if (v == "hc4") return VarianceCorrection::HC4;
  throw Error(ErrorCode::InvalidConfig, kModule, "unknown u_sigma '" + s + "' (HC0..HC4)");
}

OosMethod parse_oos_method(const std::string& s) {
  const std::string v = lower(s);
  if (v == "gaussian") return OosMethod::Gaussian;
  if (v == "ls") return OosMethod::Ls;
  if (v == "qreg") return OosMethod::Qreg;
  throw Error(ErrorCode::InvalidConfig, kModule, "unknown e_method '" + s + "' (gaussian, ls, qreg)");
}

RhoConstant parse_rho_constant(const std::string& s) {
  const std::string v = lower(s);
  if (v == "c1" || v == "type-1") return RhoConstant::C1;
  if (v == "c2" || v == "type-2") return RhoConstant::C2;
  if (v == "c3" || v == "type-3") return RhoConstant::C3;
  throw Error(ErrorCode::InvalidConfig, kModule, "unknown rho constant '" + s + "' (C1, C2, C3)");
}

void UncertaintyConfig::validate(std::size_t T1) const {
  auto fail = [](const std::string& msg) { throw Error(ErrorCode::InvalidConfig, kModule, msg); };
  if (!(u_alpha > 0.0 && u_alpha < 1.0)) fail("u_alpha must lie in (0, 1)");
  if (!(e_alpha > 0.0 && e_alpha < 1.0)) fail("e_alpha must lie in (0, 1)");
  if (sims < 2) fail("sims must be at least 2");
  if (u_order < 0 || u_lags < 0 || e_order < 0 || e_lags < 0) fail("orders and lags must be nonnegative");
  if (cores < 1) fail("cores must be at least 1");
  if (rho && !(*rho >= 0.0 && std::isfinite(*rho))) fail("rho must be a finite nonnegative number");
  if (L && (*L < 1 || *L > T1)) fail("L must lie in [1, T1]");
  for (double k : sens_scales)
    if (!(k >= 0.0 && std::isfinite(k))) fail("sensitivity scales must be finite and nonnegative");
  check_override(w_bounds, T1, "w_bounds");
  check_override(e_bounds, T1, "e_bounds");
}

DeltaStar build_delta_star(const ConstraintSystem& cs, const VectorXd& beta_hat, double rho) {
  DeltaStar ds;
  ds.system = cs;
  for (auto& t : ds.system.eq) t.bound += t.eval(beta_hat, cs.J);
  for (std::size_t j = 0; j < cs.in.size(); ++j) {
    auto& t = ds.system.in[j];
    const double rj = t.gradient(beta_hat, cs.J).lpNorm<1>() * rho;
    const double mj = t.eval(beta_hat, cs.J);
    const bool binding = mj > -rj;
    ds.rho_j.push_back(rj);
    ds.binding.push_back(binding);
    if (binding) t.bound += mj;
  }
  return ds;
}

InSampleModel build_in_sample_model(const ScMatrices& m, const FitResult& fit, const UncertaintyConfig& cfg,
                                    Diagnostics& diag) {
  InSampleModel model;
  model.rho = cfg.rho ? *cfg.rho : compute_rho(m, fit, cfg.rho_constant, m.cointegrated);
  model.delta_star = build_delta_star(fit.system, fit.beta_hat, model.rho);
  model.rho_j = model.delta_star.rho_j;
  model.binding = model.delta_star.binding;

  model.w_star = regularized_weights(fit.w_hat, model.rho);
  for (Index j = 0; j < model.w_star.size(); ++j)
    if (model.w_star(j) != 0.0) model.selected.push_back(static_cast<std::size_t>(j));
  model.B_star = build_b_star(m, model.selected);
  estimate_u_moments(m, fit, cfg, model, diag);

  const MatrixXd Z = m.Z();
  const MatrixXd VZ = m.V.asDiagonal() * Z;
  model.Sigma_hat = VZ.transpose() * model.V_u_hat.asDiagonal() * VZ;
  model.Sigma_hat = 0.5 * (model.Sigma_hat + model.Sigma_hat.transpose());
  model.Qhat = Z.transpose() * VZ;
  model.Qhat = 0.5 * (model.Qhat + model.Qhat.transpose());
  model.D = VectorXd::Ones(Z.cols());

  Eigen::SelfAdjointEigenSolver<MatrixXd> es(model.Sigma_hat, Eigen::EigenvaluesOnly);
  const double lmax = es.eigenvalues().maxCoeff();
  model.sigma_min_eig_ratio = lmax > 0.0 ? es.eigenvalues().minCoeff() / lmax : 0.0;
  if (model.sigma_min_eig_ratio < -1e-10) diag.warn("Sigma_hat is indefinite; negative eigenvalues floored at 0");
  return model;
}

std::vector<PeriodInterval> assemble_intervals(const ScMatrices& m, const FitResult& fit, const VectorXd& M1_L,
                                               const VectorXd& M1_U, const VectorXd& M2_L, const VectorXd& M2_U,
                                               const std::optional<std::vector<Bounds>>& w_bounds,
                                               const std::optional<std::vector<Bounds>>& e_bounds) {
  const std::size_t T1 = m.T1;
  check_override(w_bounds, T1, "w_bounds");
  check_override(e_bounds, T1, "e_bounds");
  if (!w_bounds && (static_cast<std::size_t>(M1_L.size()) != T1 || static_cast<std::size_t>(M1_U.size()) != T1))
    throw Error(ErrorCode::MissingBounds, kModule, "in-sample bounds missing for some post periods");
  if (!e_bounds && (static_cast<std::size_t>(M2_L.size()) != T1 || static_cast<std::size_t>(M2_U.size()) != T1))
    throw Error(ErrorCode::MissingBounds, kModule, "out-of-sample bounds missing for some post periods");

  std::vector<PeriodInterval> out(T1);
  for (std::size_t t = 0; t < T1; ++t) {
    const auto ti = static_cast<Index>(t);
    PeriodInterval& p = out[t];
    p.period = m.post_periods[t];
    p.available = m.prediction_available[t];
    p.tau_hat = fit.tau_hat(ti);
    p.Y0_hat = fit.Y0_hat(ti);
    p.y_post = m.y_post(ti);
    p.M1_L = w_bounds ? pick(*w_bounds, t).lower : M1_L(ti);
    p.M1_U = w_bounds ? pick(*w_bounds, t).upper : M1_U(ti);
    p.M2_L = e_bounds ? pick(*e_bounds, t).lower : M2_L(ti);
    p.M2_U = e_bounds ? pick(*e_bounds, t).upper : M2_U(ti);
    if (!p.available) {
      p.M1_L = p.M1_U = p.M2_L = p.M2_U = kNaN;
    }
    p.lower = p.tau_hat + p.M1_L - p.M2_U;
    p.upper = p.tau_hat + p.M1_U - p.M2_L;
    p.y0_lower = p.Y0_hat - p.M1_U + p.M2_L;
    p.y0_upper = p.Y0_hat - p.M1_L + p.M2_U;
  }
  return out;
}

std::vector<SensitivityRow> sensitivity_analysis(const OutOfSampleBounds& base, const std::vector<double>& scales,
                                                 const std::vector<PeriodInterval>& intervals) {
  std::vector<SensitivityRow> rows;
  for (std::size_t t = 0; t < intervals.size(); ++t) {
    const PeriodInterval& p = intervals[t];
    if (!p.available) continue;
    const auto ti = static_cast<Index>(t);
    const double sigma = base.sigma_H(ti);
    for (double kappa : scales) {
      SensitivityRow r;
      r.period = p.period;
      r.kappa = kappa;
      r.sigma_H = kappa * sigma;
      const double hw = gaussian_half_width(r.sigma_H * r.sigma_H, base.alpha, base.L);
      r.M2_L = base.E_hat(ti) - hw;
      r.M2_U = base.E_hat(ti) + hw;
      r.lower = p.tau_hat + p.M1_L - r.M2_U;
      r.upper = p.tau_hat + p.M1_U - r.M2_L;
      rows.push_back(r);
    }
  }
  return rows;
}

UncertaintyResult scpi(const ScMatrices& m, const FitResult& fit, const UncertaintyConfig& cfg) {
  cfg.validate(m.T1);
  UncertaintyResult res;
  Diagnostics& diag = res.diag;
  const auto T0 = static_cast<Index>(m.T0);
  const auto T1 = static_cast<Index>(m.T1);

  res.model = build_in_sample_model(m, fit, cfg, diag);
  diag.note("scaling matrix D = identity");

  if (cfg.w_bounds) {
    res.in_sample.M1_L = VectorXd::Constant(T1, kNaN);
    res.in_sample.M1_U = VectorXd::Constant(T1, kNaN);
    diag.note("in-sample bounds supplied by the user; simulation skipped");
  } else {
    res.in_sample = in_sample_bounds(m, fit, cfg, res.model, diag);
  }

  const VectorXd e = fit.u_hat.head(T0);
  const OosDesign design = build_e_design(m, cfg, res.model.selected);
  res.out_of_sample = out_of_sample_bounds(e, design, cfg.e_method, cfg.e_alpha, false, 1, diag);
  res.intervals = assemble_intervals(m, fit, res.in_sample.M1_L, res.in_sample.M1_U, res.out_of_sample.M2_L,
                                     res.out_of_sample.M2_U, cfg.w_bounds, cfg.e_bounds);

  if (cfg.joint) {
    const std::size_t L = cfg.L.value_or(m.T1);
    res.out_of_sample_joint = out_of_sample_bounds(e, design, cfg.e_method, cfg.e_alpha, true, L, diag);
    VectorXd jl = VectorXd::Constant(T1, kNaN), ju = VectorXd::Constant(T1, kNaN);
    if (res.in_sample.joint) {
      jl.head(static_cast<Index>(L)).setConstant(res.in_sample.joint->lower);
      ju.head(static_cast<Index>(L)).setConstant(res.in_sample.joint->upper);
    }
    std::optional<std::vector<Bounds>> e_override = cfg.e_bounds;
    auto rows = assemble_intervals(m, fit, jl, ju, res.out_of_sample_joint->M2_L, res.out_of_sample_joint->M2_U,
                                   cfg.w_bounds, e_override);
    rows.resize(L);
    res.joint_intervals = std::move(rows);
  }

  if (!cfg.sens_scales.empty()) {
    const OutOfSampleBounds base =
        cfg.e_method == OosMethod::Gaussian
            ? res.out_of_sample
            : out_of_sample_bounds(e, design, OosMethod::Gaussian, cfg.e_alpha, false, 1, diag);
    if (cfg.e_method != OosMethod::Gaussian) diag.note("sensitivity analysis uses gaussian out-of-sample bounds");
    res.sensitivity = sensitivity_analysis(base, cfg.sens_scales, res.intervals);
  }

  res.coverage = 1.0 - cfg.u_alpha - cfg.e_alpha;
  return res;
}

}  // namespace scpi
