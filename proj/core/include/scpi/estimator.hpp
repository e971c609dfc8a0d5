#pragma once

#include "scpi/conic.hpp"
#include "scpi/constraints.hpp"
#include "scpi/errors.hpp"
#include "scpi/panel.hpp"

#include <Eigen/Dense>

#include <optional>
#include <string>
#include <vector>

namespace scpi {

/// Absolute threshold below which a fitted weight counts as zero.
inline constexpr double kWeightZeroTol = 1e-8;

struct FitResult {
  ConstraintSpec spec;  // with tuning values resolved
  ConstraintSystem system;

  Eigen::VectorXd w_hat;
  Eigen::VectorXd r_hat;
  Eigen::VectorXd beta_hat;
  Eigen::VectorXd u_hat;   // A - B w - C r
  Eigen::VectorXd A_hat;   // B w + C r
  Eigen::VectorXd Y0_hat;  // P beta, NaN where a donor is missing
  Eigen::VectorXd tau_hat; // y_post - Y0_hat, NaN where unavailable
  double objective = 0.0;
  double df_hat = 0.0;
  std::optional<double> Q_used;
  std::optional<double> Q2_used;
  /// Donors with |w_j| above kWeightZeroTol.
  std::vector<std::size_t> active_set;
  /// Multiplier of the ridge Lagrangian recovered from the fit (ridge-type sets only).
  std::optional<double> ridge_lambda;

  KktResiduals kkt;
  int iterations = 0;
  Diagnostics diag;
};

struct TuningResult {
  std::optional<double> Q;
  std::optional<double> Q2;
  /// Ridge rule: the per-feature sizes Q_l before taking the minimum.
  std::vector<double> Q_per_feature;
  std::vector<double> lambda_per_feature;
  Diagnostics diag;
};

/// Ridge rule of thumb: per feature, lambda = J s2 / ||w_ols||^2 and Q_l = ||w_ols|| / (1 + lambda);
/// the tightest Q_l wins.
TuningResult ridge_rule(const ScMatrices& m, const SolverSettings& settings = {});

/// Fills unset Q / Q2 for lasso, ridge and L1-L2 specs. Other specs pass through unchanged.
TuningResult resolve_tuning(const ScMatrices& m, const ConstraintSpec& spec, const SolverSettings& settings = {});

FitResult fit(const ScMatrices& m, const ConstraintSpec& spec, const SolverSettings& settings = {});

/// Multiplier lambda solving lambda w = B'V(A - Bw - Cr) in the least-squares sense.
double recover_ridge_lambda(const ScMatrices& m, const Eigen::VectorXd& beta);

double estimate_df(const FitResult& fit, const ConstraintSpec& spec, const ScMatrices& m,
                   Diagnostics* diag = nullptr);

/// Plain-text report: setup, weights, covariate coefficients, df and tuning.
std::string render_summary(const FitResult& fit, const ScMatrices& m);

}  // namespace scpi
