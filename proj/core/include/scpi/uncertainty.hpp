#pragma once

#include "scpi/conic.hpp"
#include "scpi/constraints.hpp"
#include "scpi/errors.hpp"
#include "scpi/estimator.hpp"
#include "scpi/panel.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace scpi {

enum class VarianceCorrection { HC0, HC1, HC2, HC3, HC4 };
enum class OosMethod { Gaussian, Ls, Qreg };
enum class RhoConstant { C1, C2, C3 };

std::string to_string(VarianceCorrection vc);
std::string to_string(OosMethod m);
std::string to_string(RhoConstant c);
VarianceCorrection parse_variance_correction(const std::string& s);
OosMethod parse_oos_method(const std::string& s);
RhoConstant parse_rho_constant(const std::string& s);

struct Bounds {
  double lower = 0.0;
  double upper = 0.0;
};

struct UncertaintyConfig {
  bool u_missp = true;
  int u_order = 1;
  int u_lags = 0;
  /// Replaces the generated residual design; T0*M rows.
  std::optional<Eigen::MatrixXd> u_design;
  VarianceCorrection u_sigma = VarianceCorrection::HC1;
  double u_alpha = 0.05;

  OosMethod e_method = OosMethod::Gaussian;
  int e_order = 1;
  int e_lags = 0;
  /// Replaces the generated out-of-sample design; T0 + T1 rows (pre rows first).
  std::optional<Eigen::MatrixXd> e_design;
  double e_alpha = 0.05;

  std::size_t sims = 1000;
  std::optional<double> rho;
  RhoConstant rho_constant = RhoConstant::C1;
  unsigned cores = 1;
  std::uint64_t seed = 8894;

  /// Manual in-sample / out-of-sample bounds: one pair for all periods or one per post period.
  std::optional<std::vector<Bounds>> w_bounds;
  std::optional<std::vector<Bounds>> e_bounds;

  std::vector<double> sens_scales;
  bool joint = false;
  /// Joint horizon; all post periods when unset.
  std::optional<std::size_t> L;
  /// Widen per-period in-sample bounds for nonlinear constraints (always done in joint mode).
  bool eps_per_period = false;

  SolverSettings solver;

  /// Throws InvalidConfig on out-of-range values.
  void validate(std::size_t T1) const;
};

/// Localized constraint set used in simulation, expressed over beta with delta = beta - beta_hat.
struct DeltaStar {
  ConstraintSystem system;
  std::vector<double> rho_j;
  std::vector<bool> binding;
};

struct InSampleModel {
  double rho = 0.0;
  std::vector<double> rho_j;
  std::vector<bool> binding;
  Eigen::VectorXd w_star;
  /// Donors kept in the residual design (nonzero regularized weight).
  std::vector<std::size_t> selected;
  Eigen::MatrixXd B_star;  // T0*M x (M * |selected|), block diagonal
  Eigen::MatrixXd D_u;
  Eigen::VectorXd E_u_hat;
  Eigen::VectorXd vc;
  Eigen::VectorXd V_u_hat;  // diagonal
  Eigen::MatrixXd Sigma_hat;
  Eigen::MatrixXd Qhat;
  Eigen::VectorXd D;  // diagonal scaling (identity)
  DeltaStar delta_star;
  double sigma_min_eig_ratio = 0.0;
};

struct InSampleBounds {
  /// Per post period; NaN where the prediction is unavailable.
  Eigen::VectorXd M1_L;
  Eigen::VectorXd M1_U;
  /// Envelope over the first L periods (joint mode only).
  std::optional<Bounds> joint;
  std::size_t L = 0;
  /// Widening applied per period (zero for linear constraint sets).
  Eigen::VectorXd eps;
  std::size_t draws = 0;
  std::size_t failed_draws = 0;
  std::size_t unbounded_solves = 0;
};

struct OutOfSampleBounds {
  Eigen::VectorXd M2_L;
  Eigen::VectorXd M2_U;
  Eigen::VectorXd E_hat;    // conditional mean at each post period
  Eigen::VectorXd sigma_H;  // conditional scale (gaussian / ls); NaN for qreg
  double alpha = 0.05;      // level actually used per period
  bool joint = false;
  std::size_t L = 1;
};

struct PeriodInterval {
  long period = 0;
  bool available = true;
  double tau_hat = 0.0;
  double Y0_hat = 0.0;
  double y_post = 0.0;
  double M1_L = 0.0, M1_U = 0.0, M2_L = 0.0, M2_U = 0.0;
  /// Interval for tau.
  double lower = 0.0, upper = 0.0;
  /// Interval for the counterfactual Y(0).
  double y0_lower = 0.0, y0_upper = 0.0;
};

struct SensitivityRow {
  long period = 0;
  double kappa = 1.0;
  double sigma_H = 0.0;
  double M2_L = 0.0, M2_U = 0.0;
  double lower = 0.0, upper = 0.0;
};

struct UncertaintyResult {
  InSampleModel model;
  InSampleBounds in_sample;
  OutOfSampleBounds out_of_sample;
  std::vector<PeriodInterval> intervals;
  std::optional<OutOfSampleBounds> out_of_sample_joint;
  std::vector<PeriodInterval> joint_intervals;
  std::vector<SensitivityRow> sensitivity;
  double coverage = 0.9;
  Diagnostics diag;
};

/// C * log(T)^c / sqrt(T), c = 1/2 (iid) or 1 (cointegrated).
double rho_formula(double C, double T, bool cointegrated);

double compute_rho(const ScMatrices& m, const FitResult& fit, RhoConstant choice, bool cointegrated);

DeltaStar build_delta_star(const ConstraintSystem& cs, const Eigen::VectorXd& beta_hat, double rho);

/// Regularized weights w_j 1(w_j > rho).
Eigen::VectorXd regularized_weights(const Eigen::VectorXd& w, double rho);

/// Block-diagonal B* from the selected donor columns, first-differenced when cointegrated.
Eigen::MatrixXd build_b_star(const ScMatrices& m, const std::vector<std::size_t>& selected);

/// Leverage diagonal of Z (Z'VZ)^+ Z'V.
Eigen::VectorXd leverage(const Eigen::MatrixXd& Z, const Eigen::VectorXd& V);

/// Variance-correction constants for each stacked residual.
Eigen::VectorXd variance_correction(VarianceCorrection type, const Eigen::VectorXd& lev, double df,
                                    Diagnostics* diag = nullptr);

/// Residual design D_u, conditional mean and variance of u. Fills the matching InSampleModel fields.
void estimate_u_moments(const ScMatrices& m, const FitResult& fit, const UncertaintyConfig& cfg, InSampleModel& model,
                        Diagnostics& diag);

/// Full in-sample model: rho, Delta*, residual moments, Sigma_hat and Qhat.
InSampleModel build_in_sample_model(const ScMatrices& m, const FitResult& fit, const UncertaintyConfig& cfg,
                                    Diagnostics& diag);

/// Simulated in-sample bounds. Results do not depend on cfg.cores: draw s uses its own
/// std::mt19937_64 seeded with std::seed_seq{seed lo, seed hi, s lo, s hi} (32-bit halves)
/// and G = Sigma_hat^{1/2} xi with xi from std::normal_distribution.
InSampleBounds in_sample_bounds(const ScMatrices& m, const FitResult& fit, const UncertaintyConfig& cfg,
                                const InSampleModel& model, Diagnostics& diag);

/// Pre-treatment design for out-of-sample moments plus its post-period rows.
struct OosDesign {
  Eigen::MatrixXd pre;   // T0 rows
  Eigen::MatrixXd post;  // T1 rows
  bool mean_only = false;
};

OosDesign build_e_design(const ScMatrices& m, const UncertaintyConfig& cfg, const std::vector<std::size_t>& selected);

/// Out-of-sample bounds from feature-1 residuals e. In joint mode the level is adjusted for L periods.
OutOfSampleBounds out_of_sample_bounds(const Eigen::VectorXd& e, const OosDesign& design, OosMethod method,
                                       double alpha, bool joint, std::size_t L, Diagnostics& diag);

/// Sub-Gaussian half-width sqrt(2 sigma^2 log(2L/alpha)).
double gaussian_half_width(double sigma2, double alpha, std::size_t L = 1);

/// Linear quantile regression (pinball loss) by iteratively reweighted least squares.
Eigen::VectorXd quantile_regression(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, double q,
                                    int max_iter = 100);

/// Combines point predictions with the two error bounds; overrides replace computed bounds verbatim.
std::vector<PeriodInterval> assemble_intervals(const ScMatrices& m, const FitResult& fit, const Eigen::VectorXd& M1_L,
                                               const Eigen::VectorXd& M1_U, const Eigen::VectorXd& M2_L,
                                               const Eigen::VectorXd& M2_U,
                                               const std::optional<std::vector<Bounds>>& w_bounds = std::nullopt,
                                               const std::optional<std::vector<Bounds>>& e_bounds = std::nullopt);

/// Gaussian out-of-sample bounds with sigma_H scaled by each kappa, reassembled per period.
std::vector<SensitivityRow> sensitivity_analysis(const OutOfSampleBounds& base, const std::vector<double>& scales,
                                                 const std::vector<PeriodInterval>& intervals);

/// Full uncertainty pipeline for one fit.
UncertaintyResult scpi(const ScMatrices& m, const FitResult& fit, const UncertaintyConfig& cfg);

}  // namespace scpi
