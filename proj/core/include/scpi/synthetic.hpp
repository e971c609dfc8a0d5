#pragma once

#include "scpi/panel.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <iosfwd>
#include <optional>

namespace scpi {

/// Linear factor model for demo data and Monte Carlo checks.
///
/// Donors: Y_jt = mu_j + lambda_j f_t + eps_jt, f an AR(1) factor.
/// Treated: Y_1t(0) = sum_j w0_j Y_jt + u_t, and Y_1t(1) = Y_1t(0) + tau_t after treatment.
struct FactorDgp {
  std::size_t J = 8;
  std::size_t T0 = 100;
  std::size_t T1 = 5;
  double factor_ar = 0.5;
  double donor_noise = 1.0;
  double treated_noise = 0.5;
  /// Defaults to equal weight on the first three donors.
  std::optional<Eigen::VectorXd> w0;
  /// Defaults to zero effects.
  std::optional<Eigen::VectorXd> tau;
};

struct SyntheticPanel {
  PanelData panel;
  Eigen::VectorXd w0;
  Eigen::VectorXd tau;
  /// Untreated potential outcome of the treated unit after treatment.
  Eigen::VectorXd y0_post;
};

SyntheticPanel simulate_factor_panel(const FactorDgp& dgp, std::uint64_t seed);

/// Long-format CSV with columns unit,time,y. Periods are 1..T0+T1.
void write_panel_csv(const PanelData& panel, std::ostream& out);

}  // namespace scpi
