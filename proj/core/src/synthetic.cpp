#include "scpi/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <ostream>
#include <random>
#include <string>
#include <vector>

namespace scpi {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

SyntheticPanel simulate_factor_panel(const FactorDgp& dgp, std::uint64_t seed) {
  const auto J = static_cast<Index>(dgp.J);
  const auto T = static_cast<Index>(dgp.T0 + dgp.T1);
  const auto T0 = static_cast<Index>(dgp.T0);
  std::mt19937_64 eng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> unif(0.5, 1.5);

  SyntheticPanel out;
  if (dgp.w0) {
    out.w0 = *dgp.w0;
  } else {
    out.w0 = VectorXd::Zero(J);
    const Index k = std::min<Index>(3, J);
    out.w0.head(k).setConstant(1.0 / static_cast<double>(k));
  }
  out.tau = dgp.tau ? *dgp.tau : VectorXd::Zero(static_cast<Index>(dgp.T1));

  VectorXd f(T);
  double prev = normal(eng) / std::sqrt(1.0 - dgp.factor_ar * dgp.factor_ar);
  for (Index t = 0; t < T; ++t) {
    prev = dgp.factor_ar * prev + normal(eng);
    f(t) = prev;
  }
  MatrixXd Y(T, J + 1);
  for (Index j = 0; j < J; ++j) {
    const double mu = 2.0 * normal(eng);
    const double lambda = unif(eng);
    for (Index t = 0; t < T; ++t) Y(t, j + 1) = mu + lambda * f(t) + dgp.donor_noise * normal(eng);
  }
  for (Index t = 0; t < T; ++t) Y(t, 0) = Y.row(t).tail(J).dot(out.w0) + dgp.treated_noise * normal(eng);
  out.y0_post = Y.col(0).tail(T - T0);
  Y.col(0).tail(T - T0) += out.tau;

  PanelData& p = out.panel;
  p.treated = "treated";
  for (Index j = 0; j < J; ++j) p.donors.push_back("donor" + std::to_string(j + 1));
  p.features = {"y"};
  for (Index t = 0; t < T; ++t) (t < T0 ? p.pre : p.post).push_back(static_cast<long>(t + 1));
  p.values = {Y};
  return out;
}

void write_panel_csv(const PanelData& panel, std::ostream& out) {
  out << "unit,time";
  for (const auto& f : panel.features) out << ',' << f;
  out << '\n' << std::setprecision(17);
  std::vector<long> periods = panel.pre;
  periods.insert(periods.end(), panel.post.begin(), panel.post.end());
  auto unit_rows = [&](const std::string& name, Index col) {
    for (std::size_t t = 0; t < periods.size(); ++t) {
      out << name << ',' << periods[t];
      for (const auto& v : panel.values) out << ',' << v(static_cast<Index>(t), col);
      out << '\n';
    }
  };
  unit_rows(panel.treated, 0);
  for (std::size_t j = 0; j < panel.donors.size(); ++j) unit_rows(panel.donors[j], static_cast<Index>(j + 1));
}

}  // namespace scpi
