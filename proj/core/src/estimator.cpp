#include "scpi/estimator.hpp"

#include "scpi/linalg.hpp"
#include "scpi/qp.hpp"

#include <Eigen/SVD>

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <limits>
#include <sstream>

namespace scpi {
namespace {

constexpr const char* kModule = "estimator";
constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

struct FeatureBlock {
  VectorXd A;
  MatrixXd B;
  MatrixXd C;
  VectorXd V;
};

FeatureBlock feature_block(const ScMatrices& m, std::size_t l) {
  const auto r0 = static_cast<Index>(m.block_begin(l));
  const auto T0 = static_cast<Index>(m.T0);
  FeatureBlock fb;
  fb.A = m.A.segment(r0, T0);
  fb.B = m.B.middleRows(r0, T0);
  fb.V = m.V.segment(r0, T0);
  std::vector<Index> cols;
  for (std::size_t c = 0; c < m.c_columns.size(); ++c)
    if (m.c_columns[c].feature == -1 || m.c_columns[c].feature == static_cast<int>(l))
      cols.push_back(static_cast<Index>(c));
  fb.C.resize(T0, static_cast<Index>(cols.size()));
  for (std::size_t i = 0; i < cols.size(); ++i) fb.C.col(static_cast<Index>(i)) = m.C.block(r0, cols[i], T0, 1);
  return fb;
}

enum class DfRule { Full, Count, CountMinusOne, Ridge };

DfRule df_rule(const ConstraintSpec& spec) {
  switch (spec.p) {
    case Norm::None: return spec.nonnegative() ? DfRule::Count : DfRule::Full;
    case Norm::L1: return spec.dir == Direction::Equal ? DfRule::CountMinusOne : DfRule::Count;
    case Norm::L2: return DfRule::Ridge;
    case Norm::L1L2: return DfRule::CountMinusOne;
  }
  return DfRule::Full;
}

std::string fmt(double v, int digits = 6) {
  std::ostringstream os;
  os << std::setprecision(digits) << v;
  return os.str();
}

}  // namespace

TuningResult ridge_rule(const ScMatrices& m, const SolverSettings& settings) {
  TuningResult tr;
  const std::size_t J = m.J;
  const auto T0 = static_cast<Index>(m.T0);
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t l = 0; l < m.M; ++l) {
    const FeatureBlock fb = feature_block(m, l);
    std::vector<Index> cols;
    if (J <= m.T0) {
      for (std::size_t j = 0; j < J; ++j) cols.push_back(static_cast<Index>(j));
    } else {
      // Too many donors for least squares: keep the columns selected by lasso with Q = 1.
      const ConstraintSystem lasso = materialize(preset(Preset::Lasso, 1.0), J, static_cast<std::size_t>(fb.C.cols()));
      const QpSolution sel = solve_wls(fb.A, fb.B, fb.C, fb.V, lasso, settings);
      for (std::size_t j = 0; j < J; ++j)
        if (std::abs(sel.x(static_cast<Index>(j))) > kWeightZeroTol) cols.push_back(static_cast<Index>(j));
      tr.diag.note("feature '" + m.features[l] + "': ridge rule on " + std::to_string(cols.size()) +
                   " lasso-selected donors");
      if (cols.empty())
        throw Error(ErrorCode::DegenerateOLS, kModule, "lasso selected no donor for feature '" + m.features[l] + "'");
    }
    const auto k = static_cast<Index>(cols.size());
    MatrixXd X(T0, k + fb.C.cols());
    for (Index i = 0; i < k; ++i) X.col(i) = fb.B.col(cols[static_cast<std::size_t>(i)]);
    X.rightCols(fb.C.cols()) = fb.C;
    bool deficient = false;
    const VectorXd coef = weighted_least_squares(X, fb.A, fb.V, &deficient);
    if (deficient) tr.diag.warn("feature '" + m.features[l] + "': least-squares design is rank deficient");
    const VectorXd res = fb.A - X * coef;
    const double ssr = res.dot(fb.V.cwiseProduct(res));
    double dof = static_cast<double>(T0 - X.cols());
    if (dof <= 0.0) {
      tr.diag.warn("feature '" + m.features[l] + "': no residual degrees of freedom; variance uses T0");
      dof = static_cast<double>(T0);
    }
    const double s2 = ssr / dof;
    const double nrm2 = coef.head(k).squaredNorm();
    if (!(nrm2 > 0.0))
      throw Error(ErrorCode::DegenerateOLS, kModule, "least-squares weights are zero for feature '" + m.features[l] + "'");
    const double lambda = static_cast<double>(k) * s2 / nrm2;
    const double Ql = std::sqrt(nrm2) / (1.0 + lambda);
    tr.Q_per_feature.push_back(Ql);
    tr.lambda_per_feature.push_back(lambda);
    best = std::min(best, Ql);
  }
  tr.Q = best;
  return tr;
}

TuningResult resolve_tuning(const ScMatrices& m, const ConstraintSpec& spec, const SolverSettings& settings) {
  TuningResult tr;
  tr.Q = spec.Q;
  tr.Q2 = spec.Q2;
  if (!spec.name) return tr;
  switch (*spec.name) {
    case Preset::Lasso:
      if (!tr.Q) {
        tr.Q = 1.0;
        tr.diag.note("lasso size Q set to the rule-of-thumb value 1");
      }
      break;
    case Preset::Ridge:
      if (!tr.Q) {
        TuningResult rr = ridge_rule(m, settings);
        tr.Q = rr.Q;
        tr.Q_per_feature = rr.Q_per_feature;
        tr.lambda_per_feature = rr.lambda_per_feature;
        tr.diag.merge(rr.diag);
        tr.diag.note("ridge size Q = " + fmt(*tr.Q) + " from the rule of thumb");
      }
      break;
    case Preset::L1L2:
      if (!tr.Q) tr.Q = 1.0;
      if (!tr.Q2) {
        TuningResult rr = ridge_rule(m, settings);
        tr.Q2 = rr.Q;
        tr.Q_per_feature = rr.Q_per_feature;
        tr.lambda_per_feature = rr.lambda_per_feature;
        tr.diag.merge(rr.diag);
        tr.diag.note("L1-L2 size Q2 = " + fmt(*tr.Q2) + " from the ridge rule of thumb");
      }
      break;
    case Preset::Ols:
    case Preset::Simplex: break;
  }
  return tr;
}

double recover_ridge_lambda(const ScMatrices& m, const VectorXd& beta) {
  const auto J = static_cast<Index>(m.J);
  const VectorXd w = beta.head(J);
  const double ww = w.squaredNorm();
  if (!(ww > 0.0)) return 0.0;
  const VectorXd u = m.A - m.B * w - m.C * beta.tail(beta.size() - J);
  const VectorXd g = m.B.transpose() * m.V.cwiseProduct(u);
  return w.dot(g) / ww;
}

double estimate_df(const FitResult& f, const ConstraintSpec& spec, const ScMatrices& m, Diagnostics* diag) {
  const auto KM = static_cast<double>(m.KM());
  const auto J = static_cast<double>(m.J);
  double df = 0.0;
  switch (df_rule(spec)) {
    case DfRule::Full: df = J + KM; break;
    case DfRule::Count: df = static_cast<double>(f.active_set.size()) + KM; break;
    case DfRule::CountMinusOne: df = static_cast<double>(f.active_set.size()) - 1.0 + KM; break;
    case DfRule::Ridge: {
      double lambda = f.ridge_lambda.value_or(recover_ridge_lambda(m, f.beta_hat));
      const double Q = spec.Q.value_or(0.0);
      if (spec.dir == Direction::LessEqual && f.w_hat.norm() < Q * (1.0 - 1e-6)) {
        if (diag) diag->warn("NonBindingRidge: L2 constraint is slack, lambda = 0 used for df");
        lambda = 0.0;
      }
      const MatrixXd Bv = m.V.cwiseSqrt().asDiagonal() * m.B;
      const VectorXd sv = Bv.jacobiSvd().singularValues();
      for (Index j = 0; j < sv.size(); ++j) {
        const double s2 = sv(j) * sv(j);
        if (s2 + lambda > 0.0) df += s2 / (s2 + lambda);
      }
      df += KM;
      break;
    }
  }
  return std::clamp(df, 0.0, J + KM);
}

FitResult fit(const ScMatrices& m, const ConstraintSpec& spec, const SolverSettings& settings) {
  FitResult f;
  TuningResult tr = resolve_tuning(m, spec, settings);
  f.diag.merge(tr.diag);
  f.spec = spec;
  f.spec.Q = tr.Q;
  f.spec.Q2 = tr.Q2;
  f.Q_used = tr.Q;
  f.Q2_used = tr.Q2;
  f.system = materialize(f.spec, m.J, m.KM());
  if (f.spec.p == Norm::L1L2 && f.spec.nonnegative() && f.Q_used && f.Q2_used) {
    // On {w >= 0, sum w = Q} the smallest attainable ||w||_2 is Q / sqrt(J).
    const double floor_l2 = *f.Q_used / std::sqrt(static_cast<double>(m.J));
    if (*f.Q2_used < floor_l2 * (1.0 - 1e-12))
      throw Error(ErrorCode::Infeasible, kModule,
                  "L1-L2 set is empty: Q2 = " + fmt(*f.Q2_used) + " is below Q/sqrt(J) = " + fmt(floor_l2));
  }

  const QpSolution sol = solve_wls(m.A, m.B, m.C, m.V, f.system, settings);
  for (const auto& n : sol.notes) f.diag.note(n);
  f.kkt = sol.kkt;
  f.iterations = sol.iterations;
  f.objective = sol.objective;

  const auto J = static_cast<Index>(m.J);
  f.beta_hat = sol.x;
  f.w_hat = sol.x.head(J);
  f.r_hat = sol.x.tail(sol.x.size() - J);
  f.A_hat = m.B * f.w_hat + m.C * f.r_hat;
  f.u_hat = m.A - f.A_hat;
  for (Index j = 0; j < J; ++j)
    if (std::abs(f.w_hat(j)) > kWeightZeroTol) f.active_set.push_back(static_cast<std::size_t>(j));

  const auto T1 = static_cast<Index>(m.T1);
  f.Y0_hat.resize(T1);
  f.tau_hat.resize(T1);
  for (Index t = 0; t < T1; ++t) {
    f.Y0_hat(t) = m.prediction_available[static_cast<std::size_t>(t)] ? m.P.row(t).dot(f.beta_hat) : kNaN;
    f.tau_hat(t) = m.y_post(t) - f.Y0_hat(t);
  }

  if (f.spec.p == Norm::L2 || f.spec.p == Norm::L1L2) f.ridge_lambda = recover_ridge_lambda(m, f.beta_hat);
  f.df_hat = estimate_df(f, f.spec, m, &f.diag);
  if (f.spec.p == Norm::L1L2) f.diag.note("df for L1-L2 uses the simplex rule");
  return f;
}

std::string render_summary(const FitResult& f, const ScMatrices& m) {
  std::ostringstream os;
  auto row = [&](const std::string& k, const std::string& v) { os << std::left << std::setw(34) << k << v << '\n'; };
  os << "Synthetic Control Prediction - Setup\n\n";
  row("Constraint Type:", f.spec.label());
  row("Constraint Set:", f.spec.describe());
  if (f.Q_used) row("Constraint Size (Q):", fmt(*f.Q_used));
  if (f.Q2_used) row("Constraint Size (Q2):", fmt(*f.Q2_used));
  row("Treated Unit:", m.treated);
  row("Size of the donor pool:", std::to_string(m.J));
  row("Features:", std::to_string(m.M));
  row("Pre-treatment periods:", std::to_string(m.T0));
  row("Post-treatment periods:", std::to_string(m.T1));
  row("Covariates used for adjustment:", std::to_string(m.KM()));
  row("Degrees of freedom:", fmt(f.df_hat));
  row("Objective:", fmt(f.objective));
  os << "\nSynthetic Control Prediction - Results\n\n";
  row("Active donors:", std::to_string(f.active_set.size()));
  os << "\nWeights:\n";
  std::size_t width = 8;
  for (const auto& d : m.donors) width = std::max(width, d.size() + 2);
  for (std::size_t j = 0; j < m.J; ++j) {
    const double w = f.w_hat(static_cast<Index>(j));
    os << "  " << std::left << std::setw(static_cast<int>(width)) << m.donors[j]
       << (std::abs(w) > kWeightZeroTol ? fmt(w) : std::string("0")) << '\n';
  }
  if (m.KM() > 0) {
    os << "\nCovariates:\n";
    for (std::size_t c = 0; c < m.c_columns.size(); ++c) {
      const auto& col = m.c_columns[c];
      std::string name = col.feature < 0 ? std::string("constant") : m.features[static_cast<std::size_t>(col.feature)];
      if (col.feature >= 0) name += col.term == CovariateTerm::Constant ? ".constant" : ".trend";
      os << "  " << std::left << std::setw(static_cast<int>(width)) << name << fmt(f.r_hat(static_cast<Index>(c)))
         << '\n';
    }
  }
  return os.str();
}

}  // namespace scpi
