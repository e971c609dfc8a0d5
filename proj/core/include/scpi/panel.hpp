#pragma once

#include <Eigen/Dense>

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace scpi {

/// Column mapping for a long-format panel: one row per (unit, time), one column per feature.
struct PanelSchema {
  std::string id_var;
  std::string time_var;
  std::string outcome_var;
  /// Features to match. Empty means just the outcome; the outcome is always moved to the front.
  std::vector<std::string> features;
  std::string unit_tr;
  std::vector<std::string> unit_co;
  std::vector<long> period_pre;
  std::vector<long> period_post;
  char delimiter = ',';
};

/// Validated panel restricted to the declared units, periods and features.
///
/// `values[f]` has one row per period (pre periods first, then post periods, each ascending)
/// and one column per unit (column 0 is the treated unit, columns 1..J the donors in declared
/// order). Missing entries are NaN.
struct PanelData {
  std::string treated;
  std::vector<std::string> donors;
  std::vector<std::string> features;
  std::vector<long> pre;
  std::vector<long> post;
  std::vector<Eigen::MatrixXd> values;

  std::size_t J() const { return donors.size(); }
  std::size_t M() const { return features.size(); }
  std::size_t T0() const { return pre.size(); }
  std::size_t T1() const { return post.size(); }

  double treated_pre(std::size_t f, std::size_t t) const { return values[f](t, 0); }
  double donor_pre(std::size_t f, std::size_t t, std::size_t j) const { return values[f](t, j + 1); }
  double treated_post(std::size_t f, std::size_t t) const { return values[f](T0() + t, 0); }
  double donor_post(std::size_t f, std::size_t t, std::size_t j) const {
    return values[f](T0() + t, j + 1);
  }
};

PanelData load_panel(std::istream& source, const PanelSchema& schema);
PanelData load_panel(const std::filesystem::path& path, const PanelSchema& schema);

/// What the missing-data rules did to a panel.
struct MissingReport {
  /// Pre-treatment periods removed because some unit had a missing entry.
  std::vector<long> dropped_pre;
  /// Post periods where a donor is missing: the synthetic prediction is unavailable.
  std::vector<long> donor_missing_post;
  /// Post periods where the treated unit is missing: only the effect is unavailable.
  std::vector<long> treated_missing_post;

  bool empty() const {
    return dropped_pre.empty() && donor_missing_post.empty() && treated_missing_post.empty();
  }
};

std::pair<PanelData, MissingReport> apply_missing_rules(const PanelData& panel);

enum class CovariateTerm { Constant, Trend };

struct BuildOptions {
  /// Per-feature covariate adjustment. Empty: none. One entry: shared by every feature.
  /// Otherwise exactly one entry per feature, in feature order.
  std::vector<std::vector<CovariateTerm>> cov_adj;
  /// Adds a single column of ones spanning all stacked rows.
  bool constant = false;
  bool cointegrated = false;
  /// Diagonal of V, one weight per stacked pre-period row. Identity when unset.
  std::optional<Eigen::VectorXd> v_diag;
};

struct CovariateColumn {
  /// Feature block the column belongs to; -1 for the common constant.
  int feature;
  CovariateTerm term;
};

/// Design system of the weighted least-squares fit plus post-period predictors.
struct ScMatrices {
  Eigen::VectorXd A;  // T0*M, feature-major
  Eigen::MatrixXd B;  // T0*M x J
  Eigen::MatrixXd C;  // T0*M x KM, block diagonal (or a single common column)
  Eigen::MatrixXd P;  // T1 x d, rows (x_t', g_t')
  Eigen::VectorXd V;  // diagonal of the weighting matrix

  std::vector<CovariateColumn> c_columns;
  std::vector<std::size_t> K_per_feature;

  std::size_t J = 0;
  std::size_t M = 0;
  std::size_t T0 = 0;
  std::size_t T1 = 0;
  bool cointegrated = false;
  bool constant = false;

  std::string treated;
  std::vector<std::string> donors;
  std::vector<std::string> features;
  std::vector<long> pre_periods;
  std::vector<long> post_periods;

  /// Treated outcome after treatment (NaN where missing).
  Eigen::VectorXd y_post;
  /// False where a donor value is missing at that post period.
  std::vector<bool> prediction_available;
  /// Per feature: donor series over pre then post periods ((T0+T1) x J).
  std::vector<Eigen::MatrixXd> donor_series;
  /// Per feature: treated series over pre then post periods.
  std::vector<Eigen::VectorXd> treated_series;

  BuildOptions options;

  std::size_t KM() const { return static_cast<std::size_t>(C.cols()); }
  std::size_t d() const { return J + KM(); }
  Eigen::MatrixXd Z() const;
  /// Row range of feature block l in the stacked system.
  std::size_t block_begin(std::size_t l) const { return l * T0; }
};

ScMatrices build_matrices(const PanelData& panel, const BuildOptions& opts);

/// Inverse of build_matrices on the data it carries: rebuilding from the result reproduces A, B, P.
PanelData reconstruct_panel(const ScMatrices& m);

/// Writes A.csv, B.csv, C.csv, P.csv with 17 significant digits.
void dump_matrices(const ScMatrices& m, const std::filesystem::path& dir);

}  // namespace scpi
