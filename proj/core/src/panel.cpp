#include "scpi/panel.hpp"

#include "scpi/errors.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <map>
#include <set>
#include <sstream>
#include <unordered_map>

namespace scpi {
namespace {

constexpr const char* kModule = "panel_ingest";
constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

[[noreturn]] void fail(ErrorCode code, const std::string& msg) { throw Error(code, kModule, msg); }

std::string trim(std::string_view s) {
  auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  auto e = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(b, e - b + 1));
}

// Splits one record; double quotes protect delimiters and "" is an escaped quote.
std::vector<std::string> split_record(const std::string& line, char delim) {
  std::vector<std::string> out;
  std::string cur;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    char c = line[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < line.size() && line[i + 1] == '"') {
          cur.push_back('"');
          ++i;
        } else {
          quoted = false;
        }
      } else {
        cur.push_back(c);
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == delim) {
      out.push_back(trim(cur));
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  out.push_back(trim(cur));
  return out;
}

bool is_missing_token(const std::string& s) {
  return s.empty() || s == "NA" || s == "NaN" || s == "nan" || s == "." || s == "null";
}

double parse_value(const std::string& s, std::size_t line_no) {
  if (is_missing_token(s)) return kNaN;
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size())
    fail(ErrorCode::SchemaError, "line " + std::to_string(line_no) + ": not a number '" + s + "'");
  return v;
}

long parse_time(const std::string& s, std::size_t line_no) {
  long v = 0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size())
    fail(ErrorCode::SchemaError,
         "line " + std::to_string(line_no) + ": time must be an integer ordinal, got '" + s + "'");
  return v;
}

std::vector<long> sorted_unique(std::vector<long> v) {
  std::sort(v.begin(), v.end());
  v.erase(std::unique(v.begin(), v.end()), v.end());
  return v;
}

void validate_schema(const PanelSchema& schema) {
  if (schema.period_pre.empty()) fail(ErrorCode::EmptyPeriodSet, "pre-treatment period set is empty");
  if (schema.period_post.empty()) fail(ErrorCode::EmptyPeriodSet, "post-treatment period set is empty");
  if (schema.unit_co.empty()) fail(ErrorCode::SchemaError, "donor set is empty");
  long last_pre = *std::max_element(schema.period_pre.begin(), schema.period_pre.end());
  long first_post = *std::min_element(schema.period_post.begin(), schema.period_post.end());
  if (last_pre >= first_post)
    fail(ErrorCode::SchemaError, "every pre-treatment period must precede every post-treatment period");
  if (std::find(schema.unit_co.begin(), schema.unit_co.end(), schema.unit_tr) != schema.unit_co.end())
    fail(ErrorCode::SchemaError, "treated unit '" + schema.unit_tr + "' is also listed as a donor");
  std::set<std::string> seen;
  for (const auto& d : schema.unit_co)
    if (!seen.insert(d).second) fail(ErrorCode::SchemaError, "donor '" + d + "' listed twice");
}

std::vector<std::string> resolve_features(const PanelSchema& schema) {
  std::vector<std::string> feats = schema.features;
  if (feats.empty()) feats.push_back(schema.outcome_var);
  auto it = std::find(feats.begin(), feats.end(), schema.outcome_var);
  if (it == feats.end()) {
    feats.insert(feats.begin(), schema.outcome_var);
  } else {
    std::rotate(feats.begin(), it, it + 1);
  }
  std::set<std::string> seen;
  for (const auto& f : feats)
    if (!seen.insert(f).second) fail(ErrorCode::SchemaError, "feature '" + f + "' listed twice");
  return feats;
}

}  // namespace

PanelData load_panel(std::istream& source, const PanelSchema& schema) {
  validate_schema(schema);

  PanelData panel;
  panel.treated = schema.unit_tr;
  panel.donors = schema.unit_co;
  panel.features = resolve_features(schema);
  panel.pre = sorted_unique(schema.period_pre);
  panel.post = sorted_unique(schema.period_post);

  std::string line;
  if (!std::getline(source, line)) fail(ErrorCode::SchemaError, "input has no header row");
  const auto header = split_record(line, schema.delimiter);
  auto column_of = [&](const std::string& name) -> std::size_t {
    auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end()) fail(ErrorCode::SchemaError, "column '" + name + "' not found in header");
    return static_cast<std::size_t>(it - header.begin());
  };
  const std::size_t id_col = column_of(schema.id_var);
  const std::size_t time_col = column_of(schema.time_var);
  std::vector<std::size_t> feature_cols;
  for (const auto& f : panel.features) feature_cols.push_back(column_of(f));

  std::unordered_map<std::string, std::size_t> unit_index;
  unit_index.emplace(panel.treated, 0);
  for (std::size_t j = 0; j < panel.donors.size(); ++j) unit_index.emplace(panel.donors[j], j + 1);
  std::map<long, std::size_t> period_index;
  for (std::size_t t = 0; t < panel.pre.size(); ++t) period_index.emplace(panel.pre[t], t);
  for (std::size_t t = 0; t < panel.post.size(); ++t) period_index.emplace(panel.post[t], panel.pre.size() + t);

  const auto n_periods = static_cast<Eigen::Index>(period_index.size());
  const auto n_units = static_cast<Eigen::Index>(unit_index.size());
  panel.values.assign(panel.features.size(), Eigen::MatrixXd::Constant(n_periods, n_units, kNaN));

  std::set<std::pair<std::string, long>> keys;
  std::vector<bool> unit_seen(unit_index.size(), false);
  std::size_t line_no = 1;
  while (std::getline(source, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    auto fields = split_record(line, schema.delimiter);
    if (fields.size() != header.size())
      fail(ErrorCode::SchemaError, "line " + std::to_string(line_no) + ": expected " +
                                       std::to_string(header.size()) + " fields, got " +
                                       std::to_string(fields.size()));
    const std::string& unit = fields[id_col];
    const long time = parse_time(fields[time_col], line_no);
    if (!keys.emplace(unit, time).second)
      fail(ErrorCode::DuplicateKey, "repeated (unit, time) = (" + unit + ", " + std::to_string(time) + ")");

    auto u = unit_index.find(unit);
    if (u == unit_index.end()) continue;
    unit_seen[u->second] = true;
    auto p = period_index.find(time);
    if (p == period_index.end()) continue;
    for (std::size_t f = 0; f < feature_cols.size(); ++f) {
      panel.values[f](static_cast<Eigen::Index>(p->second), static_cast<Eigen::Index>(u->second)) =
          parse_value(fields[feature_cols[f]], line_no);
    }
  }

  if (!unit_seen[0]) fail(ErrorCode::UnknownUnit, "treated unit '" + panel.treated + "' not found");
  for (std::size_t j = 0; j < panel.donors.size(); ++j)
    if (!unit_seen[j + 1]) fail(ErrorCode::UnknownUnit, "donor '" + panel.donors[j] + "' not found");
  for (std::size_t f = 0; f < panel.features.size(); ++f) {
    if (!panel.values[f].array().isFinite().any())
      fail(ErrorCode::SchemaError, "feature '" + panel.features[f] + "' has no observed values");
  }
  return panel;
}

PanelData load_panel(const std::filesystem::path& path, const PanelSchema& schema) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::SchemaError, "cannot open " + path.string());
  return load_panel(in, schema);
}

std::pair<PanelData, MissingReport> apply_missing_rules(const PanelData& panel) {
  MissingReport report;
  const std::size_t T0 = panel.T0();

  std::vector<std::size_t> keep;
  for (std::size_t t = 0; t < T0; ++t) {
    bool complete = true;
    for (const auto& v : panel.values) complete = complete && v.row(static_cast<Eigen::Index>(t)).array().isFinite().all();
    if (complete) {
      keep.push_back(t);
    } else {
      report.dropped_pre.push_back(panel.pre[t]);
    }
  }
  if (keep.empty()) throw Error(ErrorCode::AllPrePeriodsDropped, kModule, "no complete pre-treatment period remains");

  for (std::size_t t = 0; t < panel.T1(); ++t) {
    const auto row = static_cast<Eigen::Index>(T0 + t);
    bool donor_missing = false;
    bool treated_missing = false;
    for (const auto& v : panel.values) {
      donor_missing = donor_missing || !v.row(row).tail(v.cols() - 1).array().isFinite().all();
      treated_missing = treated_missing || !std::isfinite(v(row, 0));
    }
    if (donor_missing) report.donor_missing_post.push_back(panel.post[t]);
    if (treated_missing) report.treated_missing_post.push_back(panel.post[t]);
  }

  if (report.dropped_pre.empty()) return {panel, report};

  PanelData out = panel;
  out.pre.clear();
  for (auto t : keep) out.pre.push_back(panel.pre[t]);
  for (std::size_t f = 0; f < panel.values.size(); ++f) {
    const auto& src = panel.values[f];
    Eigen::MatrixXd dst(static_cast<Eigen::Index>(keep.size() + panel.T1()), src.cols());
    for (std::size_t i = 0; i < keep.size(); ++i)
      dst.row(static_cast<Eigen::Index>(i)) = src.row(static_cast<Eigen::Index>(keep[i]));
    dst.bottomRows(static_cast<Eigen::Index>(panel.T1())) = src.bottomRows(static_cast<Eigen::Index>(panel.T1()));
    out.values[f] = std::move(dst);
  }
  return {out, report};
}

Eigen::MatrixXd ScMatrices::Z() const {
  Eigen::MatrixXd z(B.rows(), B.cols() + C.cols());
  z << B, C;
  return z;
}

ScMatrices build_matrices(const PanelData& panel, const BuildOptions& opts) {
  const std::size_t J = panel.J();
  const std::size_t M = panel.M();
  const std::size_t T0 = panel.T0();
  const std::size_t T1 = panel.T1();
  const auto rows = static_cast<Eigen::Index>(T0 * M);

  for (const auto& v : panel.values)
    if (!v.topRows(static_cast<Eigen::Index>(T0)).array().isFinite().all())
      fail(ErrorCode::SchemaError, "pre-treatment data has missing entries; apply the missing-data rules first");

  if (!opts.cov_adj.empty() && opts.cov_adj.size() != 1 && opts.cov_adj.size() != M)
    fail(ErrorCode::SchemaError, "cov_adj must have one shared entry or one entry per feature");

  std::vector<std::vector<CovariateTerm>> per_feature(M);
  for (std::size_t l = 0; l < M && !opts.cov_adj.empty(); ++l)
    per_feature[l] = opts.cov_adj.size() == 1 ? opts.cov_adj[0] : opts.cov_adj[l];

  for (std::size_t l = 0; l < M; ++l) {
    auto& terms = per_feature[l];
    for (std::size_t a = 0; a < terms.size(); ++a)
      for (std::size_t b = a + 1; b < terms.size(); ++b)
        if (terms[a] == terms[b])
          fail(ErrorCode::RankDeficientC, "covariate listed twice for feature '" + panel.features[l] + "'");
    bool has_constant = std::find(terms.begin(), terms.end(), CovariateTerm::Constant) != terms.end();
    if (opts.constant && has_constant)
      fail(ErrorCode::CollinearCovariates,
           "constant=true together with a per-feature constant for '" + panel.features[l] + "'");
    if (T0 < 2 && terms.size() > 1)
      fail(ErrorCode::RankDeficientC, "constant and trend are collinear with a single pre-period");
  }

  ScMatrices m;
  m.J = J;
  m.M = M;
  m.T0 = T0;
  m.T1 = T1;
  m.cointegrated = opts.cointegrated;
  m.constant = opts.constant;
  m.treated = panel.treated;
  m.donors = panel.donors;
  m.features = panel.features;
  m.pre_periods = panel.pre;
  m.post_periods = panel.post;
  m.options = opts;

  m.A.resize(rows);
  m.B.resize(rows, static_cast<Eigen::Index>(J));
  for (std::size_t l = 0; l < M; ++l) {
    const auto& v = panel.values[l];
    const auto r0 = static_cast<Eigen::Index>(l * T0);
    m.A.segment(r0, static_cast<Eigen::Index>(T0)) = v.col(0).head(static_cast<Eigen::Index>(T0));
    m.B.middleRows(r0, static_cast<Eigen::Index>(T0)) =
        v.block(0, 1, static_cast<Eigen::Index>(T0), static_cast<Eigen::Index>(J));
  }

  if (opts.constant) m.c_columns.push_back({-1, CovariateTerm::Constant});
  m.K_per_feature.assign(M, opts.constant ? 1 : 0);
  for (std::size_t l = 0; l < M; ++l) {
    for (auto term : per_feature[l]) m.c_columns.push_back({static_cast<int>(l), term});
    m.K_per_feature[l] += per_feature[l].size();
  }

  auto covariate_value = [](CovariateTerm term, std::size_t ordinal) {
    return term == CovariateTerm::Constant ? 1.0 : static_cast<double>(ordinal);
  };

  m.C = Eigen::MatrixXd::Zero(rows, static_cast<Eigen::Index>(m.c_columns.size()));
  for (std::size_t c = 0; c < m.c_columns.size(); ++c) {
    const auto& col = m.c_columns[c];
    for (std::size_t l = 0; l < M; ++l) {
      if (col.feature != -1 && col.feature != static_cast<int>(l)) continue;
      for (std::size_t t = 0; t < T0; ++t)
        m.C(static_cast<Eigen::Index>(l * T0 + t), static_cast<Eigen::Index>(c)) = covariate_value(col.term, t + 1);
    }
  }

  const auto d = static_cast<Eigen::Index>(m.d());
  m.P = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(T1), d);
  m.y_post.resize(static_cast<Eigen::Index>(T1));
  m.prediction_available.assign(T1, true);
  const auto& outcome = panel.values[0];
  for (std::size_t t = 0; t < T1; ++t) {
    const auto row = static_cast<Eigen::Index>(T0 + t);
    const auto ti = static_cast<Eigen::Index>(t);
    m.P.row(ti).head(static_cast<Eigen::Index>(J)) = outcome.row(row).tail(static_cast<Eigen::Index>(J));
    for (std::size_t c = 0; c < m.c_columns.size(); ++c) {
      const auto& col = m.c_columns[c];
      // Only covariates of the outcome equation enter the prediction.
      if (col.feature == -1 || col.feature == 0)
        m.P(ti, static_cast<Eigen::Index>(J + c)) = covariate_value(col.term, T0 + t + 1);
    }
    m.y_post(ti) = outcome(row, 0);
    for (const auto& v : panel.values)
      if (!v.row(row).tail(static_cast<Eigen::Index>(J)).array().isFinite().all()) m.prediction_available[t] = false;
  }

  for (std::size_t l = 0; l < M; ++l) {
    m.donor_series.push_back(panel.values[l].rightCols(static_cast<Eigen::Index>(J)));
    m.treated_series.push_back(panel.values[l].col(0));
  }

  if (opts.v_diag) {
    if (opts.v_diag->size() != rows) fail(ErrorCode::SchemaError, "V must have one weight per stacked row");
    if ((opts.v_diag->array() < 0.0).any()) fail(ErrorCode::SchemaError, "V weights must be nonnegative");
    m.V = *opts.v_diag;
  } else {
    m.V = Eigen::VectorXd::Ones(rows);
  }

  // Each block of C must have independent columns on its own rows.
  for (std::size_t l = 0; l < M; ++l) {
    std::vector<Eigen::Index> cols;
    for (std::size_t c = 0; c < m.c_columns.size(); ++c)
      if (m.c_columns[c].feature == -1 || m.c_columns[c].feature == static_cast<int>(l))
        cols.push_back(static_cast<Eigen::Index>(c));
    if (cols.empty()) continue;
    Eigen::MatrixXd blk(static_cast<Eigen::Index>(T0), static_cast<Eigen::Index>(cols.size()));
    for (std::size_t i = 0; i < cols.size(); ++i)
      blk.col(static_cast<Eigen::Index>(i)) = m.C.block(static_cast<Eigen::Index>(l * T0), cols[i], static_cast<Eigen::Index>(T0), 1);
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(blk);
    if (qr.rank() < blk.cols())
      fail(ErrorCode::RankDeficientC, "covariate block for feature '" + panel.features[l] + "' is rank deficient");
  }
  return m;
}

PanelData reconstruct_panel(const ScMatrices& m) {
  PanelData p;
  p.treated = m.treated;
  p.donors = m.donors;
  p.features = m.features;
  p.pre = m.pre_periods;
  p.post = m.post_periods;
  for (std::size_t l = 0; l < m.M; ++l) {
    Eigen::MatrixXd v(static_cast<Eigen::Index>(m.T0 + m.T1), static_cast<Eigen::Index>(m.J + 1));
    v.col(0) = m.treated_series[l];
    v.rightCols(static_cast<Eigen::Index>(m.J)) = m.donor_series[l];
    // A and B are authoritative for the pre-period block.
    const auto r0 = static_cast<Eigen::Index>(l * m.T0);
    v.col(0).head(static_cast<Eigen::Index>(m.T0)) = m.A.segment(r0, static_cast<Eigen::Index>(m.T0));
    v.block(0, 1, static_cast<Eigen::Index>(m.T0), static_cast<Eigen::Index>(m.J)) =
        m.B.middleRows(r0, static_cast<Eigen::Index>(m.T0));
    p.values.push_back(std::move(v));
  }
  return p;
}

void dump_matrices(const ScMatrices& m, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  auto write = [&](const std::string& name, const Eigen::MatrixXd& x) {
    std::ofstream out(dir / name);
    if (!out) fail(ErrorCode::SchemaError, "cannot write " + (dir / name).string());
    out << std::setprecision(17);
    for (Eigen::Index i = 0; i < x.rows(); ++i) {
      for (Eigen::Index j = 0; j < x.cols(); ++j) out << (j ? "," : "") << x(i, j);
      out << '\n';
    }
  };
  write("A.csv", m.A);
  write("B.csv", m.B);
  write("C.csv", m.C);
  write("P.csv", m.P);
}

}  // namespace scpi
