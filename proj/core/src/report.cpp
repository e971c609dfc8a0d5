#include "scpi/report.hpp"

#include <json.hpp>

#include <chrono>
#include <cmath>
#include <ctime>
#include <fstream>
#include <iomanip>
#include <sstream>

namespace scpi {
namespace {

using nlohmann::json;
using Eigen::Index;
using Eigen::VectorXd;

json num(double x) {
  if (std::isnan(x)) return nullptr;
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  return x;
}

json vec(const VectorXd& v) {
  json a = json::array();
  for (Index i = 0; i < v.size(); ++i) a.push_back(num(v(i)));
  return a;
}

template <class T>
json opt(const std::optional<T>& v) {
  return v ? json(num(*v)) : json(nullptr);
}

std::string csv_num(double x) {
  if (std::isnan(x)) return "NA";
  if (std::isinf(x)) return x > 0 ? "Inf" : "-Inf";
  std::ostringstream os;
  os << std::setprecision(17) << x;
  return os.str();
}

std::string txt_num(double x) {
  if (std::isnan(x)) return "NA";
  std::ostringstream os;
  os << std::setprecision(6) << x;
  return os.str();
}

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

std::string covariate_name(const ScMatrices& m, std::size_t c) {
  const auto& col = m.c_columns[c];
  if (col.feature < 0) return "constant";
  return m.features[static_cast<std::size_t>(col.feature)] + (col.term == CovariateTerm::Constant ? ".constant" : ".trend");
}

json interval_rows(const std::vector<PeriodInterval>& rows) {
  json a = json::array();
  for (const auto& p : rows)
    a.push_back({{"period", p.period},
                 {"available", p.available},
                 {"y_post", num(p.y_post)},
                 {"Y0_hat", num(p.Y0_hat)},
                 {"tau_hat", num(p.tau_hat)},
                 {"M1_L", num(p.M1_L)},
                 {"M1_U", num(p.M1_U)},
                 {"M2_L", num(p.M2_L)},
                 {"M2_U", num(p.M2_U)},
                 {"lower", num(p.lower)},
                 {"upper", num(p.upper)},
                 {"Y0_lower", num(p.y0_lower)},
                 {"Y0_upper", num(p.y0_upper)}});
  return a;
}

json oos_json(const OutOfSampleBounds& o) {
  return {{"alpha", o.alpha}, {"joint", o.joint}, {"L", o.L}, {"E_hat", vec(o.E_hat)}, {"sigma_H", vec(o.sigma_H)},
          {"M2_L", vec(o.M2_L)}, {"M2_U", vec(o.M2_U)}};
}

json diag_json(const Diagnostics& d) { return {{"warnings", d.warnings}, {"notes", d.notes}}; }

json fit_json(const FitResult& f, const ScMatrices& m) {
  json weights = json::object();
  for (std::size_t j = 0; j < m.J; ++j) weights[m.donors[j]] = num(f.w_hat(static_cast<Index>(j)));
  json cov = json::array();
  for (std::size_t c = 0; c < m.c_columns.size(); ++c)
    cov.push_back({{"name", covariate_name(m, c)}, {"value", num(f.r_hat(static_cast<Index>(c)))}});
  json active = json::array();
  for (std::size_t j : f.active_set) active.push_back(m.donors[j]);
  return {{"weights", weights},
          {"covariates", cov},
          {"active_donors", active},
          {"objective", num(f.objective)},
          {"df", num(f.df_hat)},
          {"Q", opt(f.Q_used)},
          {"Q2", opt(f.Q2_used)},
          {"ridge_lambda", opt(f.ridge_lambda)},
          {"Y0_hat", vec(f.Y0_hat)},
          {"tau_hat", vec(f.tau_hat)},
          {"solver", {{"iterations", f.iterations},
                      {"kkt_primal", num(f.kkt.primal)},
                      {"kkt_dual", num(f.kkt.dual)},
                      {"kkt_gap", num(f.kkt.gap)}}},
          {"diagnostics", diag_json(f.diag)}};
}

json uncertainty_json(const UncertaintyResult& u, const ScMatrices& m) {
  json selected = json::array();
  for (std::size_t j : u.model.selected) selected.push_back(m.donors[j]);
  std::size_t binding = 0;
  for (bool b : u.model.binding) binding += b ? 1 : 0;
  json out = {{"coverage", u.coverage},
              {"rho", num(u.model.rho)},
              {"binding_inequalities", binding},
              {"inequalities", u.model.binding.size()},
              {"residual_design_donors", selected},
              {"sigma_min_eig_ratio", num(u.model.sigma_min_eig_ratio)},
              {"draws", u.in_sample.draws},
              {"failed_draws", u.in_sample.failed_draws},
              {"unbounded_solves", u.in_sample.unbounded_solves},
              {"eps", vec(u.in_sample.eps)},
              {"out_of_sample", oos_json(u.out_of_sample)},
              {"intervals", interval_rows(u.intervals)},
              {"diagnostics", diag_json(u.diag)}};
  if (u.out_of_sample_joint) {
    json j = {{"L", u.joint_intervals.size()}, {"out_of_sample", oos_json(*u.out_of_sample_joint)},
              {"intervals", interval_rows(u.joint_intervals)}};
    if (u.in_sample.joint) {
      j["M1_L"] = num(u.in_sample.joint->lower);
      j["M1_U"] = num(u.in_sample.joint->upper);
    }
    out["joint"] = j;
  }
  if (!u.sensitivity.empty()) {
    json s = json::array();
    for (const auto& r : u.sensitivity)
      s.push_back({{"period", r.period}, {"kappa", r.kappa}, {"sigma_H", num(r.sigma_H)}, {"M2_L", num(r.M2_L)},
                   {"M2_U", num(r.M2_U)}, {"lower", num(r.lower)}, {"upper", num(r.upper)}});
    out["sensitivity"] = s;
  }
  return out;
}

json config_json(const RunConfig& cfg) {
  const UncertaintyConfig& u = cfg.uncertainty;
  json cov_adj = json::array();
  for (const auto& blk : cfg.build.cov_adj) {
    json b = json::array();
    for (auto t : blk) b.push_back(t == CovariateTerm::Constant ? "constant" : "trend");
    cov_adj.push_back(b);
  }
  return {{"constant", cfg.build.constant},
          {"cointegrated", cfg.build.cointegrated},
          {"cov_adj", cov_adj},
          {"u_missp", u.u_missp},
          {"u_order", u.u_order},
          {"u_lags", u.u_lags},
          {"u_sigma", to_string(u.u_sigma)},
          {"u_alpha", u.u_alpha},
          {"e_method", to_string(u.e_method)},
          {"e_order", u.e_order},
          {"e_lags", u.e_lags},
          {"e_alpha", u.e_alpha},
          {"sims", u.sims},
          {"seed", u.seed},
          {"cores", u.cores},
          {"rho", opt(u.rho)},
          {"rho_constant", to_string(u.rho_constant)},
          {"joint", u.joint},
          {"L", u.L ? json(*u.L) : json(nullptr)},
          {"eps_per_period", u.eps_per_period},
          {"sens_scales", u.sens_scales},
          {"w_bounds_override", u.w_bounds.has_value()},
          {"e_bounds_override", u.e_bounds.has_value()}};
}

json decision_log(const RunConfig& cfg) {
  json d = json::array();
  d.push_back("scaling matrix D is the identity");
  d.push_back("weights with |w| <= 1e-8 count as zero in df and active sets");
  d.push_back("L1-L2 degrees of freedom use the simplex formula");
  d.push_back("rho uses the stacked sample size T0*M");
  d.push_back("out-of-sample moments use feature-1 pre-treatment residuals");
  d.push_back("sub-Gaussian scale from a variance regression of squared centered residuals");
  d.push_back("quantiles are type-7 (linear interpolation)");
  d.push_back(std::string("nonlinear-constraint widening per period: ") + (cfg.uncertainty.eps_per_period ? "on" : "off"));
  d.push_back("failed simulation draws are dropped and counted");
  return d;
}

std::vector<std::pair<long, double>> series(const std::vector<long>& periods, const VectorXd& v, std::size_t offset = 0) {
  std::vector<std::pair<long, double>> out;
  for (Index i = 0; i < v.size(); ++i) out.emplace_back(periods[offset + static_cast<std::size_t>(i)], v(i));
  return out;
}

json points(const std::vector<std::pair<long, double>>& s) {
  json a = json::array();
  for (const auto& [t, v] : s) a.push_back({{"period", t}, {"value", num(v)}});
  return a;
}

}  // namespace

std::string utc_timestamp() {
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  std::ostringstream os;
  os << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ");
  return os.str();
}

std::string results_json(const ResultsBundle& b, const RunConfig& cfg, const std::string& generated_at) {
  const ScMatrices& m = b.matrices;
  json data = {{"treated", m.treated},
               {"donors", m.donors},
               {"features", m.features},
               {"pre_periods", m.pre_periods},
               {"post_periods", m.post_periods},
               {"dropped_pre", b.missing.dropped_pre},
               {"donor_missing_post", b.missing.donor_missing_post},
               {"treated_missing_post", b.missing.treated_missing_post},
               {"J", m.J},
               {"M", m.M},
               {"T0", m.T0},
               {"T1", m.T1},
               {"KM", m.KM()}};
  json results = json::array();
  for (const auto& r : b.runs) {
    if (r.error) {
      results.push_back({{"label", r.label},
                         {"error", {{"code", std::string(to_string(r.error->code()))},
                                    {"module", r.error->module()},
                                    {"message", r.error->what()}}}});
      continue;
    }
    json e = {{"label", r.label},
              {"constraint", {{"type", r.fit.spec.label()},
                              {"set", r.fit.spec.describe()},
                              {"p", to_string(r.fit.spec.p)},
                              {"dir", to_string(r.fit.spec.dir)},
                              {"Q", opt(r.fit.spec.Q)},
                              {"Q2", opt(r.fit.spec.Q2)},
                              {"lb", num(r.fit.spec.lb)}}},
              {"fit", fit_json(r.fit, m)}};
    if (r.uncertainty) e["uncertainty"] = uncertainty_json(*r.uncertainty, m);
    results.push_back(e);
  }
  json doc = {{"generated_at", generated_at},
              {"data", data},
              {"metadata", {{"options", config_json(cfg)}, {"decisions", decision_log(cfg)}}},
              {"diagnostics", diag_json(b.diag)},
              {"results", results}};
  return doc.dump(2) + "\n";
}

std::string intervals_csv(const ResultsBundle& b) {
  std::ostringstream os;
  os << "constraint,period,tau_hat,lower,upper,M1_L,M1_U,M2_L,M2_U\n";
  for (const auto& r : b.runs) {
    const ScMatrices& m = b.matrices;
    for (std::size_t t = 0; t < m.T1; ++t) {
      os << csv_field(r.label) << ',' << m.post_periods[t] << ','
         << (r.error ? std::string("NA") : csv_num(r.fit.tau_hat(static_cast<Index>(t))));
      if (r.uncertainty) {
        const PeriodInterval& p = r.uncertainty->intervals[t];
        for (double x : {p.lower, p.upper, p.M1_L, p.M1_U, p.M2_L, p.M2_U}) os << ',' << csv_num(x);
      } else {
        os << ",NA,NA,NA,NA,NA,NA";
      }
      os << '\n';
    }
  }
  return os.str();
}

std::string summary_text(const ResultsBundle& b, const RunConfig& cfg) {
  std::ostringstream os;
  const ScMatrices& m = b.matrices;
  for (const auto& r : b.runs) {
    os << "==== " << r.label << " ====\n\n";
    if (r.error) {
      os << "failed: " << r.error->what() << "\n\n";
      continue;
    }
    os << render_summary(r.fit, m);
    if (r.uncertainty) {
      const UncertaintyResult& u = *r.uncertainty;
      os << "\nPrediction intervals (" << txt_num(100.0 * u.coverage) << "%, in-sample "
         << to_string(cfg.uncertainty.u_sigma) << ", out-of-sample " << to_string(cfg.uncertainty.e_method) << ")\n";
      os << "rho = " << txt_num(u.model.rho) << ", draws = " << u.in_sample.draws
         << ", failed = " << u.in_sample.failed_draws << "\n\n";
      os << std::left << std::setw(10) << "period" << std::setw(14) << "Y1" << std::setw(14) << "Y0_hat"
         << std::setw(14) << "tau_hat" << std::setw(14) << "lower" << std::setw(14) << "upper" << '\n';
      for (const auto& p : u.intervals)
        os << std::left << std::setw(10) << p.period << std::setw(14) << txt_num(p.y_post) << std::setw(14)
           << txt_num(p.Y0_hat) << std::setw(14) << txt_num(p.tau_hat) << std::setw(14) << txt_num(p.lower)
           << std::setw(14) << txt_num(p.upper) << '\n';
      if (!u.joint_intervals.empty()) {
        os << "\nSimultaneous intervals over the first " << u.joint_intervals.size() << " period(s)\n";
        for (const auto& p : u.joint_intervals)
          os << std::left << std::setw(10) << p.period << std::setw(14) << txt_num(p.lower) << std::setw(14)
             << txt_num(p.upper) << '\n';
      }
      if (!u.sensitivity.empty()) {
        os << "\nSensitivity (sigma_H scaled by kappa)\n";
        os << std::left << std::setw(10) << "period" << std::setw(10) << "kappa" << std::setw(14) << "lower"
           << std::setw(14) << "upper" << '\n';
        for (const auto& s : u.sensitivity)
          os << std::left << std::setw(10) << s.period << std::setw(10) << txt_num(s.kappa) << std::setw(14)
             << txt_num(s.lower) << std::setw(14) << txt_num(s.upper) << '\n';
      }
      for (const auto& w : u.diag.warnings) os << "warning: " << w << '\n';
    }
    for (const auto& w : r.fit.diag.warnings) os << "warning: " << w << '\n';
    os << '\n';
  }
  for (const auto& w : b.diag.warnings) os << "warning: " << w << '\n';
  return os.str();
}

std::string plotspec_json(const ResultsBundle& b, const RunConfig& cfg) {
  const ScMatrices& m = b.matrices;
  std::vector<long> all_periods = m.pre_periods;
  all_periods.insert(all_periods.end(), m.post_periods.begin(), m.post_periods.end());
  const json treated = points(series(all_periods, m.treated_series[0]));

  json panels = json::array();
  for (const auto& r : b.runs) {
    if (r.error) continue;
    VectorXd synth(static_cast<Index>(m.T0 + m.T1));
    synth.head(static_cast<Index>(m.T0)) = r.fit.A_hat.head(static_cast<Index>(m.T0));
    synth.tail(static_cast<Index>(m.T1)) = r.fit.Y0_hat;
    json layers = json::array();
    layers.push_back({{"name", "treated"}, {"mark", "line"}, {"data", treated},
                      {"encoding", {{"x", "period"}, {"y", "value"}, {"color", "black"}}}});
    layers.push_back({{"name", "synthetic"}, {"mark", "line"}, {"data", points(series(all_periods, synth))},
                      {"encoding", {{"x", "period"}, {"y", "value"}, {"color", "blue"}, {"strokeDash", "dashed"}}}});
    if (r.uncertainty) {
      json bars = json::array();
      for (const auto& p : r.uncertainty->intervals)
        bars.push_back({{"period", p.period}, {"lower", num(p.y0_lower)}, {"upper", num(p.y0_upper)}});
      layers.push_back({{"name", "prediction_interval"}, {"mark", "errorbar"}, {"data", bars},
                        {"encoding", {{"x", "period"}, {"y", "lower"}, {"y2", "upper"}, {"color", "blue"}}}});
      if (!r.uncertainty->joint_intervals.empty()) {
        json band = json::array();
        for (const auto& p : r.uncertainty->joint_intervals)
          band.push_back({{"period", p.period}, {"lower", num(p.y0_lower)}, {"upper", num(p.y0_upper)}});
        layers.push_back({{"name", "simultaneous_interval"}, {"mark", "area"}, {"data", band},
                          {"encoding", {{"x", "period"}, {"y", "lower"}, {"y2", "upper"}, {"opacity", 0.2}}}});
      }
    }
    panels.push_back({{"title", r.label},
                      {"x_title", "period"},
                      {"y_title", m.features[0]},
                      {"treatment_after", m.pre_periods.back()},
                      {"layers", layers}});
  }

  json doc = {{"description", "treated vs synthetic outcome with prediction intervals"}, {"panels", panels}};

  for (const auto& r : b.runs) {
    if (!r.uncertainty || r.uncertainty->sensitivity.empty()) continue;
    const auto& rows = r.uncertainty->sensitivity;
    const long period = cfg.sens_period.value_or(rows.front().period);
    json groups = json::array();
    double y_obs = std::nan("");
    for (std::size_t t = 0; t < m.T1; ++t)
      if (m.post_periods[t] == period) y_obs = m.y_post(static_cast<Index>(t));
    for (const auto& s : rows) {
      if (s.period != period) continue;
      // Counterfactual interval implied by the effect interval: Y0 = Y1 - tau.
      groups.push_back({{"kappa", s.kappa}, {"lower", num(y_obs - s.upper)}, {"upper", num(y_obs - s.lower)},
                        {"tau_lower", num(s.lower)}, {"tau_upper", num(s.upper)}});
    }
    doc["sensitivity"] = {{"title", r.label + ": sensitivity at " + std::to_string(period)},
                          {"period", period},
                          {"layers",
                           {{{"name", "interval_by_kappa"}, {"mark", "errorbar"}, {"data", groups},
                             {"encoding", {{"x", "kappa"}, {"y", "lower"}, {"y2", "upper"}}}},
                            {{"name", "observed"}, {"mark", "rule"}, {"data", {{{"value", num(y_obs)}}}},
                             {"encoding", {{"y", "value"}, {"color", "black"}}}}}}};
    break;
  }
  return doc.dump(2) + "\n";
}

void write_outputs(const ResultsBundle& b, const RunConfig& cfg, const std::string& generated_at) {
  std::filesystem::create_directories(cfg.out_dir);
  auto put = [&](const char* name, const std::string& content) {
    const auto path = cfg.out_dir / name;
    std::ofstream f(path, std::ios::binary);
    if (!f) throw Error(ErrorCode::ConfigError, "report", "cannot write '" + path.string() + "'");
    f << content;
  };
  if (cfg.emit.json) put("results.json", results_json(b, cfg, generated_at));
  if (cfg.emit.csv) put("intervals.csv", intervals_csv(b));
  if (cfg.emit.summary) put("summary.txt", summary_text(b, cfg));
  if (cfg.emit.plotspec) put("plotspec.json", plotspec_json(b, cfg));
  if (cfg.dump_matrices) dump_matrices(b.matrices, cfg.out_dir / "matrices");
}

}  // namespace scpi
