#include "scpi/config.hpp"

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include <algorithm>
#include <cctype>
#include <charconv>
#include <fstream>
#include <functional>
#include <sstream>

namespace scpi {
namespace {

constexpr const char* kModule = "config";

namespace pt = boost::property_tree;

[[noreturn]] void config_error(const std::string& msg) { throw Error(ErrorCode::ConfigError, kModule, msg); }

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

std::string normalize_key(std::string k) {
  std::replace(k.begin(), k.end(), '.', '_');
  std::transform(k.begin(), k.end(), k.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return k;
}

std::vector<std::string> split_list(const std::string& s, char sep = ',') {
  std::vector<std::string> out;
  std::string item;
  std::istringstream is(s);
  while (std::getline(is, item, sep)) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

bool parse_bool(const std::string& key, const std::string& v) {
  std::string s = v;
  std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  if (s == "true" || s == "yes" || s == "1" || s == "on") return true;
  if (s == "false" || s == "no" || s == "0" || s == "off") return false;
  config_error("'" + key + "' expects a boolean, got '" + v + "'");
}

double parse_double(const std::string& key, const std::string& v) {
  try {
    std::size_t used = 0;
    const double x = std::stod(v, &used);
    if (trim(v.substr(used)).empty()) return x;
  } catch (const std::exception&) {
  }
  config_error("'" + key + "' expects a number, got '" + v + "'");
}

long parse_long(const std::string& key, const std::string& v) {
  long x = 0;
  const std::string t = trim(v);
  const auto [p, ec] = std::from_chars(t.data(), t.data() + t.size(), x);
  if (ec != std::errc() || p != t.data() + t.size()) config_error("'" + key + "' expects an integer, got '" + v + "'");
  return x;
}

int parse_nonneg_int(const std::string& key, const std::string& v) {
  const long x = parse_long(key, v);
  if (x < 0) config_error("'" + key + "' must be nonnegative");
  return static_cast<int>(x);
}

std::vector<Bounds> parse_bounds(const std::string& key, const std::string& v) {
  // "lo,hi" for all periods or "lo,hi; lo,hi; ..." per period.
  std::vector<Bounds> out;
  for (const auto& pair : split_list(v, ';')) {
    const auto parts = split_list(pair, ',');
    if (parts.size() != 2) config_error("'" + key + "' expects 'lower,upper' pairs separated by ';'");
    out.push_back({parse_double(key, parts[0]), parse_double(key, parts[1])});
  }
  if (out.empty()) config_error("'" + key + "' is empty");
  return out;
}

std::vector<CovariateTerm> parse_terms(const std::string& key, const std::string& v) {
  std::vector<CovariateTerm> terms;
  for (const auto& t : split_list(v, ',')) {
    if (t == "constant") terms.push_back(CovariateTerm::Constant);
    else if (t == "trend") terms.push_back(CovariateTerm::Trend);
    else if (t == "none") continue;
    else config_error("'" + key + "' accepts 'constant' and 'trend', got '" + t + "'");
  }
  return terms;
}

using Handler = std::function<void(const std::string& key, const std::string& value)>;

void for_each_key(const pt::ptree& section, const std::string& name, const Handler& h) {
  for (const auto& [k, v] : section) {
    if (!v.empty()) config_error("nested keys are not supported in [" + name + "]");
    h(normalize_key(k), trim(v.data()));
  }
}

void parse_data(const pt::ptree& sec, RunConfig& cfg, const std::filesystem::path& base_dir) {
  for_each_key(sec, "data", [&](const std::string& k, const std::string& v) {
    if (k == "path") {
      std::filesystem::path p(v);
      cfg.data_path = p.is_absolute() || base_dir.empty() ? p : base_dir / p;
    } else if (k == "delimiter") {
      if (v == "\\t" || v == "tab") cfg.schema.delimiter = '\t';
      else if (v.size() == 1) cfg.schema.delimiter = v[0];
      else config_error("delimiter must be a single character");
    } else if (k == "id_var") cfg.schema.id_var = v;
    else if (k == "time_var") cfg.schema.time_var = v;
    else if (k == "outcome_var") cfg.schema.outcome_var = v;
    else if (k == "features") cfg.schema.features = split_list(v);
    else if (k == "unit_tr") cfg.schema.unit_tr = v;
    else if (k == "unit_co") cfg.schema.unit_co = split_list(v);
    else if (k == "period_pre") cfg.schema.period_pre = parse_periods(v);
    else if (k == "period_post") cfg.schema.period_post = parse_periods(v);
    else if (k == "constant") cfg.build.constant = parse_bool(k, v);
    else if (k == "cointegrated" || k == "cointegrated_data") cfg.build.cointegrated = parse_bool(k, v);
    else if (k == "cov_adj") {
      cfg.build.cov_adj.clear();
      for (const auto& block : split_list(v, ';')) cfg.build.cov_adj.push_back(parse_terms(k, block));
    } else config_error("unknown key '" + k + "' in [data]");
  });
}

void parse_constraint(const pt::ptree& sec, const std::string& name, RunConfig& cfg) {
  RawConstraintOptions raw;
  std::optional<std::string> label;
  for_each_key(sec, name, [&](const std::string& k, const std::string& v) {
    if (k == "name") raw.name = v;
    else if (k == "p") raw.p = v;
    else if (k == "dir") raw.dir = v;
    else if (k == "q") raw.Q = parse_double(k, v);
    else if (k == "q2") raw.Q2 = parse_double(k, v);
    else if (k == "lb") raw.lb = parse_double(k, v);
    else if (k == "label") label = v;
    else config_error("unknown key '" + k + "' in [" + name + "]");
  });
  ConstraintSpec spec;
  try {
    spec = from_options(raw);
  } catch (const Error& e) {
    throw Error(e.code(), e.module(), "[" + name + "]: " + e.what());
  }
  cfg.constraints.push_back(spec);
  cfg.labels.push_back(label ? *label : spec.label());
}

void parse_uncertainty(const pt::ptree& sec, RunConfig& cfg) {
  UncertaintyConfig& u = cfg.uncertainty;
  for_each_key(sec, "uncertainty", [&](const std::string& k, const std::string& v) {
    if (k == "enabled") cfg.run_uncertainty = parse_bool(k, v);
    else if (k == "u_missp") u.u_missp = parse_bool(k, v);
    else if (k == "u_order") u.u_order = parse_nonneg_int(k, v);
    else if (k == "u_lags") u.u_lags = parse_nonneg_int(k, v);
    else if (k == "u_sigma") u.u_sigma = parse_variance_correction(v);
    else if (k == "u_alpha") u.u_alpha = parse_double(k, v);
    else if (k == "e_method") u.e_method = parse_oos_method(v);
    else if (k == "e_order") u.e_order = parse_nonneg_int(k, v);
    else if (k == "e_lags") u.e_lags = parse_nonneg_int(k, v);
    else if (k == "e_alpha") u.e_alpha = parse_double(k, v);
    else if (k == "sims") u.sims = static_cast<std::size_t>(parse_nonneg_int(k, v));
    else if (k == "rho") u.rho = parse_double(k, v);
    else if (k == "rho_constant") u.rho_constant = parse_rho_constant(v);
    else if (k == "cores") u.cores = static_cast<unsigned>(parse_nonneg_int(k, v));
    else if (k == "seed") {
      const std::string t = trim(v);
      std::uint64_t s = 0;
      const auto [p, ec] = std::from_chars(t.data(), t.data() + t.size(), s);
      if (ec != std::errc() || p != t.data() + t.size()) config_error("'seed' expects an unsigned integer");
      u.seed = s;
    } else if (k == "joint") u.joint = parse_bool(k, v);
    else if (k == "l") u.L = static_cast<std::size_t>(parse_nonneg_int(k, v));
    else if (k == "eps_per_period") u.eps_per_period = parse_bool(k, v);
    else if (k == "sens_scales") {
      u.sens_scales.clear();
      for (const auto& s : split_list(v)) u.sens_scales.push_back(parse_double(k, s));
    } else if (k == "sens_period") cfg.sens_period = parse_long(k, v);
    else if (k == "w_bounds") u.w_bounds = parse_bounds(k, v);
    else if (k == "e_bounds") u.e_bounds = parse_bounds(k, v);
    else config_error("unknown key '" + k + "' in [uncertainty]");
  });
}

void parse_output(const pt::ptree& sec, RunConfig& cfg, const std::filesystem::path& base_dir) {
  for_each_key(sec, "output", [&](const std::string& k, const std::string& v) {
    if (k == "dir") {
      std::filesystem::path p(v);
      cfg.out_dir = p.is_absolute() || base_dir.empty() ? p : base_dir / p;
    } else if (k == "json") cfg.emit.json = parse_bool(k, v);
    else if (k == "csv") cfg.emit.csv = parse_bool(k, v);
    else if (k == "plotspec") cfg.emit.plotspec = parse_bool(k, v);
    else if (k == "summary") cfg.emit.summary = parse_bool(k, v);
    else if (k == "dump_matrices") cfg.dump_matrices = parse_bool(k, v);
    else config_error("unknown key '" + k + "' in [output]");
  });
}

}  // namespace

std::vector<long> parse_periods(const std::string& s) {
  std::vector<long> out;
  for (const auto& item : split_list(s)) {
    // A '-' after the first character separates a range; a leading '-' is a sign.
    const auto dash = item.find('-', 1);
    if (dash == std::string::npos) {
      out.push_back(parse_long("period", item));
      continue;
    }
    const long a = parse_long("period", trim(item.substr(0, dash)));
    const long b = parse_long("period", trim(item.substr(dash + 1)));
    if (b < a) config_error("period range '" + item + "' is decreasing");
    for (long t = a; t <= b; ++t) out.push_back(t);
  }
  return out;
}

void RunConfig::validate() const {
  if (data_path.empty()) config_error("[data] path is required");
  if (schema.id_var.empty() || schema.time_var.empty() || schema.outcome_var.empty())
    config_error("[data] id_var, time_var and outcome_var are required");
  if (schema.unit_tr.empty()) config_error("[data] unit_tr is required");
  if (schema.unit_co.empty()) config_error("[data] unit_co lists no donors");
  if (schema.period_pre.empty()) config_error("[data] period_pre is empty");
  if (schema.period_post.empty()) config_error("[data] period_post is empty");
  if (constraints.empty()) config_error("at least one [constraint] section is required");
  if (labels.size() != constraints.size()) config_error("constraint labels do not match constraints");
  try {
    uncertainty.validate(schema.period_post.size());
  } catch (const Error& e) {
    config_error(e.what());
  }
}

RunConfig parse_config(std::istream& in, const std::filesystem::path& base_dir) {
  pt::ptree tree;
  try {
    pt::read_ini(in, tree);
  } catch (const pt::ini_parser_error& e) {
    config_error(std::string("malformed INI: ") + e.what());
  }
  RunConfig cfg;
  for (const auto& [name, sec] : tree) {
    const std::string n = normalize_key(name);
    if (sec.empty() && !sec.data().empty()) config_error("key '" + name + "' outside of a section");
    if (n == "data") parse_data(sec, cfg, base_dir);
    else if (n.rfind("constraint", 0) == 0) parse_constraint(sec, name, cfg);
    else if (n == "uncertainty") parse_uncertainty(sec, cfg);
    else if (n == "output") parse_output(sec, cfg, base_dir);
    else config_error("unknown section [" + name + "]");
  }
  if (cfg.constraints.empty()) {
    cfg.constraints.push_back(preset(Preset::Simplex));
    cfg.labels.push_back(cfg.constraints.back().label());
  }
  return cfg;
}

RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream f(path);
  if (!f) config_error("cannot open config file '" + path.string() + "'");
  return parse_config(f, path.parent_path());
}

ResultsBundle run(const RunConfig& cfg) {
  cfg.validate();
  ResultsBundle bundle;
  const PanelData raw = load_panel(cfg.data_path, cfg.schema);
  auto [panel, missing] = apply_missing_rules(raw);
  bundle.missing = std::move(missing);
  bundle.matrices = build_matrices(panel, cfg.build);
  if (!bundle.missing.dropped_pre.empty())
    bundle.diag.warn(std::to_string(bundle.missing.dropped_pre.size()) +
                     " pre-treatment period(s) dropped for missing values");
  if (!bundle.missing.donor_missing_post.empty())
    bundle.diag.warn("prediction unavailable at " + std::to_string(bundle.missing.donor_missing_post.size()) +
                     " post period(s) with missing donor values");

  for (std::size_t i = 0; i < cfg.constraints.size(); ++i) {
    ConstraintRun r;
    r.label = cfg.labels[i];
    try {
      r.fit = fit(bundle.matrices, cfg.constraints[i], cfg.uncertainty.solver);
      if (cfg.run_uncertainty) r.uncertainty = scpi(bundle.matrices, r.fit, cfg.uncertainty);
    } catch (const Error& e) {
      if (!is_numerical(e.code())) throw;
      r.error = e;
      r.fit = FitResult{};
      r.uncertainty.reset();
      bundle.diag.warn("'" + r.label + "' failed: " + e.what());
    }
    bundle.runs.push_back(std::move(r));
  }
  return bundle;
}

}  // namespace scpi
