#include "fixtures.hpp"

#include <cstdlib>
#include <fstream>
#include <sstream>

namespace scpi::testing {

PanelData panel_from(const Eigen::MatrixXd& pre, const Eigen::MatrixXd& post) {
  PanelData p;
  p.treated = "treated";
  for (Eigen::Index j = 1; j < pre.cols(); ++j) p.donors.push_back("donor" + std::to_string(j));
  p.features = {"y"};
  for (Eigen::Index t = 0; t < pre.rows(); ++t) p.pre.push_back(t + 1);
  for (Eigen::Index t = 0; t < post.rows(); ++t) p.post.push_back(pre.rows() + t + 1);
  Eigen::MatrixXd values(pre.rows() + post.rows(), pre.cols());
  values.topRows(pre.rows()) = pre;
  if (post.rows() > 0) values.bottomRows(post.rows()) = post;
  p.values = {values};
  return p;
}

ScMatrices system_from(const Eigen::VectorXd& A, const Eigen::MatrixXd& B, bool constant,
                       const Eigen::MatrixXd& post) {
  Eigen::MatrixXd pre(A.size(), B.cols() + 1);
  pre << A, B;
  Eigen::MatrixXd post_rows = post;
  if (post_rows.size() == 0) post_rows = Eigen::MatrixXd::Ones(1, B.cols() + 1);
  BuildOptions opts;
  opts.constant = constant;
  return build_matrices(panel_from(pre, post_rows), opts);
}

PanelData load_csv_string(const std::string& csv, const PanelSchema& schema) {
  std::istringstream in(csv);
  return load_panel(in, schema);
}

std::optional<std::filesystem::path> germany_csv(const std::string& fallback) {
  std::filesystem::path path = fallback;
  if (const char* env = std::getenv("SCPI_GERMANY_CSV"); env && *env) path = env;
  if (std::filesystem::exists(path)) return path;
  return std::nullopt;
}

PanelSchema germany_schema(bool with_trade) {
  PanelSchema s;
  s.id_var = "country";
  s.time_var = "year";
  s.outcome_var = "gdp";
  if (with_trade) s.features = {"gdp", "trade"};
  s.unit_tr = "West Germany";
  s.unit_co = {"USA",         "UK",          "Austria", "Belgium", "Denmark", "France",
               "Italy",       "Netherlands", "Norway",  "Switzerland", "Japan", "Greece",
               "Portugal",    "Spain",       "Australia", "New Zealand"};
  for (long y = 1960; y <= 1990; ++y) s.period_pre.push_back(y);
  for (long y = 1991; y <= 2003; ++y) s.period_post.push_back(y);
  return s;
}

std::filesystem::path write_synthetic_csv(const std::filesystem::path& dir, const FactorDgp& dgp, std::uint64_t seed) {
  const auto path = dir / "panel.csv";
  std::ofstream out(path);
  write_panel_csv(simulate_factor_panel(dgp, seed).panel, out);
  return path;
}

RunConfig synthetic_run_config(const std::filesystem::path& csv, const FactorDgp& dgp) {
  RunConfig cfg;
  cfg.data_path = csv;
  cfg.schema.id_var = "unit";
  cfg.schema.time_var = "time";
  cfg.schema.outcome_var = "y";
  cfg.schema.unit_tr = "treated";
  for (std::size_t j = 1; j <= dgp.J; ++j) cfg.schema.unit_co.push_back("donor" + std::to_string(j));
  for (std::size_t t = 1; t <= dgp.T0; ++t) cfg.schema.period_pre.push_back(static_cast<long>(t));
  for (std::size_t t = dgp.T0 + 1; t <= dgp.T0 + dgp.T1; ++t) cfg.schema.period_post.push_back(static_cast<long>(t));
  cfg.build.constant = true;
  cfg.constraints = {preset(Preset::Simplex)};
  cfg.labels = {"simplex"};
  cfg.out_dir = csv.parent_path() / "out";
  return cfg;
}

std::filesystem::path scratch_dir(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / ("scpi_test_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

}  // namespace scpi::testing
