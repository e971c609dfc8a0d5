#include "fixtures.hpp"
#include "scpi/report.hpp"

#include <doctest.h>

#include <json.hpp>

#include <fstream>
#include <sstream>

using namespace scpi;
using nlohmann::json;

namespace {

struct Run {
  RunConfig cfg;
  ResultsBundle bundle;
};

Run make_run(const std::string& name, std::size_t T1, bool joint, std::vector<double> scales = {}) {
  const auto dir = testing::scratch_dir(name);
  FactorDgp dgp;
  dgp.J = 5;
  dgp.T0 = 30;
  dgp.T1 = T1;
  Run r;
  r.cfg = testing::synthetic_run_config(testing::write_synthetic_csv(dir, dgp, 21), dgp);
  r.cfg.uncertainty.sims = 40;
  r.cfg.uncertainty.joint = joint;
  r.cfg.uncertainty.sens_scales = std::move(scales);
  r.bundle = run(r.cfg);
  return r;
}

std::vector<std::vector<std::string>> parse_csv(const std::string& text) {
  std::vector<std::vector<std::string>> rows;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    std::vector<std::string> fields;
    std::stringstream ls(line);
    std::string f;
    while (std::getline(ls, f, ',')) fields.push_back(f);
    rows.push_back(fields);
  }
  return rows;
}

const json* layer(const json& panel, const std::string& name) {
  for (const auto& l : panel["layers"])
    if (l["name"] == name) return &l;
  return nullptr;
}

}  // namespace

TEST_SUITE("report") {
  TEST_CASE("intervals.csv has one row per constraint and period with round-trip precision") {
    Run r = make_run("report_csv", 3, false);
    const auto rows = parse_csv(intervals_csv(r.bundle));
    REQUIRE(rows.size() == 1 + 3);
    CHECK(rows[0] == std::vector<std::string>{"constraint", "period", "tau_hat", "lower", "upper", "M1_L", "M1_U",
                                              "M2_L", "M2_U"});
    for (std::size_t t = 0; t < 3; ++t) {
      const auto& row = rows[t + 1];
      CHECK(row[0] == "simplex");
      CHECK(std::stol(row[1]) == r.bundle.matrices.post_periods[t]);
      CHECK(std::stod(row[2]) == r.bundle.runs[0].fit.tau_hat(static_cast<Eigen::Index>(t)));
      CHECK(std::stod(row[3]) == r.bundle.runs[0].uncertainty->intervals[t].lower);
    }
  }

  TEST_CASE("failed constraint rows are NA") {
    Run r = make_run("report_na", 2, false);
    ConstraintRun failed;
    failed.label = "broken";
    failed.error = Error(ErrorCode::Infeasible, "qp_solver", "empty set");
    r.bundle.runs.push_back(failed);
    const auto rows = parse_csv(intervals_csv(r.bundle));
    REQUIRE(rows.size() == 1 + 2 + 2);
    for (std::size_t i = 2; i < 9; ++i) CHECK(rows[3][i] == "NA");
    const json doc = json::parse(results_json(r.bundle, r.cfg, "2026-01-01T00:00:00Z"));
    CHECK(doc["results"][1]["error"]["code"] == "Infeasible");
  }

  TEST_CASE("results.json encodes non-finite numbers") {
    Run r = make_run("report_json", 2, false);
    r.bundle.runs[0].uncertainty->intervals[0].M1_U = std::numeric_limits<double>::infinity();
    r.bundle.runs[0].uncertainty->intervals[1].M1_L = std::numeric_limits<double>::quiet_NaN();
    const json doc = json::parse(results_json(r.bundle, r.cfg, "2026-01-01T00:00:00Z"));
    CHECK(doc["generated_at"] == "2026-01-01T00:00:00Z");
    const std::string text = doc.dump();
    CHECK(text.find("\"inf\"") != std::string::npos);
    CHECK(text.find("null") != std::string::npos);
    CHECK(doc["results"].size() == 1);
  }

  TEST_CASE("plot description without joint intervals omits the band") {
    Run r = make_run("report_plot", 13, false);
    const json doc = json::parse(plotspec_json(r.bundle, r.cfg));
    REQUIRE(doc["panels"].size() == 1);
    const json& panel = doc["panels"][0];
    int lines = 0;
    for (const auto& l : panel["layers"]) lines += l["mark"] == "line";
    CHECK(lines == 2);
    const json* bars = layer(panel, "prediction_interval");
    REQUIRE(bars);
    CHECK((*bars)["mark"] == "errorbar");
    CHECK((*bars)["data"].size() == 13);
    CHECK(layer(panel, "simultaneous_interval") == nullptr);
    CHECK_FALSE(doc.contains("sensitivity"));
  }

  TEST_CASE("plot description with joint intervals and sensitivity") {
    Run r = make_run("report_plot_joint", 4, true, {0.5, 1.0, 1.5, 2.0});
    const json doc = json::parse(plotspec_json(r.bundle, r.cfg));
    const json* band = layer(doc["panels"][0], "simultaneous_interval");
    REQUIRE(band);
    CHECK((*band)["mark"] == "area");
    REQUIRE(doc.contains("sensitivity"));
    const json& groups = doc["sensitivity"]["layers"][0]["data"];
    CHECK(groups.size() == 4);
    CHECK(groups[0]["kappa"] == 0.5);
  }

  TEST_CASE("write_outputs honours the emit flags") {
    Run r = make_run("report_write", 2, false);
    r.cfg.emit.summary = false;
    r.cfg.dump_matrices = true;
    write_outputs(r.bundle, r.cfg, utc_timestamp());
    CHECK(std::filesystem::exists(r.cfg.out_dir / "results.json"));
    CHECK(std::filesystem::exists(r.cfg.out_dir / "intervals.csv"));
    CHECK(std::filesystem::exists(r.cfg.out_dir / "plotspec.json"));
    CHECK_FALSE(std::filesystem::exists(r.cfg.out_dir / "summary.txt"));
    CHECK(std::filesystem::exists(r.cfg.out_dir / "matrices" / "B.csv"));
    const std::string s = summary_text(r.bundle, r.cfg);
    CHECK(s.find("90%") != std::string::npos);
  }
}
