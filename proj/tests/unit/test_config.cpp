#include "fixtures.hpp"
#include "scpi/config.hpp"
#include "scpi/errors.hpp"

#include <doctest.h>

#include <fstream>
#include <sstream>

using namespace scpi;

namespace {

RunConfig parse(const std::string& text) {
  std::istringstream in(text);
  return parse_config(in, "/base");
}

template <class F>
ErrorCode code_of(F&& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected an scpi::Error");
  return ErrorCode::SchemaError;
}

const char* kFull = R"([data]
path = panel.csv
id_var = country
time_var = year
outcome_var = gdp
features = gdp, trade
unit_tr = West Germany
unit_co = USA, UK, Austria
period_pre = 1960-1990
period_post = 1991-1995, 2000
constant = false
cov_adj = constant, trend; trend

[constraint.a]
name = simplex

[constraint.b]
p = L2
dir = <=
Q = 0.5
lb = -inf
label = ball

[constraint.c]
name = ridge

[uncertainty]
u.order = 2
u_sigma = HC3
e_method = qreg
e.alpha = 0.1
sims = 300
cores = 2
seed = 17
joint = true
L = 3
sens_scales = 0.5, 1, 2
w_bounds = -1, 1

[output]
dir = results
csv = false
)";

}  // namespace

TEST_SUITE("config") {
  TEST_CASE("period lists") {
    CHECK(parse_periods("1960-1963") == std::vector<long>{1960, 1961, 1962, 1963});
    CHECK(parse_periods("1, 3,5-6") == std::vector<long>{1, 3, 5, 6});
    CHECK_THROWS_AS(parse_periods("1990-1980"), Error);
    CHECK_THROWS_AS(parse_periods("abc"), Error);
  }

  TEST_CASE("full document") {
    const RunConfig cfg = parse(kFull);
    CHECK(cfg.data_path == std::filesystem::path("/base/panel.csv"));
    CHECK(cfg.schema.unit_tr == "West Germany");
    CHECK(cfg.schema.unit_co == std::vector<std::string>{"USA", "UK", "Austria"});
    CHECK(cfg.schema.features == std::vector<std::string>{"gdp", "trade"});
    CHECK(cfg.schema.period_pre.size() == 31);
    CHECK(cfg.schema.period_post == std::vector<long>{1991, 1992, 1993, 1994, 1995, 2000});
    REQUIRE(cfg.build.cov_adj.size() == 2);
    CHECK(cfg.build.cov_adj[0] == std::vector<CovariateTerm>{CovariateTerm::Constant, CovariateTerm::Trend});
    CHECK(cfg.build.cov_adj[1] == std::vector<CovariateTerm>{CovariateTerm::Trend});

    REQUIRE(cfg.constraints.size() == 3);
    CHECK(cfg.labels == std::vector<std::string>{"simplex", "ball", "ridge"});
    CHECK(cfg.constraints[1].p == Norm::L2);
    CHECK(*cfg.constraints[1].Q == 0.5);
    CHECK_FALSE(cfg.constraints[1].nonnegative());
    CHECK_FALSE(cfg.constraints[2].Q.has_value());

    const UncertaintyConfig& u = cfg.uncertainty;
    CHECK(u.u_order == 2);
    CHECK(u.u_sigma == VarianceCorrection::HC3);
    CHECK(u.e_method == OosMethod::Qreg);
    CHECK(u.e_alpha == 0.1);
    CHECK(u.sims == 300);
    CHECK(u.cores == 2);
    CHECK(u.seed == 17);
    CHECK(u.joint);
    CHECK(*u.L == 3);
    CHECK(u.sens_scales == std::vector<double>{0.5, 1.0, 2.0});
    REQUIRE(u.w_bounds);
    CHECK((*u.w_bounds)[0].lower == -1.0);
    CHECK(cfg.out_dir == std::filesystem::path("/base/results"));
    CHECK_FALSE(cfg.emit.csv);
    CHECK(cfg.emit.json);
    CHECK_NOTHROW(cfg.validate());
  }

  TEST_CASE("defaults") {
    const RunConfig cfg = parse("[data]\npath = x.csv\n");
    REQUIRE(cfg.constraints.size() == 1);
    CHECK(cfg.labels[0] == "simplex");
    CHECK(cfg.uncertainty.sims == 1000);
    CHECK(cfg.uncertainty.u_alpha == 0.05);
    CHECK(cfg.uncertainty.e_alpha == 0.05);
  }

  TEST_CASE("configuration errors") {
    CHECK(code_of([] { parse("[data]\nbogus = 1\n"); }) == ErrorCode::ConfigError);
    CHECK(code_of([] { parse("[mystery]\na = 1\n"); }) == ErrorCode::ConfigError);
    CHECK(code_of([] { parse("[uncertainty]\nsims = many\n"); }) == ErrorCode::ConfigError);
    CHECK(code_of([] { parse("[constraint]\nname = simplex\np = L2\n"); }) == ErrorCode::InconsistentSpec);
  }

  TEST_CASE("empty donor list fails before any computation") {
    RunConfig cfg = parse(kFull);
    cfg.schema.unit_co.clear();
    cfg.data_path = "/nonexistent/never/read.csv";
    CHECK(code_of([&] { run(cfg); }) == ErrorCode::ConfigError);
  }

  TEST_CASE("five presets give five result sets") {
    const auto dir = testing::scratch_dir("config_five");
    FactorDgp dgp;
    dgp.J = 6;
    dgp.T0 = 40;
    dgp.T1 = 3;
    RunConfig cfg = testing::synthetic_run_config(testing::write_synthetic_csv(dir, dgp, 9), dgp);
    cfg.constraints.clear();
    cfg.labels.clear();
    for (Preset p : {Preset::Simplex, Preset::Lasso, Preset::Ridge, Preset::Ols, Preset::L1L2}) {
      cfg.constraints.push_back(preset(p));
      cfg.labels.push_back(to_string(p));
    }
    cfg.uncertainty.sims = 40;
    const ResultsBundle b = run(cfg);
    REQUIRE(b.runs.size() == 5);
    for (std::size_t i = 0; i < 5; ++i) {
      CHECK(b.runs[i].label == cfg.labels[i]);
      if (b.runs[i].error) {
        // Only an empty L1-L2 set may fail, and it is reported as a numerical error.
        CHECK(b.runs[i].label == "L1-L2");
        CHECK(is_numerical(b.runs[i].error->code()));
      } else {
        REQUIRE(b.runs[i].uncertainty);
        CHECK(b.runs[i].uncertainty->coverage == doctest::Approx(0.9));
      }
    }
  }

  TEST_CASE("missing pre-period entries are reported") {
    const auto dir = testing::scratch_dir("config_missing");
    FactorDgp dgp;
    dgp.J = 4;
    dgp.T0 = 20;
    dgp.T1 = 2;
    const auto csv = testing::write_synthetic_csv(dir, dgp, 3);
    std::ifstream in(csv);
    std::stringstream buf;
    buf << in.rdbuf();
    std::string text = buf.str();
    const std::string key = "\ndonor2,5,";
    const auto at = text.find(key);
    REQUIRE(at != std::string::npos);
    const auto end = text.find('\n', at + 1);
    text.replace(at, end - at, "\ndonor2,5,NA");
    std::ofstream(csv) << text;
    RunConfig cfg = testing::synthetic_run_config(csv, dgp);
    cfg.run_uncertainty = false;
    const ResultsBundle b = run(cfg);
    CHECK(b.missing.dropped_pre == std::vector<long>{5});
    CHECK(b.matrices.T0 == 19);
    CHECK_FALSE(b.diag.warnings.empty());
  }
}
