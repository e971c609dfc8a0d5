#include "scpi/config.hpp"
#include "scpi/report.hpp"

#include <CLI11.hpp>

#include <iostream>

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitNumerical = 3;

int exit_code(scpi::ErrorCode code) { return scpi::is_numerical(code) ? kExitNumerical : kExitConfig; }

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Synthetic control prediction intervals"};
  std::string config_path;
  std::optional<std::string> data_path;
  std::optional<std::string> out_dir;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> sims;
  std::optional<unsigned> cores;
  std::vector<std::string> constraints;
  bool joint = false;
  bool quiet = false;
  bool dump = false;

  app.add_option("--config", config_path, "INI run configuration")->required()->check(CLI::ExistingFile);
  app.add_option("--data", data_path, "panel CSV (overrides [data] path)");
  app.add_option("--out", out_dir, "output directory");
  app.add_option("--seed", seed, "simulation seed");
  app.add_option("--sims", sims, "number of simulation draws");
  app.add_option("--cores", cores, "worker threads for the simulation");
  app.add_option("--constraint", constraints, "preset to fit (repeatable): ols, simplex, lasso, ridge, L1-L2");
  app.add_flag("--joint", joint, "also compute simultaneous intervals");
  app.add_flag("--quiet", quiet, "no console summary");
  app.add_flag("--dump-matrices", dump, "write A, B, C, P as CSV");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : kExitConfig;
  }

  try {
    scpi::RunConfig cfg = scpi::load_config(config_path);
    if (data_path) cfg.data_path = *data_path;
    if (out_dir) cfg.out_dir = *out_dir;
    if (seed) cfg.uncertainty.seed = *seed;
    if (sims) cfg.uncertainty.sims = *sims;
    if (cores) cfg.uncertainty.cores = *cores;
    if (joint) cfg.uncertainty.joint = true;
    if (dump) cfg.dump_matrices = true;
    if (!constraints.empty()) {
      cfg.constraints.clear();
      cfg.labels.clear();
      for (const auto& name : constraints) {
        scpi::RawConstraintOptions raw;
        raw.name = name;
        cfg.constraints.push_back(scpi::from_options(raw));
        cfg.labels.push_back(cfg.constraints.back().label());
      }
    }

    const scpi::ResultsBundle bundle = scpi::run(cfg);
    scpi::write_outputs(bundle, cfg, scpi::utc_timestamp());
    if (!quiet) {
      std::cout << scpi::summary_text(bundle, cfg);
      std::cout << "outputs written to " << cfg.out_dir.string() << '\n';
    }
    for (const auto& r : bundle.runs)
      if (r.error) {
        std::cerr << "error: '" << r.label << "': " << r.error->what() << '\n';
        return kExitNumerical;
      }
    return 0;
  } catch (const scpi::Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return exit_code(e.code());
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitNumerical;
  }
}
