#include "scpi/synthetic.hpp"

#include <CLI11.hpp>

#include <fstream>
#include <iostream>

int main(int argc, char** argv) {
  CLI::App app{"Write a simulated long-format panel from a linear factor model"};
  scpi::FactorDgp dgp;
  std::uint64_t seed = 1;
  double effect = 0.0;
  std::string out = "-";
  app.add_option("--donors", dgp.J, "number of donor units")->check(CLI::PositiveNumber);
  app.add_option("--pre", dgp.T0, "pre-treatment periods")->check(CLI::PositiveNumber);
  app.add_option("--post", dgp.T1, "post-treatment periods")->check(CLI::PositiveNumber);
  app.add_option("--noise", dgp.treated_noise, "treated-unit noise sd");
  app.add_option("--effect", effect, "constant treatment effect");
  app.add_option("--seed", seed, "random seed");
  app.add_option("-o,--output", out, "output CSV ('-' for stdout)");
  CLI11_PARSE(app, argc, argv);

  dgp.tau = Eigen::VectorXd::Constant(static_cast<Eigen::Index>(dgp.T1), effect);
  const scpi::SyntheticPanel sp = scpi::simulate_factor_panel(dgp, seed);
  if (out == "-") {
    scpi::write_panel_csv(sp.panel, std::cout);
  } else {
    std::ofstream f(out);
    if (!f) {
      std::cerr << "cannot write " << out << '\n';
      return 1;
    }
    scpi::write_panel_csv(sp.panel, f);
  }
  return 0;
}
