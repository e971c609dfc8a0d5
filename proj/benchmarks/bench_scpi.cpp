#include "scpi/estimator.hpp"
#include "scpi/qp.hpp"
#include "scpi/synthetic.hpp"
#include "scpi/uncertainty.hpp"

#include <benchmark/benchmark.h>

#include <random>

using namespace scpi;

namespace {

ScMatrices factor_matrices(std::size_t J, std::size_t T0, std::size_t T1) {
  FactorDgp dgp;
  dgp.J = J;
  dgp.T0 = T0;
  dgp.T1 = T1;
  return build_matrices(simulate_factor_panel(dgp, 11).panel, {});
}

}  // namespace

static void BM_FitSimplex(benchmark::State& state) {
  const ScMatrices m = factor_matrices(static_cast<std::size_t>(state.range(0)), 100, 5);
  const ConstraintSystem cs = materialize(preset(Preset::Simplex), m.J, m.KM());
  for (auto _ : state) {
    QpSolution s = solve_wls(m.A, m.B, m.C, m.V, cs);
    benchmark::DoNotOptimize(s.x.data());
  }
  state.SetComplexityN(state.range(0));
}
BENCHMARK(BM_FitSimplex)->RangeMultiplier(2)->Range(4, 64)->Complexity();

static void BM_FitLasso(benchmark::State& state) {
  const ScMatrices m = factor_matrices(static_cast<std::size_t>(state.range(0)), 100, 5);
  const ConstraintSystem cs = materialize(preset(Preset::Lasso, 1.0), m.J, m.KM());
  for (auto _ : state) {
    QpSolution s = solve_wls(m.A, m.B, m.C, m.V, cs);
    benchmark::DoNotOptimize(s.x.data());
  }
}
BENCHMARK(BM_FitLasso)->RangeMultiplier(2)->Range(4, 32);

static void BM_LevelSetSimplex(benchmark::State& state) {
  const auto d = state.range(0);
  std::mt19937_64 rng(5);
  std::normal_distribution<double> z;
  Eigen::MatrixXd X(3 * d, d);
  for (Eigen::Index i = 0; i < X.rows(); ++i)
    for (Eigen::Index j = 0; j < d; ++j) X(i, j) = z(rng);
  const Eigen::MatrixXd Q = X.transpose() * X / static_cast<double>(X.rows());
  const Eigen::VectorXd center = Eigen::VectorXd::Constant(d, 1.0 / static_cast<double>(d));
  const LevelSetProblem lsp(Q, materialize(preset(Preset::Simplex), static_cast<std::size_t>(d), 0), center);
  Eigen::VectorXd G(d), c(d);
  for (Eigen::Index j = 0; j < d; ++j) {
    G(j) = z(rng);
    c(j) = z(rng);
  }
  for (auto _ : state) {
    QpSolution s = lsp.solve(c, G, Sense::Max);
    benchmark::DoNotOptimize(s.objective);
  }
}
BENCHMARK(BM_LevelSetSimplex)->RangeMultiplier(2)->Range(4, 32);

static void BM_InSampleSimulation(benchmark::State& state) {
  const ScMatrices m = factor_matrices(8, 100, 5);
  const FitResult f = fit(m, preset(Preset::Simplex));
  UncertaintyConfig cfg;
  cfg.sims = static_cast<std::size_t>(state.range(0));
  cfg.cores = static_cast<unsigned>(state.range(1));
  Diagnostics d;
  const InSampleModel model = build_in_sample_model(m, f, cfg, d);
  for (auto _ : state) {
    InSampleBounds b = in_sample_bounds(m, f, cfg, model, d);
    benchmark::DoNotOptimize(b.M1_L.data());
  }
}
BENCHMARK(BM_InSampleSimulation)->Args({200, 1})->Args({200, 4})->Unit(benchmark::kMillisecond)->UseRealTime();

BENCHMARK_MAIN();
