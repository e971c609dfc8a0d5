#include "scpi/linalg.hpp"
#include "scpi/qp.hpp"
#include "scpi/uncertainty.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <limits>
#include <random>
#include <thread>

namespace scpi {
namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
constexpr double kInf = std::numeric_limits<double>::infinity();

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

struct DrawResult {
  std::vector<double> lo;
  std::vector<double> hi;
  bool failed = false;
  std::size_t unbounded = 0;
};

bool has_l2_term(const ConstraintSystem& cs) {
  auto is_l2 = [](const ConstraintTerm& t) { return t.f == TermFunction::L2; };
  return std::any_of(cs.eq.begin(), cs.eq.end(), is_l2) || std::any_of(cs.in.begin(), cs.in.end(), is_l2);
}

/// Independent generator per draw, derived from (seed, draw index) only.
std::mt19937_64 draw_engine(std::uint64_t seed, std::size_t s) {
  const auto s64 = static_cast<std::uint64_t>(s);
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(s64), static_cast<std::uint32_t>(s64 >> 32)};
  return std::mt19937_64(seq);
}

}  // namespace

InSampleBounds in_sample_bounds(const ScMatrices& m, const FitResult& fit, const UncertaintyConfig& cfg,
                                const InSampleModel& model, Diagnostics& diag) {
  const auto T1 = static_cast<std::size_t>(m.T1);
  const auto d = static_cast<Index>(m.d());
  const std::size_t S = cfg.sims;
  const std::size_t L = cfg.joint ? cfg.L.value_or(T1) : 0;

  InSampleBounds out;
  out.L = L;
  out.draws = S;
  out.M1_L = VectorXd::Constant(static_cast<Index>(T1), kNaN);
  out.M1_U = VectorXd::Constant(static_cast<Index>(T1), kNaN);
  out.eps = VectorXd::Zero(static_cast<Index>(T1));

  std::vector<std::size_t> periods;
  for (std::size_t t = 0; t < T1; ++t)
    if (m.prediction_available[t]) periods.push_back(t);

  const bool nonlinear = has_l2_term(fit.system);
  const double bnorm = fit.beta_hat.norm();
  if (nonlinear && bnorm > 0.0)
    for (std::size_t t : periods)
      out.eps(static_cast<Index>(t)) =
          m.P.row(static_cast<Index>(t)).lpNorm<1>() * model.rho * model.rho / (2.0 * bnorm);

  const MatrixXd root = psd_sqrt(model.Sigma_hat);
  const LevelSetProblem problem(model.Qhat, model.delta_star.system, fit.beta_hat, cfg.solver);

  std::vector<DrawResult> results(S);
  auto run_draw = [&](std::size_t s) {
    DrawResult& r = results[s];
    r.lo.assign(T1, kNaN);
    r.hi.assign(T1, kNaN);
    std::mt19937_64 eng = draw_engine(cfg.seed, s);
    std::normal_distribution<double> normal(0.0, 1.0);
    VectorXd xi(d);
    for (Index i = 0; i < d; ++i) xi(i) = normal(eng);
    const VectorXd G = root * xi;
    for (std::size_t t : periods) {
      const VectorXd c = m.P.row(static_cast<Index>(t)).transpose().cwiseQuotient(model.D);
      const QpSolution lo = problem.solve(c, G, Sense::Min);
      const QpSolution hi = problem.solve(c, G, Sense::Max);
      for (const QpSolution* q : {&lo, &hi}) {
        if (q->status == SolveStatus::Unbounded) ++r.unbounded;
        else if (q->status != SolveStatus::Optimal) r.failed = true;
      }
      if (r.failed) return;
      r.lo[t] = lo.objective;
      r.hi[t] = hi.objective;
    }
  };

  const unsigned workers = std::max(1u, std::min<unsigned>(cfg.cores, static_cast<unsigned>(std::max<std::size_t>(S, 1))));
  if (workers == 1) {
    for (std::size_t s = 0; s < S; ++s) run_draw(s);
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (unsigned w = 0; w < workers; ++w)
      pool.emplace_back([&] {
        for (std::size_t s = next.fetch_add(1); s < S; s = next.fetch_add(1)) run_draw(s);
      });
    for (auto& th : pool) th.join();
  }

  std::vector<std::vector<double>> lo_t(T1), hi_t(T1);
  std::vector<double> lo_joint, hi_joint;
  for (const DrawResult& r : results) {
    out.unbounded_solves += r.unbounded;
    if (r.failed) {
      ++out.failed_draws;
      continue;
    }
    double jl = kInf, ju = -kInf;
    for (std::size_t t : periods) {
      const double e = out.eps(static_cast<Index>(t));
      lo_t[t].push_back(r.lo[t]);
      hi_t[t].push_back(r.hi[t]);
      if (t < L) {
        jl = std::min(jl, r.lo[t] - e);
        ju = std::max(ju, r.hi[t] + e);
      }
    }
    if (L > 0) {
      lo_joint.push_back(jl);
      hi_joint.push_back(ju);
    }
  }
  if (out.failed_draws > 0)
    diag.warn("in-sample simulation: " + std::to_string(out.failed_draws) + " of " + std::to_string(S) +
              " draws failed and were dropped");
  if (out.unbounded_solves > 0)
    diag.warn("UnboundedBound: " + std::to_string(out.unbounded_solves) +
              " simulated problems were unbounded; bounds set to infinity");
  if (out.failed_draws == S && S > 0)
    throw Error(ErrorCode::NumericalFailure, "uncertainty", "every simulation draw failed");

  const double a = cfg.u_alpha;
  const double eps_scale = cfg.eps_per_period ? 1.0 : 0.0;
  for (std::size_t t : periods) {
    const double e = eps_scale * out.eps(static_cast<Index>(t));
    out.M1_L(static_cast<Index>(t)) = quantile(lo_t[t], a / 2.0) - e;
    out.M1_U(static_cast<Index>(t)) = quantile(hi_t[t], 1.0 - a / 2.0) + e;
  }
  if (L > 0 && !lo_joint.empty()) out.joint = Bounds{quantile(lo_joint, a / 2.0), quantile(hi_joint, 1.0 - a / 2.0)};
  if (nonlinear) {
    if (cfg.eps_per_period) diag.note("per-period in-sample bounds widened for the nonlinear constraint");
    if (L > 0) diag.note("joint in-sample bounds widened for the nonlinear constraint");
  }
  return out;
}

}  // namespace scpi
