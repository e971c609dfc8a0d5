#pragma once

#include "scpi/conic.hpp"
#include "scpi/constraints.hpp"

#include <Eigen/Dense>

#include <string>
#include <vector>

namespace scpi {

struct QpSolution {
  Eigen::VectorXd x;
  double objective = 0.0;
  SolveStatus status = SolveStatus::MaxIter;
  /// Residuals of the scaled conic problem actually solved (zero for closed-form paths).
  KktResiduals kkt;
  int iterations = 0;
  std::vector<std::string> notes;
};

/// min (A - Bw - Cr)' diag(V) (A - Bw - Cr) over the set described by `cs`, beta = (w', r')'.
/// Throws Infeasible or NumericalFailure when no certified optimum is found.
QpSolution solve_wls(const Eigen::VectorXd& A, const Eigen::MatrixXd& B, const Eigen::MatrixXd& C,
                     const Eigen::VectorXd& V, const ConstraintSystem& cs, const SolverSettings& settings = {});

enum class Sense { Min, Max };

/// Repeated optimization of a linear functional over
///   { delta : center + delta satisfies `cs`, delta' Qhat delta - 2 G' delta <= 0 }
/// for varying directions c and vectors G. Constraints of `cs` are evaluated at center + delta,
/// so an equality whose bound equals its value at `center` keeps delta = 0 feasible.
/// Equality constraints on the L2 norm are relaxed to the corresponding ball.
class LevelSetProblem {
 public:
  LevelSetProblem(const Eigen::MatrixXd& Qhat, const ConstraintSystem& cs, const Eigen::VectorXd& center,
                  const SolverSettings& settings = {});

  /// Optimal value of c'delta. Status Unbounded means the value is +/-infinity.
  QpSolution solve(const Eigen::VectorXd& c, const Eigen::VectorXd& G, Sense sense) const;

  std::size_t dim() const { return static_cast<std::size_t>(Qhat_.rows()); }

 private:
  Eigen::MatrixXd Qhat_;
  Eigen::VectorXd scale_;      // delta = diag(scale) * xi before the per-draw magnitude
  Eigen::MatrixXd L_;          // L'L = diag(scale) Qhat diag(scale)
  Eigen::MatrixXd null_;       // orthonormal basis of ker(Qhat)
  bool unconstrained_;
  Eigen::MatrixXd Qpinv_;      // pseudo-inverse of Qhat (closed-form path)
  // Constraint rows over (delta, aux), before variable scaling.
  Eigen::MatrixXd Aeq_;
  Eigen::VectorXd beq_;
  Eigen::MatrixXd Gin_;
  Eigen::VectorXd hin_;
  std::vector<std::pair<Eigen::MatrixXd, Eigen::VectorXd>> soc_;
  std::size_t n_aux_ = 0;
  SolverSettings settings_;
};

/// Convenience wrapper around a single LevelSetProblem solve.
QpSolution solve_linear_over_level_set(const Eigen::VectorXd& c, const Eigen::MatrixXd& Qhat, const Eigen::VectorXd& G,
                                       const ConstraintSystem& cs, const Eigen::VectorXd& center, Sense sense,
                                       const SolverSettings& settings = {});

}  // namespace scpi
