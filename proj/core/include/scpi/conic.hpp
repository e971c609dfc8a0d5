#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <iosfwd>
#include <string>
#include <vector>

namespace scpi {

/// Cone K = R^l_+ x SOC(q_1) x ... x SOC(q_k); rows of G are ordered the same way.
struct ConeDims {
  std::size_t nonneg = 0;
  std::vector<std::size_t> soc;

  std::size_t rows() const;
  /// Degree of the cone: l + number of SOC blocks.
  std::size_t degree() const { return nonneg + soc.size(); }
};

/// minimize 1/2 x'Px + q'x  subject to  Gx + s = h, s in K,  Ax = b.
struct ConicProblem {
  Eigen::MatrixXd P;  // n x n, or empty for a linear objective
  Eigen::VectorXd q;
  Eigen::MatrixXd A;  // p x n, may have zero rows
  Eigen::VectorXd b;
  Eigen::MatrixXd G;  // m x n
  Eigen::VectorXd h;
  ConeDims dims;

  std::size_t n() const { return static_cast<std::size_t>(q.size()); }
  /// Throws NumericalFailure on inconsistent shapes or an asymmetric P.
  void validate() const;
};

struct SolverSettings {
  double abstol = 1e-8;
  double reltol = 1e-8;
  double feastol = 1e-8;
  /// When rounding stalls progress, the best iterate is accepted if residuals and gap are below this.
  double reduced_tol = 1e-6;
  int max_iter = 200;
  /// Iterates with ||x|| above this are reported as unbounded.
  double divergence = 1e12;
  std::ostream* log = nullptr;
};

enum class SolveStatus { Optimal, Infeasible, Unbounded, MaxIter };
std::string to_string(SolveStatus s);

struct KktResiduals {
  double primal = 0.0;  // max(||Ax - b||_inf, ||Gx + s - h||_inf)
  double dual = 0.0;    // ||Px + q + A'y + G'z||_inf
  double gap = 0.0;     // s'z
  double max() const;
};

struct ConicSolution {
  SolveStatus status = SolveStatus::MaxIter;
  Eigen::VectorXd x;
  Eigen::VectorXd y;
  Eigen::VectorXd z;
  Eigen::VectorXd s;
  double objective = 0.0;
  KktResiduals kkt;
  int iterations = 0;
};

/// Dense primal-dual interior-point method with Nesterov-Todd scaling and
/// Mehrotra predictor-corrector steps.
ConicSolution solve_conic(const ConicProblem& prob, const SolverSettings& settings = {});

/// KKT residuals of (x, y, z, s) for `prob`, independent of how the point was obtained.
KktResiduals kkt_residuals(const ConicProblem& prob, const Eigen::VectorXd& x, const Eigen::VectorXd& y,
                           const Eigen::VectorXd& z, const Eigen::VectorXd& s);

}  // namespace scpi
