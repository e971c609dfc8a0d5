#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <limits>
#include <optional>
#include <string>
#include <vector>

namespace scpi {

enum class Norm { None, L1, L2, L1L2 };
enum class Direction { Equal, LessEqual, EqualLessEqual };
enum class Preset { Ols, Simplex, Lasso, Ridge, L1L2 };

std::string to_string(Norm p);
std::string to_string(Direction dir);
std::string to_string(Preset name);

/// Feasible set for the donor weights. Covariate coefficients are never constrained.
struct ConstraintSpec {
  Norm p = Norm::L1;
  Direction dir = Direction::Equal;
  std::optional<double> Q = 1.0;
  std::optional<double> Q2;
  /// Common lower bound on the weights: 0 or -infinity.
  double lb = 0.0;
  std::optional<Preset> name;

  bool nonnegative() const { return lb == 0.0; }
  /// Preset name, or "custom".
  std::string label() const;
  /// One-line description of the set, e.g. "{w >= 0 : ||w||_1 = 1}".
  std::string describe() const;
};

/// Loosely typed options as they come from a config file or the command line.
struct RawConstraintOptions {
  std::optional<std::string> name;
  std::optional<std::string> p;
  std::optional<std::string> dir;
  std::optional<double> Q;
  std::optional<double> Q2;
  std::optional<double> lb;
};

ConstraintSpec from_options(const RawConstraintOptions& raw);
ConstraintSpec preset(Preset name, std::optional<double> Q = std::nullopt,
                      std::optional<double> Q2 = std::nullopt);
std::optional<Preset> parse_preset(const std::string& s);

/// Scalar function of the weight block underlying one constraint.
enum class TermFunction {
  Sum,       // sum_j w_j
  NegCoord,  // -w_j
  L1,        // ||w||_1
  L2,        // ||w||_2
};

/// One constraint f(beta) - bound {==, <=} 0.
struct ConstraintTerm {
  TermFunction f;
  std::size_t index = 0;  // coordinate for NegCoord
  double bound = 0.0;
  bool equality = false;

  double eval(const Eigen::VectorXd& beta, std::size_t J) const;
  /// Gradient (a subgradient for L1, with 0 at zero coordinates). Zero vector for L2 at w = 0.
  Eigen::VectorXd gradient(const Eigen::VectorXd& beta, std::size_t J) const;
  bool linear() const { return f == TermFunction::Sum || f == TermFunction::NegCoord; }
};

/// W x R written as m_eq(beta) = 0, m_in(beta) <= 0 over beta = (w', r')'.
struct ConstraintSystem {
  std::size_t J = 0;
  std::size_t d = 0;
  std::vector<ConstraintTerm> eq;
  std::vector<ConstraintTerm> in;

  std::size_t d_eq() const { return eq.size(); }
  std::size_t d_in() const { return in.size(); }
  Eigen::VectorXd m_eq(const Eigen::VectorXd& beta) const;
  Eigen::VectorXd m_in(const Eigen::VectorXd& beta) const;
  Eigen::VectorXd grad_in(std::size_t j, const Eigen::VectorXd& beta) const;
  bool contains(const Eigen::VectorXd& beta, double tol = 1e-9) const;
  bool all_linear() const;
  bool has_nonlinear_inequality() const;
  bool empty() const { return eq.empty() && in.empty(); }
};

ConstraintSystem materialize(const ConstraintSpec& spec, std::size_t J, std::size_t KM);

}  // namespace scpi
