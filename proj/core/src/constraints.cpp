#include "scpi/constraints.hpp"

#include "scpi/errors.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <sstream>

namespace scpi {
namespace {

constexpr const char* kModule = "constraint_spec";
constexpr double kInf = std::numeric_limits<double>::infinity();

[[noreturn]] void inconsistent(const std::string& msg) {
  throw Error(ErrorCode::InconsistentSpec, kModule, msg);
}

std::string lower(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return std::tolower(c); });
  return s;
}

Norm parse_norm(const std::string& raw) {
  const auto s = lower(raw);
  if (s == "no norm" || s == "none" || s == "no_norm") return Norm::None;
  if (s == "l1") return Norm::L1;
  if (s == "l2") return Norm::L2;
  if (s == "l1-l2" || s == "l1l2") return Norm::L1L2;
  inconsistent("unknown norm '" + raw + "'");
}

Direction parse_direction(const std::string& s) {
  if (s == "==") return Direction::Equal;
  if (s == "<=") return Direction::LessEqual;
  if (s == "==/<=") return Direction::EqualLessEqual;
  inconsistent("unknown direction '" + s + "'");
}

void validate(const ConstraintSpec& spec) {
  if (spec.lb != 0.0 && spec.lb != -kInf) inconsistent("lb must be 0 or -Inf");
  if (spec.Q && !(*spec.Q > 0.0)) inconsistent("Q must be positive");
  if (spec.Q2 && !(*spec.Q2 > 0.0)) inconsistent("Q2 must be positive");
  switch (spec.p) {
    case Norm::None:
      if (spec.Q || spec.Q2) inconsistent("Q/Q2 given without a norm");
      break;
    case Norm::L1:
    case Norm::L2:
      if (spec.Q2) inconsistent("Q2 is only used by L1-L2");
      if (spec.dir == Direction::EqualLessEqual) inconsistent("'==/<=' is only valid with L1-L2");
      if (spec.p == Norm::L1 && spec.dir == Direction::Equal && !spec.nonnegative())
        inconsistent("an L1 sphere with lb=-Inf is not convex");
      if (spec.p == Norm::L2 && spec.dir == Direction::Equal && spec.nonnegative())
        inconsistent("an L2 sphere restricted to the nonnegative orthant is not supported");
      break;
    case Norm::L1L2:
      if (spec.dir != Direction::EqualLessEqual) inconsistent("L1-L2 requires dir '==/<='");
      if (!spec.nonnegative()) inconsistent("L1-L2 with lb=-Inf puts the weights on an L1 sphere, which is not convex");
      break;
  }
}

}  // namespace

std::string to_string(Norm p) {
  switch (p) {
    case Norm::None: return "no norm";
    case Norm::L1: return "L1";
    case Norm::L2: return "L2";
    case Norm::L1L2: return "L1-L2";
  }
  return "?";
}

std::string to_string(Direction dir) {
  switch (dir) {
    case Direction::Equal: return "==";
    case Direction::LessEqual: return "<=";
    case Direction::EqualLessEqual: return "==/<=";
  }
  return "?";
}

std::string to_string(Preset name) {
  switch (name) {
    case Preset::Ols: return "ols";
    case Preset::Simplex: return "simplex";
    case Preset::Lasso: return "lasso";
    case Preset::Ridge: return "ridge";
    case Preset::L1L2: return "L1-L2";
  }
  return "?";
}

std::optional<Preset> parse_preset(const std::string& raw) {
  const auto s = lower(raw);
  if (s == "ols") return Preset::Ols;
  if (s == "simplex") return Preset::Simplex;
  if (s == "lasso") return Preset::Lasso;
  if (s == "ridge") return Preset::Ridge;
  if (s == "l1-l2" || s == "l1l2") return Preset::L1L2;
  return std::nullopt;
}

std::string ConstraintSpec::label() const { return name ? to_string(*name) : "custom"; }

std::string ConstraintSpec::describe() const {
  std::ostringstream os;
  os << "{w" << (nonnegative() ? " >= 0" : "");
  auto q = [](const std::optional<double>& v) {
    std::ostringstream s;
    if (v) {
      s << *v;
    } else {
      s << "auto";
    }
    return s.str();
  };
  switch (p) {
    case Norm::None: os << " in R^J}"; break;
    case Norm::L1: os << " : ||w||_1 " << to_string(dir) << " " << q(Q) << "}"; break;
    case Norm::L2: os << " : ||w||_2 " << to_string(dir) << " " << q(Q) << "}"; break;
    case Norm::L1L2: os << " : ||w||_1 == " << q(Q) << ", ||w||_2 <= " << q(Q2) << "}"; break;
  }
  return os.str();
}

ConstraintSpec preset(Preset name, std::optional<double> Q, std::optional<double> Q2) {
  ConstraintSpec s;
  s.name = name;
  switch (name) {
    case Preset::Ols:
      s.p = Norm::None;
      s.dir = Direction::LessEqual;
      s.Q.reset();
      s.lb = -kInf;
      break;
    case Preset::Simplex:
      s.p = Norm::L1;
      s.dir = Direction::Equal;
      s.Q = Q.value_or(1.0);
      s.lb = 0.0;
      break;
    case Preset::Lasso:
      s.p = Norm::L1;
      s.dir = Direction::LessEqual;
      s.Q = Q;
      s.lb = -kInf;
      break;
    case Preset::Ridge:
      s.p = Norm::L2;
      s.dir = Direction::LessEqual;
      s.Q = Q;
      s.lb = -kInf;
      break;
    case Preset::L1L2:
      s.p = Norm::L1L2;
      s.dir = Direction::EqualLessEqual;
      s.Q = Q;
      s.Q2 = Q2;
      s.lb = 0.0;
      break;
  }
  if (name == Preset::Ols && (Q || Q2)) inconsistent("ols takes no Q/Q2");
  if (name != Preset::L1L2 && Q2) inconsistent("Q2 is only used by L1-L2");
  validate(s);
  return s;
}

ConstraintSpec from_options(const RawConstraintOptions& raw) {
  if (raw.name) {
    auto name = parse_preset(*raw.name);
    if (!name) inconsistent("unknown constraint name '" + *raw.name + "'");
    ConstraintSpec s = preset(*name, raw.Q, raw.Q2);
    // Manual fields next to a preset are accepted only when they agree with it.
    if (raw.p && parse_norm(*raw.p) != s.p) inconsistent("p conflicts with preset " + *raw.name);
    if (raw.dir && parse_direction(*raw.dir) != s.dir) inconsistent("dir conflicts with preset " + *raw.name);
    if (raw.lb && *raw.lb != s.lb) inconsistent("lb conflicts with preset " + *raw.name);
    return s;
  }

  ConstraintSpec s;
  s.name.reset();
  s.p = raw.p ? parse_norm(*raw.p) : Norm::L1;
  s.lb = raw.lb.value_or(0.0);
  s.Q = raw.Q;
  s.Q2 = raw.Q2;
  if (raw.dir) {
    s.dir = parse_direction(*raw.dir);
  } else {
    s.dir = s.p == Norm::L1L2 ? Direction::EqualLessEqual : Direction::LessEqual;
  }
  if (s.p != Norm::None && !s.Q) throw Error(ErrorCode::MissingQ, kModule, "Q is required for p = " + to_string(s.p));
  if (s.p == Norm::L1L2 && !s.Q2) throw Error(ErrorCode::MissingQ, kModule, "Q2 is required for L1-L2");
  validate(s);
  return s;
}

double ConstraintTerm::eval(const Eigen::VectorXd& beta, std::size_t J) const {
  const auto w = beta.head(static_cast<Eigen::Index>(J));
  switch (f) {
    case TermFunction::Sum: return w.sum() - bound;
    case TermFunction::NegCoord: return -w(static_cast<Eigen::Index>(index)) - bound;
    case TermFunction::L1: return w.lpNorm<1>() - bound;
    case TermFunction::L2: return w.norm() - bound;
  }
  return 0.0;
}

Eigen::VectorXd ConstraintTerm::gradient(const Eigen::VectorXd& beta, std::size_t J) const {
  Eigen::VectorXd g = Eigen::VectorXd::Zero(beta.size());
  const auto n = static_cast<Eigen::Index>(J);
  const auto w = beta.head(n);
  switch (f) {
    case TermFunction::Sum: g.head(n).setOnes(); break;
    case TermFunction::NegCoord: g(static_cast<Eigen::Index>(index)) = -1.0; break;
    case TermFunction::L1:
      for (Eigen::Index j = 0; j < n; ++j) g(j) = w(j) > 0.0 ? 1.0 : (w(j) < 0.0 ? -1.0 : 0.0);
      break;
    case TermFunction::L2: {
      const double nrm = w.norm();
      if (nrm > 0.0) g.head(n) = w / nrm;
      break;
    }
  }
  return g;
}

Eigen::VectorXd ConstraintSystem::m_eq(const Eigen::VectorXd& beta) const {
  Eigen::VectorXd v(static_cast<Eigen::Index>(eq.size()));
  for (std::size_t i = 0; i < eq.size(); ++i) v(static_cast<Eigen::Index>(i)) = eq[i].eval(beta, J);
  return v;
}

Eigen::VectorXd ConstraintSystem::m_in(const Eigen::VectorXd& beta) const {
  Eigen::VectorXd v(static_cast<Eigen::Index>(in.size()));
  for (std::size_t i = 0; i < in.size(); ++i) v(static_cast<Eigen::Index>(i)) = in[i].eval(beta, J);
  return v;
}

Eigen::VectorXd ConstraintSystem::grad_in(std::size_t j, const Eigen::VectorXd& beta) const {
  return in.at(j).gradient(beta, J);
}

bool ConstraintSystem::contains(const Eigen::VectorXd& beta, double tol) const {
  for (const auto& t : eq)
    if (std::abs(t.eval(beta, J)) > tol) return false;
  for (const auto& t : in)
    if (t.eval(beta, J) > tol) return false;
  return true;
}

bool ConstraintSystem::all_linear() const {
  auto lin = [](const ConstraintTerm& t) { return t.linear(); };
  return std::all_of(eq.begin(), eq.end(), lin) && std::all_of(in.begin(), in.end(), lin);
}

bool ConstraintSystem::has_nonlinear_inequality() const {
  return std::any_of(in.begin(), in.end(), [](const ConstraintTerm& t) { return !t.linear(); });
}

ConstraintSystem materialize(const ConstraintSpec& spec, std::size_t J, std::size_t KM) {
  validate(spec);
  ConstraintSystem cs;
  cs.J = J;
  cs.d = J + KM;
  if (spec.p != Norm::None && !spec.Q)
    throw Error(ErrorCode::MissingQ, kModule, "Q must be resolved before materializing " + spec.label());
  if (spec.p == Norm::L1L2 && !spec.Q2)
    throw Error(ErrorCode::MissingQ, kModule, "Q2 must be resolved before materializing L1-L2");

  auto sign_constraints = [&] {
    for (std::size_t j = 0; j < J; ++j) cs.in.push_back({TermFunction::NegCoord, j, 0.0, false});
  };

  switch (spec.p) {
    case Norm::None:
      if (spec.nonnegative()) sign_constraints();
      break;
    case Norm::L1:
      if (spec.nonnegative()) {
        // On the nonnegative orthant the L1 norm is the plain sum.
        if (spec.dir == Direction::Equal) {
          cs.eq.push_back({TermFunction::Sum, 0, *spec.Q, true});
        } else {
          cs.in.push_back({TermFunction::Sum, 0, *spec.Q, false});
        }
        sign_constraints();
      } else {
        cs.in.push_back({TermFunction::L1, 0, *spec.Q, false});
      }
      break;
    case Norm::L2:
      if (spec.dir == Direction::Equal) {
        cs.eq.push_back({TermFunction::L2, 0, *spec.Q, true});
      } else {
        cs.in.push_back({TermFunction::L2, 0, *spec.Q, false});
      }
      if (spec.nonnegative()) sign_constraints();
      break;
    case Norm::L1L2:
      cs.eq.push_back({TermFunction::Sum, 0, *spec.Q, true});
      sign_constraints();
      cs.in.push_back({TermFunction::L2, 0, *spec.Q2, false});
      break;
  }
  return cs;
}

}  // namespace scpi
