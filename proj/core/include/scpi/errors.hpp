#pragma once

#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace scpi {

enum class ErrorCode {
  // panel ingestion
  SchemaError,
  DuplicateKey,
  UnknownUnit,
  EmptyPeriodSet,
  AllPrePeriodsDropped,
  CollinearCovariates,
  RankDeficientC,
  // constraints
  InconsistentSpec,
  MissingQ,
  // solver
  Infeasible,
  NumericalFailure,
  // estimator
  DegenerateOLS,
  // uncertainty
  ZeroDonorVariance,
  MissingBounds,
  InvalidConfig,
  // front end
  ConfigError,
};

std::string_view to_string(ErrorCode code);

/// Failures of the numerics (as opposed to invalid input or configuration).
bool is_numerical(ErrorCode code);

/// Every failure raised by the library carries a code and the module that raised it.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, std::string module, const std::string& what);

  ErrorCode code() const noexcept { return code_; }
  const std::string& module() const noexcept { return module_; }

 private:
  ErrorCode code_;
  std::string module_;
};

/// Non-fatal conditions (leverage capping, floored variances, dropped draws...).
/// Collected rather than printed so callers can surface them in reports.
struct Diagnostics {
  std::vector<std::string> warnings;
  std::vector<std::string> notes;

  void warn(std::string msg) { warnings.push_back(std::move(msg)); }
  void note(std::string msg) { notes.push_back(std::move(msg)); }
  void merge(const Diagnostics& other);
};

}  // namespace scpi
