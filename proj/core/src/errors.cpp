#include "scpi/errors.hpp"

namespace scpi {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::SchemaError: return "SchemaError";
    case ErrorCode::DuplicateKey: return "DuplicateKey";
    case ErrorCode::UnknownUnit: return "UnknownUnit";
    case ErrorCode::EmptyPeriodSet: return "EmptyPeriodSet";
    case ErrorCode::AllPrePeriodsDropped: return "AllPrePeriodsDropped";
    case ErrorCode::CollinearCovariates: return "CollinearCovariates";
    case ErrorCode::RankDeficientC: return "RankDeficientC";
    case ErrorCode::InconsistentSpec: return "InconsistentSpec";
    case ErrorCode::MissingQ: return "MissingQ";
    case ErrorCode::Infeasible: return "Infeasible";
    case ErrorCode::NumericalFailure: return "NumericalFailure";
    case ErrorCode::DegenerateOLS: return "DegenerateOLS";
    case ErrorCode::ZeroDonorVariance: return "ZeroDonorVariance";
    case ErrorCode::MissingBounds: return "MissingBounds";
    case ErrorCode::InvalidConfig: return "InvalidConfig";
    case ErrorCode::ConfigError: return "ConfigError";
  }
  return "Unknown";
}

bool is_numerical(ErrorCode code) {
  switch (code) {
    case ErrorCode::Infeasible:
    case ErrorCode::NumericalFailure:
    case ErrorCode::DegenerateOLS:
    case ErrorCode::ZeroDonorVariance: return true;
    default: return false;
  }
}

Error::Error(ErrorCode code, std::string module, const std::string& what)
    : std::runtime_error("[" + module + "] " + std::string(to_string(code)) + ": " + what),
      code_(code),
      module_(std::move(module)) {}

void Diagnostics::merge(const Diagnostics& other) {
  warnings.insert(warnings.end(), other.warnings.begin(), other.warnings.end());
  notes.insert(notes.end(), other.notes.begin(), other.notes.end());
}

}  // namespace scpi
