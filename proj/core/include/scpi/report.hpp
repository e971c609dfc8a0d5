#pragma once

#include "scpi/config.hpp"

#include <filesystem>
#include <string>

namespace scpi {

/// ISO-8601 UTC time, second resolution.
std::string utc_timestamp();

/// Full bundle as JSON. Non-finite numbers: NaN -> null, +/-inf -> "inf" / "-inf".
std::string results_json(const ResultsBundle& bundle, const RunConfig& cfg, const std::string& generated_at);

/// One row per (constraint, post period): constraint,period,tau_hat,lower,upper,M1_L,M1_U,M2_L,M2_U.
/// Missing values are written as NA.
std::string intervals_csv(const ResultsBundle& bundle);

/// Human-readable report, 6 significant digits.
std::string summary_text(const ResultsBundle& bundle, const RunConfig& cfg);

/// Declarative plot description (data + mark + encoding only).
std::string plotspec_json(const ResultsBundle& bundle, const RunConfig& cfg);

/// Writes the enabled outputs into cfg.out_dir (created if needed).
void write_outputs(const ResultsBundle& bundle, const RunConfig& cfg, const std::string& generated_at);

}  // namespace scpi
