#pragma once

#include "scpi/constraints.hpp"
#include "scpi/estimator.hpp"
#include "scpi/panel.hpp"
#include "scpi/uncertainty.hpp"

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace scpi {

struct EmitFlags {
  bool json = true;
  bool csv = true;
  bool plotspec = true;
  bool summary = true;
};

struct RunConfig {
  std::filesystem::path data_path;
  PanelSchema schema;
  BuildOptions build;
  /// Constraint sets to fit, in order. Labels default to the preset name.
  std::vector<ConstraintSpec> constraints;
  std::vector<std::string> labels;
  UncertaintyConfig uncertainty;
  /// Post period shown in the sensitivity panel; first available period when unset.
  std::optional<long> sens_period;
  std::filesystem::path out_dir = "scpi_out";
  EmitFlags emit;
  bool dump_matrices = false;
  bool run_uncertainty = true;

  /// Throws ConfigError when the configuration cannot describe a run.
  void validate() const;
};

/// INI document with sections [data], [constraint...] (one or more), [uncertainty], [output].
/// Keys may use '.' or '_' (u.order == u_order). Relative data paths resolve against `base_dir`.
RunConfig parse_config(std::istream& in, const std::filesystem::path& base_dir = {});
RunConfig load_config(const std::filesystem::path& path);

/// "1960-1990", "1960,1965,1970" or a mix of both.
std::vector<long> parse_periods(const std::string& s);

struct ConstraintRun {
  std::string label;
  /// Set when this constraint set failed; the other fields are then empty.
  std::optional<Error> error;
  FitResult fit;
  std::optional<UncertaintyResult> uncertainty;
};

struct ResultsBundle {
  ScMatrices matrices;
  MissingReport missing;
  std::vector<ConstraintRun> runs;
  Diagnostics diag;
};

/// Ingest, fit and (optionally) quantify uncertainty for every constraint set.
/// Ingestion and configuration errors are thrown; a numerical failure in one constraint set is
/// recorded in its ConstraintRun and the remaining sets still run.
ResultsBundle run(const RunConfig& cfg);

}  // namespace scpi
