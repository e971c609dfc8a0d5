#pragma once

#include "scpi/config.hpp"
#include "scpi/panel.hpp"
#include "scpi/synthetic.hpp"

#include <Eigen/Dense>

#include <filesystem>
#include <optional>
#include <string>

namespace scpi::testing {

/// Single-feature panel "y"; column 0 of each matrix is the treated unit, rows are periods.
/// Pre periods are numbered 1..T0 and post periods T0+1..T0+T1.
PanelData panel_from(const Eigen::MatrixXd& pre, const Eigen::MatrixXd& post);

/// System with the given A and B (single feature), optional constant, T1 post rows.
ScMatrices system_from(const Eigen::VectorXd& A, const Eigen::MatrixXd& B, bool constant = false,
                       const Eigen::MatrixXd& post = Eigen::MatrixXd());

PanelData load_csv_string(const std::string& csv, const PanelSchema& schema);

/// Location of the German reunification panel, if present.
/// SCPI_GERMANY_CSV overrides the bundled path.
std::optional<std::filesystem::path> germany_csv(const std::string& fallback);

/// Schema for the German panel: treated West Germany, 16 OECD donors, 1960-1990 / 1991-2003.
PanelSchema germany_schema(bool with_trade);

/// Writes a factor-model panel as long CSV (unit,time,y) and returns its path.
std::filesystem::path write_synthetic_csv(const std::filesystem::path& dir, const FactorDgp& dgp, std::uint64_t seed);

/// Run configuration for a panel written by write_synthetic_csv, simplex only, constant on.
RunConfig synthetic_run_config(const std::filesystem::path& csv, const FactorDgp& dgp);

/// Fresh scratch directory under the system temp directory.
std::filesystem::path scratch_dir(const std::string& name);

}  // namespace scpi::testing
