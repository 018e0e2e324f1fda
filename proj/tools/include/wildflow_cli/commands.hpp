#pragma once

#include <filesystem>
#include <optional>
#include <string>

#include "wildflow_cli/run_config.hpp"

namespace wildflow::cli {

namespace fs = std::filesystem;

/// Worker cap from WILDFLOW_THREADS (default 1). Throws ConfigError on a bad value.
int thread_limit();

/// Writes the dataset CSVs plus generator_manifest.json into `out`.
void cmd_gen(const RunConfig& config, const fs::path& out);

/// Trains on the window before the test year and writes a checkpoint into `out`.
void cmd_train(const RunConfig& config, const fs::path& data, const fs::path& out);

/// Per-cell r and p_any for one month, using that month's recorded visits as the plan.
void cmd_predict(const fs::path& checkpoint, const fs::path& data, int year, int month, const fs::path& out);

/// report.json and report_cells.csv for the test year.
void cmd_eval(const RunConfig& config, const fs::path& checkpoint, const fs::path& data, const fs::path& out);

/// Trains and evaluates wildflow, no_composite_base and no_detection_head, one directory each,
/// plus ablation_summary.csv.
void cmd_ablate(const RunConfig& config, const fs::path& data, const fs::path& out);

/// Feature medians of the cell-months where report A beats report B by the widest log-loss margin.
void cmd_case_study(const fs::path& report_a, const fs::path& report_b, const fs::path& data, double quantile,
                    const fs::path& out);

/// Test year from the config, or the dataset's last year when unset.
int resolve_test_year(const RunConfig& config, const ParkDataset& dataset);

}  // namespace wildflow::cli
