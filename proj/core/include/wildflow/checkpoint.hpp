#pragma once

#include <filesystem>
#include <span>
#include <vector>

#include "wildflow/pipeline.hpp"

namespace wildflow {

/// Writes model.json (manifest), params.bin (little-endian f64 in manifest
/// order) and train_log.csv into `dir`.
void save_checkpoint(const TrainedModel& model, const std::filesystem::path& dir);

/// Throws MissingArtifact for absent files and ParseError for malformed ones.
TrainedModel load_checkpoint(const std::filesystem::path& dir);

void write_train_log(std::span<const LogEntry> log, const std::filesystem::path& path);

}  // namespace wildflow
