#pragma once

#include <filesystem>
#include <optional>

#include "wildflow/park_data.hpp"

namespace wildflow {

/// File locations of a dataset on disk.
///
///   cells.csv         cell_id,row,col,<static features...>
///   dynamics.csv      cell_id,year,month,<dynamic features...>
///   visits.csv        cell_id,year,month,visit_index,effort_km,detected
///   ground_truth.csv  cell_id,year,month,z            (synthetic parks only)
struct DatasetPaths {
  std::filesystem::path cells;
  std::filesystem::path dynamics;
  std::filesystem::path visits;
  std::optional<std::filesystem::path> ground_truth;

  /// Standard file names inside `dir`. ground_truth is set only if the file exists.
  static DatasetPaths in_directory(const std::filesystem::path& dir);
};

/// Throws ParseError (file, line, column) on any schema violation and
/// MissingArtifact when a required file cannot be opened.
ParkDataset load_dataset(const DatasetPaths& paths);
ParkDataset load_dataset(const std::filesystem::path& dir);

/// Writes the CSVs; ground_truth.csv only when the dataset carries it.
/// Numbers use the shortest representation that round-trips exactly.
void save_dataset(const ParkDataset& dataset, const std::filesystem::path& dir);

}  // namespace wildflow
