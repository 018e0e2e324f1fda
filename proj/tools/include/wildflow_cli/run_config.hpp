#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>

#include "wildflow/errors.hpp"
#include "wildflow/eval.hpp"
#include "wildflow/flowmatch.hpp"
#include "wildflow/pipeline.hpp"
#include "wildflow/synthgen.hpp"

namespace wildflow::cli {

/// Malformed or unknown entry in a run configuration file.
class ConfigError : public InvalidArgument {
 public:
  using InvalidArgument::InvalidArgument;
};

/// Inference settings applied to flow checkpoints after training.
struct FlowSettings {
  int steps = 20;
  Integrator scheme = Integrator::euler;
  int mc_samples = 8;
  RiskAverage average = RiskAverage::probability;
  /// Unset: derived from the training seed.
  std::optional<std::uint64_t> seed;
};

struct EvalSettings {
  /// 0 selects the last year present in the dataset.
  int test_year = 0;
  int train_window_years = 3;
  RegionOptions regions;
};

struct RunConfig {
  std::filesystem::path data_dir;
  std::filesystem::path out_dir;
  ModelKind model = ModelKind::wildflow;
  GeneratorConfig generator = default_config();
  TrainConfig train;
  FlowSettings flow;
  EvalSettings eval;
};

/// INI with sections [paths] [model] [generator] [train] [flow] [eval].
/// Unknown sections or keys and unparsable values throw ConfigError.
RunConfig parse_run_config(std::istream& in, const std::string& source = "<config>");
RunConfig load_run_config(const std::filesystem::path& path);
/// Defaults when `path` is empty.
RunConfig load_run_config_or_default(const std::optional<std::filesystem::path>& path);

/// Every key with its resolved value; parse_run_config(write) round-trips.
std::string to_ini(const RunConfig& config);

/// Applies [flow] to a trained model's inference settings.
void apply_flow_settings(TrainedModel& model, const FlowSettings& flow);

}  // namespace wildflow::cli
