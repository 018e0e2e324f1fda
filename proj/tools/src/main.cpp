#include <algorithm>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "wildflow/errors.hpp"
#include "wildflow_cli/commands.hpp"

namespace fs = std::filesystem;
using namespace wildflow;

namespace {

int fail(int code, std::string message) {
  std::replace(message.begin(), message.end(), '\n', ' ');
  std::cerr << 'E' << code << ": " << message << '\n';
  return code;
}

fs::path pick(const std::string& flag, const fs::path& fallback, const char* what) {
  if (!flag.empty()) return flag;
  if (!fallback.empty()) return fallback;
  throw cli::ConfigError(std::string("no ") + what + " given (flag or [paths] entry)");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Occupancy risk forecasting with latent composite flow matching"};
  app.require_subcommand(1);
  app.set_version_flag("--version", "wildflow 0.1.0");

  std::string config_path, data_dir, out_dir, model, checkpoint, report_a, report_b;
  int test_year = 0, year = 0, month = 0;
  double quantile = 0.1;

  auto add_config = [&](CLI::App* cmd) {
    cmd->add_option("--config", config_path, "Run configuration (INI); built-in defaults when omitted")
        ->capture_default_str();
  };
  auto add_data = [&](CLI::App* cmd) {
    cmd->add_option("--data", data_dir, "Dataset directory; defaults to [paths] data_dir")->capture_default_str();
  };
  auto add_out = [&](CLI::App* cmd, const std::string& what) {
    cmd->add_option("--out", out_dir, what + "; defaults to [paths] out_dir")->capture_default_str();
  };
  auto add_test_year = [&](CLI::App* cmd) {
    cmd->add_option("--test-year", test_year, "Test year; 0 uses [eval] test_year, then the last year in the data")
        ->capture_default_str();
  };

  CLI::App* gen = app.add_subcommand("gen", "Generate a synthetic park");
  add_config(gen);
  add_out(gen, "Output directory");

  CLI::App* train = app.add_subcommand("train", "Train one model and write a checkpoint");
  add_config(train);
  add_data(train);
  add_out(train, "Checkpoint directory");
  train->add_option("--model", model,
                    "wildflow|logreg|mlp|gnn|no_composite_base|no_detection_head; defaults to [model] kind")
      ->capture_default_str();
  add_test_year(train);

  CLI::App* predict = app.add_subcommand("predict", "Score every cell for one month");
  predict->add_option("--checkpoint", checkpoint, "Checkpoint directory")->required();
  add_data(predict);
  predict->add_option("--year", year, "Calendar year")->required();
  predict->add_option("--month", month, "Calendar month (1-12)")->required()->check(CLI::Range(1, 12));
  predict->add_option("--out", out_dir, "Output CSV path")->required();
  add_config(predict);

  CLI::App* eval = app.add_subcommand("eval", "Evaluate a checkpoint on the test year");
  eval->add_option("--checkpoint", checkpoint, "Checkpoint directory")->required();
  add_data(eval);
  add_test_year(eval);
  add_out(eval, "Report directory");
  add_config(eval);

  CLI::App* ablate = app.add_subcommand("ablate", "Train and evaluate the ablation variants");
  add_config(ablate);
  add_data(ablate);
  add_out(ablate, "Output directory");
  add_test_year(ablate);

  CLI::App* study = app.add_subcommand("case-study", "Compare feature medians where report A beats report B");
  study->add_option("--report-a", report_a, "Report directory of the model of interest")->required();
  study->add_option("--report-b", report_b, "Report directory of the reference model")->required();
  add_data(study);
  study->add_option("--quantile", quantile, "Fraction of lowest log-loss differences kept")
      ->capture_default_str()
      ->check(CLI::Range(0.0, 1.0));
  study->add_option("--out", out_dir, "Output CSV path")->required();
  add_config(study);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    return fail(1, e.what());
  }

  try {
    cli::thread_limit();
    cli::RunConfig config =
        cli::load_run_config_or_default(config_path.empty() ? std::nullopt : std::optional<fs::path>(config_path));
    if (test_year != 0) config.eval.test_year = test_year;
    if (!model.empty()) config.model = model_kind_from_string(model);

    if (gen->parsed()) {
      cli::cmd_gen(config, pick(out_dir, config.out_dir, "output directory"));
    } else if (train->parsed()) {
      cli::cmd_train(config, pick(data_dir, config.data_dir, "data directory"),
                     pick(out_dir, config.out_dir, "output directory"));
    } else if (predict->parsed()) {
      cli::cmd_predict(checkpoint, pick(data_dir, config.data_dir, "data directory"), year, month, out_dir);
    } else if (eval->parsed()) {
      cli::cmd_eval(config, checkpoint, pick(data_dir, config.data_dir, "data directory"),
                    pick(out_dir, config.out_dir, "output directory"));
    } else if (ablate->parsed()) {
      cli::cmd_ablate(config, pick(data_dir, config.data_dir, "data directory"),
                      pick(out_dir, config.out_dir, "output directory"));
    } else if (study->parsed()) {
      cli::cmd_case_study(report_a, report_b, pick(data_dir, config.data_dir, "data directory"), quantile, out_dir);
    }
  } catch (const SchemaMismatch& e) {
    return fail(2, e.what());
  } catch (const InvalidArgument& e) {
    return fail(1, e.what());
  } catch (const ParseError& e) {
    return fail(2, e.what());
  } catch (const NumericError& e) {
    return fail(3, e.what());
  } catch (const UndefinedMetric& e) {
    return fail(3, e.what());
  } catch (const MissingArtifact& e) {
    return fail(4, e.what());
  } catch (const fs::filesystem_error& e) {
    return fail(4, e.what());
  } catch (const std::exception& e) {
    return fail(3, e.what());
  }
  return 0;
}
