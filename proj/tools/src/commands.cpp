#include "wildflow_cli/commands.hpp"

#include <charconv>
#include <cstdlib>
#include <fstream>
#include <future>
#include <vector>

#include <json.hpp>

#include "wildflow/checkpoint.hpp"
#include "wildflow/dataset_io.hpp"
#include "wildflow/eval.hpp"
#include "wildflow/synthgen.hpp"

namespace wildflow::cli {

namespace {

std::string fmt(double v) {
  char buf[32];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}

std::ofstream open_output(const fs::path& path) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw MissingArtifact("cannot write " + path.string());
  return out;
}

nlohmann::ordered_json generator_json(const GeneratorConfig& g) {
  nlohmann::ordered_json j;
  j["rows"] = g.rows;
  j["cols"] = g.cols;
  j["months"] = g.months;
  j["start_year"] = g.start_year;
  j["static_dim"] = g.static_dim;
  j["dynamic_dim"] = g.dynamic_dim;
  j["weights"] = g.weights;
  j["beta_det"] = g.beta_det;
  j["beta_disp"] = g.beta_disp;
  j["length_scale"] = g.length_scale;
  j["field_sd"] = g.field_sd;
  j["ar_coefficient"] = g.ar_coefficient;
  j["alpha0"] = g.alpha0;
  j["alpha1"] = g.alpha1;
  j["alpha2"] = g.alpha2;
  j["patrol_intensity"] = g.patrol_intensity;
  j["effort_mean_km"] = g.effort_mean_km;
  j["patrol_mode"] = to_string(g.patrol_mode);
  j["reactive_share"] = g.reactive_share;
  j["seed"] = g.seed;
  return j;
}

TrainedModel train_for_eval(ModelKind kind, const RunConfig& config, const ParkDataset& dataset) {
  const int test_year = resolve_test_year(config, dataset);
  const TrainTestSplit split = window_split(dataset, test_year, config.eval.train_window_years);
  TrainedModel model = train_model(kind, split.train, config.train);
  apply_flow_settings(model, config.flow);
  return model;
}

}  // namespace

int thread_limit() {
  const char* raw = std::getenv("WILDFLOW_THREADS");
  if (raw == nullptr || *raw == '\0') return 1;
  const std::string s(raw);
  int value = 0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), value);
  if (ec != std::errc() || ptr != s.data() + s.size() || value < 1) {
    throw ConfigError("WILDFLOW_THREADS must be a positive integer, got '" + s + "'");
  }
  return value;
}

int resolve_test_year(const RunConfig& config, const ParkDataset& dataset) {
  if (config.eval.test_year != 0) return config.eval.test_year;
  const std::vector<int> years = dataset.years();
  if (years.empty()) throw InvalidArgument("dataset has no months");
  return years.back();
}

void cmd_gen(const RunConfig& config, const fs::path& out) {
  const ParkDataset dataset = generate_park(config.generator);
  save_dataset(dataset, out);
  nlohmann::ordered_json manifest;
  manifest["generator"] = generator_json(config.generator);
  manifest["cells"] = dataset.cell_count();
  manifest["month_count"] = dataset.month_count();
  manifest["visits"] = dataset.visits().size();
  manifest["files"] = {"cells.csv", "dynamics.csv", "visits.csv", "ground_truth.csv"};
  std::ofstream f = open_output(out / "generator_manifest.json");
  f << manifest.dump(2) << '\n';
}

void cmd_train(const RunConfig& config, const fs::path& data, const fs::path& out) {
  const ParkDataset dataset = load_dataset(data);
  const TrainedModel model = train_for_eval(config.model, config, dataset);
  save_checkpoint(model, out);
  std::ofstream f = open_output(out / "run_config.ini");
  f << to_ini(config);
}

void cmd_predict(const fs::path& checkpoint, const fs::path& data, int year, int month, const fs::path& out) {
  const TrainedModel model = load_checkpoint(checkpoint);
  const ParkDataset dataset = load_dataset(data);
  const auto index = dataset.month_index({year, month});
  if (!index) {
    throw InvalidArgument("month " + std::to_string(year) + "-" + std::to_string(month) + " is not in the dataset");
  }
  const MonthPrediction pred = predict_month(model, dataset, *index, realized_visits(dataset, *index));
  std::ofstream f = open_output(out);
  f << "cell_id,row,col,r,p_any\n";
  const GridGraph& graph = dataset.graph();
  for (int i = 0; i < dataset.cell_count(); ++i) {
    f << i << ',' << graph.row_of(i) << ',' << graph.col_of(i) << ',' << fmt(pred.r[i]) << ',' << fmt(pred.p_any[i])
      << '\n';
  }
}

void cmd_eval(const RunConfig& config, const fs::path& checkpoint, const fs::path& data, const fs::path& out) {
  const TrainedModel model = load_checkpoint(checkpoint);
  const ParkDataset dataset = load_dataset(data);
  write_report(evaluate(model, dataset, resolve_test_year(config, dataset), config.eval.regions), out);
}

void cmd_ablate(const RunConfig& config, const fs::path& data, const fs::path& out) {
  const ParkDataset dataset = load_dataset(data);
  const int test_year = resolve_test_year(config, dataset);
  struct Variant {
    std::string name;
    ModelKind kind;
  };
  const std::vector<Variant> variants = {{"wildflow", ModelKind::wildflow},
                                         {"no_composite_base", ModelKind::wildflow_no_base},
                                         {"no_detection_head", ModelKind::wildflow_no_det}};
  std::vector<EvalReport> reports(variants.size());
  auto run = [&](std::size_t v) {
    const TrainedModel model = train_for_eval(variants[v].kind, config, dataset);
    save_checkpoint(model, out / variants[v].name);
    reports[v] = evaluate(model, dataset, test_year, config.eval.regions);
    write_report(reports[v], out / variants[v].name);
  };
  const std::size_t workers = static_cast<std::size_t>(thread_limit());
  for (std::size_t begin = 0; begin < variants.size(); begin += workers) {
    std::vector<std::future<void>> batch;
    for (std::size_t v = begin; v < std::min(variants.size(), begin + workers); ++v) {
      batch.push_back(std::async(workers == 1 ? std::launch::deferred : std::launch::async, run, v));
    }
    for (auto& f : batch) f.get();
  }
  std::ofstream f = open_output(out / "ablation_summary.csv");
  f << "variant,model_kind,test_year,aupr,mean_log_loss\n";
  for (std::size_t v = 0; v < variants.size(); ++v) {
    f << variants[v].name << ',' << reports[v].model_kind << ',' << test_year << ',' << fmt(reports[v].aupr) << ','
      << fmt(reports[v].mean_log_loss) << '\n';
  }
}

void cmd_case_study(const fs::path& report_a, const fs::path& report_b, const fs::path& data, double quantile,
                    const fs::path& out) {
  const EvalReport a = read_report(report_a);
  const EvalReport b = read_report(report_b);
  const ParkDataset dataset = load_dataset(data);
  std::vector<std::string> features = dataset.columns().static_names;
  for (const std::string& name : dataset.columns().dynamic_names) features.push_back(name);
  features.push_back("lag_effort");
  features.push_back("adjacent_effort");
  const CaseStudy study = case_study(a, b, dataset, features, quantile);
  if (out.has_parent_path()) fs::create_directories(out.parent_path());
  write_case_study(study, out);
}

}  // namespace wildflow::cli
