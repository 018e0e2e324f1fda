#include "wildflow_cli/run_config.hpp"

#include <charconv>
#include <fstream>
#include <functional>
#include <sstream>
#include <vector>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

namespace wildflow::cli {

namespace pt = boost::property_tree;

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

template <class T>
T parse_number(const std::string& raw) {
  const std::string s = trim(raw);
  T value{};
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), value);
  if (s.empty() || ec != std::errc() || ptr != s.data() + s.size()) {
    throw ConfigError("'" + s + "' is not a valid number");
  }
  return value;
}

int parse_int(const std::string& s) { return parse_number<int>(s); }
double parse_double(const std::string& s) { return parse_number<double>(s); }
std::uint64_t parse_u64(const std::string& s) { return parse_number<std::uint64_t>(s); }

bool parse_bool(const std::string& raw) {
  const std::string s = trim(raw);
  if (s == "true" || s == "1") return true;
  if (s == "false" || s == "0") return false;
  throw ConfigError("'" + s + "' is not a boolean (true/false)");
}

std::vector<double> parse_list(const std::string& raw) {
  std::vector<double> out;
  std::stringstream ss(raw);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(parse_double(item));
  if (out.empty()) throw ConfigError("empty list");
  return out;
}

std::string fmt(double v) {
  char buf[32];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}

std::string fmt(const std::vector<double>& v) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) out += (i ? "," : "") + fmt(v[i]);
  return out;
}

using Setter = std::function<void(RunConfig&, const std::string&)>;
using Getter = std::function<std::string(const RunConfig&)>;

struct Key {
  std::string name;
  Setter set;
  Getter get;
};

struct Section {
  std::string name;
  std::vector<Key> keys;
};

#define WF_INT(section, field, key) \
  Key { key, [](RunConfig& c, const std::string& v) { c.section.field = parse_int(v); }, \
        [](const RunConfig& c) { return std::to_string(c.section.field); } }
#define WF_REAL(section, field, key) \
  Key { key, [](RunConfig& c, const std::string& v) { c.section.field = parse_double(v); }, \
        [](const RunConfig& c) { return fmt(c.section.field); } }

const std::vector<Section>& schema() {
  static const std::vector<Section> sections = {
      {"paths",
       {Key{"data_dir", [](RunConfig& c, const std::string& v) { c.data_dir = trim(v); },
            [](const RunConfig& c) { return c.data_dir.string(); }},
        Key{"out_dir", [](RunConfig& c, const std::string& v) { c.out_dir = trim(v); },
            [](const RunConfig& c) { return c.out_dir.string(); }}}},
      {"model",
       {Key{"kind", [](RunConfig& c, const std::string& v) { c.model = model_kind_from_string(trim(v)); },
            [](const RunConfig& c) { return to_string(c.model); }}}},
      {"generator",
       {WF_INT(generator, rows, "rows"),
        WF_INT(generator, cols, "cols"),
        WF_INT(generator, months, "months"),
        WF_INT(generator, start_year, "start_year"),
        WF_INT(generator, static_dim, "static_dim"),
        WF_INT(generator, dynamic_dim, "dynamic_dim"),
        Key{"weights", [](RunConfig& c, const std::string& v) { c.generator.weights = parse_list(v); },
            [](const RunConfig& c) { return fmt(c.generator.weights); }},
        WF_REAL(generator, beta_det, "beta_det"),
        WF_REAL(generator, beta_disp, "beta_disp"),
        WF_REAL(generator, length_scale, "length_scale"),
        WF_REAL(generator, field_sd, "field_sd"),
        WF_REAL(generator, ar_coefficient, "ar_coefficient"),
        WF_REAL(generator, alpha0, "alpha0"),
        WF_REAL(generator, alpha1, "alpha1"),
        WF_REAL(generator, alpha2, "alpha2"),
        WF_REAL(generator, patrol_intensity, "patrol_intensity"),
        WF_REAL(generator, effort_mean_km, "effort_mean_km"),
        Key{"patrol_mode",
            [](RunConfig& c, const std::string& v) { c.generator.patrol_mode = patrol_mode_from_string(trim(v)); },
            [](const RunConfig& c) { return to_string(c.generator.patrol_mode); }},
        WF_REAL(generator, reactive_share, "reactive_share"),
        Key{"seed", [](RunConfig& c, const std::string& v) { c.generator.seed = parse_u64(v); },
            [](const RunConfig& c) { return std::to_string(c.generator.seed); }}}},
      {"train",
       {WF_INT(train, stage1_epochs, "stage1_epochs"),
        WF_REAL(train, stage1_lr, "stage1_lr"),
        WF_INT(train, stage2_epochs, "stage2_epochs"),
        Key{"stage2_lr_grid", [](RunConfig& c, const std::string& v) { c.train.stage2_lr_grid = parse_list(v); },
            [](const RunConfig& c) { return fmt(c.train.stage2_lr_grid); }},
        WF_INT(train, hidden, "hidden"),
        WF_INT(train, layers, "layers"),
        WF_REAL(train, grad_clip, "grad_clip"),
        WF_REAL(train, sigma0, "sigma0"),
        WF_REAL(train, weight_decay, "weight_decay"),
        WF_INT(train, logreg_max_steps, "logreg_max_steps"),
        WF_REAL(train, logreg_lr, "logreg_lr"),
        WF_REAL(train, logreg_tolerance, "logreg_tolerance"),
        WF_INT(train, mlp_epochs, "mlp_epochs"),
        WF_REAL(train, mlp_lr, "mlp_lr"),
        WF_INT(train, mlp_batch, "mlp_batch"),
        WF_INT(train, mlp_hidden, "mlp_hidden"),
        WF_INT(train, mlp_layers, "mlp_layers"),
        WF_REAL(train, mlp_dropout, "mlp_dropout"),
        WF_REAL(train, mlp_weight_decay, "mlp_weight_decay"),
        WF_INT(train, gnn_epochs, "gnn_epochs"),
        WF_REAL(train, gnn_lr, "gnn_lr"),
        Key{"seed", [](RunConfig& c, const std::string& v) { c.train.seed = parse_u64(v); },
            [](const RunConfig& c) { return std::to_string(c.train.seed); }}}},
      {"flow",
       {WF_INT(flow, steps, "steps"),
        Key{"scheme", [](RunConfig& c, const std::string& v) { c.flow.scheme = integrator_from_string(trim(v)); },
            [](const RunConfig& c) { return to_string(c.flow.scheme); }},
        WF_INT(flow, mc_samples, "mc_samples"),
        Key{"average",
            [](RunConfig& c, const std::string& v) { c.flow.average = risk_average_from_string(trim(v)); },
            [](const RunConfig& c) { return to_string(c.flow.average); }},
        Key{"seed",
            [](RunConfig& c, const std::string& v) {
              if (trim(v) == "derived") {
                c.flow.seed.reset();
              } else {
                c.flow.seed = parse_u64(v);
              }
            },
            [](const RunConfig& c) { return c.flow.seed ? std::to_string(*c.flow.seed) : std::string("derived"); }}}},
      {"eval",
       {WF_INT(eval, test_year, "test_year"),
        WF_INT(eval, train_window_years, "train_window_years"),
        WF_INT(eval, regions.seed_count, "seed_count"),
        WF_INT(eval, regions.max_region_size, "max_region_size"),
        WF_INT(eval, regions.history_months, "history_months"),
        Key{"monthly_regions", [](RunConfig& c, const std::string& v) { c.eval.regions.monthly = parse_bool(v); },
            [](const RunConfig& c) { return std::string(c.eval.regions.monthly ? "true" : "false"); }}}},
  };
  return sections;
}

#undef WF_INT
#undef WF_REAL

void validate(const RunConfig& c) {
  c.generator.validate();
  c.train.validate();
  FlowConfig f;
  f.steps = c.flow.steps;
  f.mc_samples = c.flow.mc_samples;
  f.sigma0 = c.train.sigma0;
  f.validate();
  if (c.eval.train_window_years < 1) throw ConfigError("[eval] train_window_years must be >= 1");
  if (c.eval.regions.seed_count < 1) throw ConfigError("[eval] seed_count must be >= 1");
  if (c.eval.regions.max_region_size < 1) throw ConfigError("[eval] max_region_size must be >= 1");
  if (c.eval.regions.history_months < 1) throw ConfigError("[eval] history_months must be >= 1");
}

}  // namespace

RunConfig parse_run_config(std::istream& in, const std::string& source) {
  pt::ptree tree;
  try {
    pt::read_ini(in, tree);
  } catch (const pt::ini_parser_error& e) {
    throw ConfigError(source + ":" + std::to_string(e.line()) + ": " + e.message());
  }
  RunConfig config;
  for (const auto& [section_name, section_tree] : tree) {
    const Section* section = nullptr;
    for (const Section& s : schema())
      if (s.name == section_name) section = &s;
    if (section == nullptr) throw ConfigError(source + ": unknown section [" + section_name + "]");
    if (!section_tree.data().empty()) throw ConfigError(source + ": key '" + section_name + "' outside a section");
    for (const auto& [key, value] : section_tree) {
      const Key* k = nullptr;
      for (const Key& candidate : section->keys)
        if (candidate.name == key) k = &candidate;
      if (k == nullptr) throw ConfigError(source + ": unknown key '" + key + "' in [" + section_name + "]");
      try {
        k->set(config, value.data());
      } catch (const InvalidArgument& e) {
        throw ConfigError(source + ": [" + section_name + "] " + key + ": " + e.what());
      }
    }
  }
  try {
    validate(config);
  } catch (const ConfigError&) {
    throw;
  } catch (const InvalidArgument& e) {
    throw ConfigError(source + ": " + e.what());
  }
  return config;
}

RunConfig load_run_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw MissingArtifact("config file not found: " + path.string());
  return parse_run_config(in, path.string());
}

RunConfig load_run_config_or_default(const std::optional<std::filesystem::path>& path) {
  return path ? load_run_config(*path) : RunConfig{};
}

std::string to_ini(const RunConfig& config) {
  std::string out;
  for (const Section& s : schema()) {
    out += "[" + s.name + "]\n";
    for (const Key& k : s.keys) out += k.name + " = " + k.get(config) + "\n";
    out += "\n";
  }
  out.pop_back();
  return out;
}

void apply_flow_settings(TrainedModel& model, const FlowSettings& flow) {
  model.flow.steps = flow.steps;
  model.flow.scheme = flow.scheme;
  model.flow.mc_samples = flow.mc_samples;
  model.flow.average = flow.average;
  if (flow.seed) model.flow.seed = *flow.seed;
  model.flow.validate();
}

}  // namespace wildflow::cli
