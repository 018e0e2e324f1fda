#include "wildflow/checkpoint.hpp"

#include <bit>
#include <cstdint>
#include <fstream>
#include <iterator>

#include <json.hpp>

#include "csv.hpp"
#include "wildflow/errors.hpp"

namespace wildflow {

namespace fs = std::filesystem;
using nlohmann::ordered_json;

namespace {

constexpr int kFormatVersion = 1;

ordered_json config_json(const TrainConfig& c) {
  ordered_json j;
  j["stage1_epochs"] = c.stage1_epochs;
  j["stage1_lr"] = c.stage1_lr;
  j["stage2_epochs"] = c.stage2_epochs;
  j["stage2_lr_grid"] = c.stage2_lr_grid;
  j["hidden"] = c.hidden;
  j["layers"] = c.layers;
  j["grad_clip"] = c.grad_clip;
  j["sigma0"] = c.sigma0;
  j["weight_decay"] = c.weight_decay;
  j["logreg_max_steps"] = c.logreg_max_steps;
  j["logreg_lr"] = c.logreg_lr;
  j["logreg_tolerance"] = c.logreg_tolerance;
  j["mlp_epochs"] = c.mlp_epochs;
  j["mlp_lr"] = c.mlp_lr;
  j["mlp_batch"] = c.mlp_batch;
  j["mlp_hidden"] = c.mlp_hidden;
  j["mlp_layers"] = c.mlp_layers;
  j["mlp_dropout"] = c.mlp_dropout;
  j["mlp_weight_decay"] = c.mlp_weight_decay;
  j["gnn_epochs"] = c.gnn_epochs;
  j["gnn_lr"] = c.gnn_lr;
  j["seed"] = c.seed;
  return j;
}

TrainConfig config_from_json(const nlohmann::json& j) {
  TrainConfig c;
  c.stage1_epochs = j.at("stage1_epochs").get<int>();
  c.stage1_lr = j.at("stage1_lr").get<double>();
  c.stage2_epochs = j.at("stage2_epochs").get<int>();
  c.stage2_lr_grid = j.at("stage2_lr_grid").get<std::vector<double>>();
  c.hidden = j.at("hidden").get<int>();
  c.layers = j.at("layers").get<int>();
  c.grad_clip = j.at("grad_clip").get<double>();
  c.sigma0 = j.at("sigma0").get<double>();
  c.weight_decay = j.at("weight_decay").get<double>();
  c.logreg_max_steps = j.at("logreg_max_steps").get<int>();
  c.logreg_lr = j.at("logreg_lr").get<double>();
  c.logreg_tolerance = j.at("logreg_tolerance").get<double>();
  c.mlp_epochs = j.at("mlp_epochs").get<int>();
  c.mlp_lr = j.at("mlp_lr").get<double>();
  c.mlp_batch = j.at("mlp_batch").get<int>();
  c.mlp_hidden = j.at("mlp_hidden").get<int>();
  c.mlp_layers = j.at("mlp_layers").get<int>();
  c.mlp_dropout = j.at("mlp_dropout").get<double>();
  c.mlp_weight_decay = j.at("mlp_weight_decay").get<double>();
  c.gnn_epochs = j.at("gnn_epochs").get<int>();
  c.gnn_lr = j.at("gnn_lr").get<double>();
  c.seed = j.at("seed").get<std::uint64_t>();
  return c;
}

ordered_json flow_json(const FlowConfig& f) {
  ordered_json j;
  j["sigma0"] = f.sigma0;
  j["steps"] = f.steps;
  j["scheme"] = to_string(f.scheme);
  j["mc_samples"] = f.mc_samples;
  j["seed"] = f.seed;
  j["average"] = to_string(f.average);
  return j;
}

FlowConfig flow_from_json(const nlohmann::json& j) {
  FlowConfig f;
  f.sigma0 = j.at("sigma0").get<double>();
  f.steps = j.at("steps").get<int>();
  f.scheme = integrator_from_string(j.at("scheme").get<std::string>());
  f.mc_samples = j.at("mc_samples").get<int>();
  f.seed = j.at("seed").get<std::uint64_t>();
  f.average = risk_average_from_string(j.at("average").get<std::string>());
  return f;
}

/// Allocates the bundles a kind carries, shaped from the manifest entries.
void allocate(TrainedModel& m, const nlohmann::json& entries) {
  auto shape_of = [&](const std::string& name) -> Tensor::Shape {
    for (const auto& e : entries)
      if (e.at("name").get<std::string>() == name) return e.at("shape").get<Tensor::Shape>();
    throw InvalidArgument("manifest lacks tensor '" + name + "'");
  };
  auto linear = [&](const std::string& p) {
    return LinearParams{Tensor(shape_of(p + ".weight")), Tensor(shape_of(p + ".bias"))};
  };
  auto gcn = [&](const std::string& p) {
    return GcnParams{Tensor(shape_of(p + ".w1")), Tensor(shape_of(p + ".b1")), Tensor(shape_of(p + ".w2")),
                     Tensor(shape_of(p + ".b2"))};
  };
  const bool flow = is_flow_kind(m.kind);
  if (m.kind == ModelKind::wildflow || m.kind == ModelKind::wildflow_no_det || m.kind == ModelKind::logreg)
    m.base = linear("base");
  if (m.kind != ModelKind::wildflow_no_det) m.detection = linear("detection");
  if (flow) {
    m.encoder = gcn("encoder");
    m.velocity = gcn("velocity");
  }
  if (m.kind == ModelKind::gnn) m.gnn = gcn("gnn");
  if (m.kind == ModelKind::mlp) {
    MlpParams mlp;
    for (int l = 1;; ++l) {
      const std::string w = "mlp.w" + std::to_string(l);
      bool present = false;
      for (const auto& e : entries) present = present || e.at("name").get<std::string>() == w;
      if (!present) break;
      mlp.weights.emplace_back(shape_of(w));
      mlp.biases.emplace_back(shape_of("mlp.b" + std::to_string(l)));
    }
    if (mlp.weights.empty()) throw InvalidArgument("manifest lacks mlp tensors");
    m.mlp = std::move(mlp);
  }
}

}  // namespace

void write_train_log(std::span<const LogEntry> log, const fs::path& path) {
  csv::Writer w(path);
  w.row("epoch", "stage", "loss");
  for (const LogEntry& e : log) w.row(e.epoch, e.stage, e.loss);
  w.close();
}

void save_checkpoint(const TrainedModel& model, const fs::path& dir) {
  model.validate();
  fs::create_directories(dir);
  ordered_json j;
  j["format_version"] = kFormatVersion;
  j["kind"] = to_string(model.kind);
  j["grid"] = {{"rows", model.grid_rows}, {"cols", model.grid_cols}};
  j["static_dim"] = model.static_dim;
  j["dynamic_dim"] = model.dynamic_dim;
  j["feature_names"] = model.feature_names;
  j["standardization"] = {{"mean", model.stats.mean}, {"sd", model.stats.sd}};
  j["train_config"] = config_json(model.train_config);
  j["flow"] = flow_json(model.flow);
  ordered_json tensors = ordered_json::array();
  std::size_t count = 0;
  for (const auto& [name, t] : model.tensors()) {
    tensors.push_back({{"name", name}, {"shape", t->shape()}, {"offset", count}});
    count += t->size();
  }
  j["tensors"] = tensors;
  j["param_count"] = count;
  {
    std::ofstream out(dir / "model.json", std::ios::binary);
    if (!out) throw MissingArtifact("cannot write " + (dir / "model.json").string());
    out << j.dump(2) << '\n';
  }
  {
    std::ofstream out(dir / "params.bin", std::ios::binary);
    if (!out) throw MissingArtifact("cannot write " + (dir / "params.bin").string());
    for (const auto& [name, t] : model.tensors()) {
      for (double v : t->values()) {
        const std::uint64_t bits = std::bit_cast<std::uint64_t>(v);
        char bytes[8];
        for (int b = 0; b < 8; ++b) bytes[b] = static_cast<char>((bits >> (8 * b)) & 0xFF);
        out.write(bytes, 8);
      }
    }
    if (!out) throw MissingArtifact("failed writing " + (dir / "params.bin").string());
  }
  write_train_log(model.log, dir / "train_log.csv");
}

TrainedModel load_checkpoint(const fs::path& dir) {
  const fs::path manifest = dir / "model.json";
  const fs::path params = dir / "params.bin";
  if (!fs::exists(manifest)) throw MissingArtifact("checkpoint manifest not found: " + manifest.string());
  if (!fs::exists(params)) throw MissingArtifact("checkpoint parameters not found: " + params.string());

  TrainedModel m;
  std::ifstream in(manifest, std::ios::binary);
  try {
    const nlohmann::json j = nlohmann::json::parse(in);
    if (j.at("format_version").get<int>() != kFormatVersion) {
      throw ParseError(manifest.string(), "unsupported format_version " + j.at("format_version").dump());
    }
    m.kind = model_kind_from_string(j.at("kind").get<std::string>());
    m.grid_rows = j.at("grid").at("rows").get<int>();
    m.grid_cols = j.at("grid").at("cols").get<int>();
    m.static_dim = j.at("static_dim").get<int>();
    m.dynamic_dim = j.at("dynamic_dim").get<int>();
    m.feature_names = j.at("feature_names").get<std::vector<std::string>>();
    m.stats.mean = j.at("standardization").at("mean").get<std::vector<double>>();
    m.stats.sd = j.at("standardization").at("sd").get<std::vector<double>>();
    m.train_config = config_from_json(j.at("train_config"));
    m.flow = flow_from_json(j.at("flow"));
    allocate(m, j.at("tensors"));
    const auto named = m.tensors();
    if (named.size() != j.at("tensors").size()) {
      throw ParseError(manifest.string(), "tensor list does not match model kind " + to_string(m.kind));
    }
    for (std::size_t k = 0; k < named.size(); ++k) {
      if (j.at("tensors")[k].at("name").get<std::string>() != named[k].first) {
        throw ParseError(manifest.string(), "tensor " + std::to_string(k) + " should be '" + named[k].first + "'");
      }
    }
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(manifest.string(), e.what());
  } catch (const InvalidArgument& e) {
    throw ParseError(manifest.string(), e.what());
  }

  std::ifstream pin(params, std::ios::binary);
  const std::vector<char> bytes((std::istreambuf_iterator<char>(pin)), std::istreambuf_iterator<char>());
  std::size_t expected = 0;
  for (const auto& [name, t] : m.tensors()) expected += t->size();
  if (bytes.size() != expected * 8) {
    throw ParseError(params.string(), "expected " + std::to_string(expected * 8) + " bytes, found " +
                                          std::to_string(bytes.size()));
  }
  std::size_t pos = 0;
  for (const auto& [name, t] : m.tensors()) {
    for (double& v : t->values()) {
      std::uint64_t bits = 0;
      for (int b = 0; b < 8; ++b) bits |= static_cast<std::uint64_t>(static_cast<unsigned char>(bytes[pos + b])) << (8 * b);
      v = std::bit_cast<double>(bits);
      pos += 8;
    }
  }
  try {
    m.validate();
  } catch (const InvalidArgument& e) {
    throw ParseError(manifest.string(), e.what());
  }

  const fs::path log_path = dir / "train_log.csv";
  if (fs::exists(log_path)) {
    csv::Reader r(log_path);
    r.header({"epoch", "stage", "loss"});
    while (r.next()) {
      r.require_width(3);
      m.log.push_back({static_cast<int>(r.integer(0)), std::string(r.fields()[1]), r.real(2)});
    }
  }
  return m;
}

}  // namespace wildflow
