#include <doctest.h>

#include <bit>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iterator>

#include "fixtures.hpp"
#include "wildflow/checkpoint.hpp"
#include "wildflow/errors.hpp"
#include "wildflow/pipeline.hpp"
#include "wildflow/synthgen.hpp"

using namespace wildflow;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("wildflow_ckpt_" + name);
  fs::remove_all(dir);
  return dir;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

const ParkDataset& train_split() {
  static const ParkDataset train = [] {
    GeneratorConfig c = fixtures::small_park_config(21, 5, 5);
    c.months = 24;
    return window_split(generate_park(c), 2019, 1).train;
  }();
  return train;
}

TrainConfig quick_config() {
  TrainConfig c;
  c.logreg_max_steps = 50;
  c.stage1_epochs = 2;
  c.stage2_epochs = 2;
  c.hidden = 6;
  c.mlp_epochs = 2;
  c.mlp_hidden = 5;
  c.gnn_epochs = 2;
  c.seed = 9;
  return c;
}

}  // namespace

TEST_CASE("every model kind survives a round trip") {
  for (ModelKind kind : {ModelKind::wildflow, ModelKind::logreg, ModelKind::mlp, ModelKind::gnn,
                         ModelKind::wildflow_no_base, ModelKind::wildflow_no_det}) {
    CAPTURE(to_string(kind));
    const TrainedModel model = train_model(kind, train_split(), quick_config());
    const fs::path dir = scratch(to_string(kind));
    save_checkpoint(model, dir);
    CHECK(fs::exists(dir / "model.json"));
    CHECK(fs::exists(dir / "params.bin"));
    CHECK(fs::exists(dir / "train_log.csv"));
    const TrainedModel back = load_checkpoint(dir);
    CHECK(back.kind == model.kind);
    CHECK(back.stats == model.stats);
    CHECK(back.train_config == model.train_config);
    CHECK(back.flow == model.flow);
    CHECK(back.feature_names == model.feature_names);
    const auto a = model.tensors();
    const auto b = back.tensors();
    REQUIRE(a.size() == b.size());
    for (std::size_t k = 0; k < a.size(); ++k) {
      CHECK(a[k].first == b[k].first);
      CHECK(*a[k].second == *b[k].second);
    }
    const fs::path again = scratch(to_string(kind) + "_again");
    save_checkpoint(back, again);
    CHECK(slurp(dir / "model.json") == slurp(again / "model.json"));
    CHECK(slurp(dir / "params.bin") == slurp(again / "params.bin"));
  }
}

TEST_CASE("parameter file is little-endian doubles in manifest order") {
  const TrainedModel model = train_model(ModelKind::logreg, train_split(), quick_config());
  const fs::path dir = scratch("layout");
  save_checkpoint(model, dir);
  const std::string bytes = slurp(dir / "params.bin");
  std::vector<double> expect;
  for (const auto& [name, t] : model.tensors()) expect.insert(expect.end(), t->values().begin(), t->values().end());
  REQUIRE(bytes.size() == expect.size() * 8);
  for (std::size_t k = 0; k < expect.size(); ++k) {
    std::uint64_t bits = 0;
    for (int b = 7; b >= 0; --b) bits = (bits << 8) | static_cast<unsigned char>(bytes[k * 8 + b]);
    CHECK(std::bit_cast<double>(bits) == expect[k]);
  }
  const std::string log = slurp(dir / "train_log.csv");
  CHECK(log.rfind("epoch,stage,loss\n", 0) == 0);
}

TEST_CASE("damaged checkpoints are rejected") {
  const TrainedModel model = train_model(ModelKind::logreg, train_split(), quick_config());
  const fs::path dir = scratch("damaged");
  save_checkpoint(model, dir);
  const std::string params = slurp(dir / "params.bin");
  const std::string manifest = slurp(dir / "model.json");

  std::ofstream(dir / "params.bin", std::ios::binary) << params.substr(0, params.size() - 8);
  CHECK_THROWS_AS(load_checkpoint(dir), ParseError);
  std::ofstream(dir / "params.bin", std::ios::binary) << params;

  std::ofstream(dir / "model.json", std::ios::binary) << "{ not json";
  CHECK_THROWS_AS(load_checkpoint(dir), ParseError);

  std::string other_kind = manifest;
  other_kind.replace(other_kind.find("\"logreg\""), 8, "\"gnn\"");
  std::ofstream(dir / "model.json", std::ios::binary) << other_kind;
  CHECK_THROWS_AS(load_checkpoint(dir), ParseError);

  std::ofstream(dir / "model.json", std::ios::binary) << manifest;
  CHECK_NOTHROW(load_checkpoint(dir));

  fs::remove(dir / "params.bin");
  CHECK_THROWS_AS(load_checkpoint(dir), MissingArtifact);
  CHECK_THROWS_AS(load_checkpoint(scratch("nothing")), MissingArtifact);
}
