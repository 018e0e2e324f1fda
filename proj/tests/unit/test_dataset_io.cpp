#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "fixtures.hpp"
#include "wildflow/dataset_io.hpp"
#include "wildflow/errors.hpp"
#include "wildflow/synthgen.hpp"

using namespace wildflow;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("wildflow_io_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void spit(const fs::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::binary);
  out << text;
}

void replace_line(const fs::path& p, std::size_t index, const std::string& line) {
  std::stringstream in(slurp(p));
  std::string out, cur;
  for (std::size_t k = 0; std::getline(in, cur); ++k) out += (k == index ? line : cur) + "\n";
  spit(p, out);
}

void drop_line(const fs::path& p, std::size_t index) {
  std::stringstream in(slurp(p));
  std::string out, cur;
  for (std::size_t k = 0; std::getline(in, cur); ++k)
    if (k != index) out += cur + "\n";
  spit(p, out);
}

}  // namespace

TEST_CASE("two-cell two-month round trip") {
  const ParkDataset ds = fixtures::tiny_dataset(1, 2, 2, {{0, 0, 1.25, true}, {1, 1, 0.1, false}}, 2, 1);
  const fs::path dir = scratch("tiny");
  save_dataset(ds, dir);
  CHECK(load_dataset(dir) == ds);
}

TEST_CASE("generated park round trip is lossless") {
  GeneratorConfig c = fixtures::small_park_config(4, 5, 6);
  c.months = 14;
  const ParkDataset ds = generate_park(c);
  const fs::path dir = scratch("gen");
  save_dataset(ds, dir);
  const ParkDataset back = load_dataset(dir);
  CHECK(back == ds);
  CHECK(back.has_ground_truth());
  const fs::path again = scratch("gen2");
  save_dataset(back, again);
  for (const char* f : {"cells.csv", "dynamics.csv", "visits.csv", "ground_truth.csv"})
    CHECK(slurp(dir / f) == slurp(again / f));
}

TEST_CASE("unknown cell in visits is a parse error") {
  const ParkDataset ds = fixtures::tiny_dataset(1, 2, 2, {{0, 0, 1.0, false}});
  const fs::path dir = scratch("badcell");
  save_dataset(ds, dir);
  replace_line(dir / "visits.csv", 1, "9,2020,1,1,1,0");
  try {
    load_dataset(dir);
    FAIL("expected ParseError");
  } catch (const ParseError& e) {
    CHECK(e.line() == 2);
    CHECK(std::string(e.what()).find("visits.csv") != std::string::npos);
  }
}

TEST_CASE("missing dynamics row names the cell-month") {
  const ParkDataset ds = fixtures::tiny_dataset(1, 2, 2, {});
  const fs::path dir = scratch("nodyn");
  save_dataset(ds, dir);
  drop_line(dir / "dynamics.csv", 2);  // second data row: cell 1 of 2020-01
  try {
    load_dataset(dir);
    FAIL("expected ParseError");
  } catch (const ParseError& e) {
    const std::string msg = e.what();
    CHECK(msg.find("(1, 2020-1)") != std::string::npos);
  }
}

TEST_CASE("malformed fields are rejected with a location") {
  const ParkDataset ds = fixtures::tiny_dataset(1, 2, 2, {{0, 0, 1.0, false}});
  const fs::path dir = scratch("badnum");
  save_dataset(ds, dir);
  const std::string original = slurp(dir / "visits.csv");

  replace_line(dir / "visits.csv", 1, "0,2020,1,1,abc,0");
  CHECK_THROWS_AS(load_dataset(dir), ParseError);

  spit(dir / "visits.csv", original);
  replace_line(dir / "visits.csv", 1, "0,2020,1,1,-2,0");
  CHECK_THROWS_AS(load_dataset(dir), ParseError);

  spit(dir / "visits.csv", original);
  replace_line(dir / "visits.csv", 1, "0,2020,1,1,1,2");
  CHECK_THROWS_AS(load_dataset(dir), ParseError);

  spit(dir / "visits.csv", original);
  replace_line(dir / "visits.csv", 1, "0,2020,1,1");
  CHECK_THROWS_AS(load_dataset(dir), ParseError);

  spit(dir / "visits.csv", original);
  replace_line(dir / "visits.csv", 0, "cell,year,month,visit_index,effort_km,detected");
  CHECK_THROWS_AS(load_dataset(dir), ParseError);

  spit(dir / "visits.csv", original);
  replace_line(dir / "visits.csv", 1, "0,2019,1,1,1,0");
  CHECK_THROWS_AS(load_dataset(dir), ParseError);
}

TEST_CASE("missing files are missing artifacts") {
  const fs::path dir = scratch("empty");
  CHECK_THROWS_AS(load_dataset(dir), MissingArtifact);
}
