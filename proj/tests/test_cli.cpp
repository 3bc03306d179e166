#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cstdlib>
#include <fstream>
#include <iterator>
#include <map>
#include <string>
#include <sys/wait.h>

#include "json.hpp"
#include "test_support.hpp"
#include "voxdiff/config.hpp"
#include "voxdiff/evalkit.hpp"
#include "voxdiff/voxgrid.hpp"

using namespace voxdiff;
namespace fs = std::filesystem;

namespace {

int cli(const std::string& args) {
  const std::string cmd = std::string(VOXDIFF_CLI_PATH) + " " + args + " > /dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

std::size_t count_ext(const fs::path& dir, const std::string& ext) {
  std::size_t n = 0;
  for (const auto& e : fs::directory_iterator(dir)) n += e.path().extension() == ext;
  return n;
}

std::size_t count_lines(const fs::path& p) {
  std::ifstream in(p);
  std::size_t n = 0;
  for (std::string line; std::getline(in, line);) n += !line.empty();
  return n;
}

std::map<std::string, std::string> tree(const fs::path& root) {
  std::map<std::string, std::string> files;
  for (const auto& e : fs::recursive_directory_iterator(root)) {
    if (e.is_regular_file() && e.path().filename() != "run.json") {
      files[fs::relative(e.path(), root).string()] = slurp(e.path());
    }
  }
  return files;
}

}  // namespace

TEST_CASE("gen-data counts and reruns") {
  testing::TempDir dir("cli_gen");
  const std::string a = (dir / "a").string(), b = (dir / "b").string();
  REQUIRE(cli("gen-data --classes ball,spiky --counts 40,5 --size 32 --seed 1 --out " + a) == 0);
  CHECK(count_ext(fs::path(a) / "voxels", ".vox") == 45);
  CHECK(count_ext(fs::path(a) / "priors", ".prior") == 45);
  CHECK(count_lines(fs::path(a) / "manifest.csv") == 46);
  CHECK(fs::exists(fs::path(a) / "run.json"));

  const Manifest m = read_manifest(fs::path(a) / "manifest.csv");
  std::map<std::string, int> per_class;
  for (const auto& r : m.records) ++per_class[r.class_label];
  CHECK(per_class["ball"] == 40);
  CHECK(per_class["spiky"] == 5);

  REQUIRE(cli("gen-data --classes ball,spiky --counts 40,5 --size 32 --seed 1 --out " + b) == 0);
  CHECK(tree(a) == tree(b));

  const nlohmann::json prov = nlohmann::json::parse(slurp(fs::path(a) / "run.json"));
  CHECK(prov["command"] == "gen-data");
  CHECK(prov.contains("versions"));
  CHECK(prov.contains("config"));
}

TEST_CASE("usage errors exit with 2") {
  testing::TempDir dir("cli_usage");
  const std::string out = (dir / "x").string();
  CHECK(cli("gen-data --classes ball,spiky --counts 40 --size 32 --out " + out) == 2);
  CHECK(cli("gen-data --classes ball,cube --counts 4,4 --size 32 --out " + out) == 2);
  CHECK(cli("gen-data --classes ball --counts 4 --size 8 --out " + out) == 2);
  CHECK(cli("no-such-command") == 2);
  CHECK(cli("gen-data --counts 4") == 2);
  CHECK_FALSE(fs::exists(out));

  std::ofstream(dir / "bad.cfg") << "steps=0\n";
  REQUIRE(cli("gen-data --classes ball --counts 6 --size 16 --seed 2 --out " + (dir / "d").string()) == 0);
  CHECK(cli("train --manifest " + (dir / "d" / "manifest.csv").string() + " --config " + (dir / "bad.cfg").string() +
            " --out-checkpoint " + (dir / "m" / "n.ckpt").string()) == 2);
}

TEST_CASE("train, sample, baseline, features, eval") {
  testing::TempDir dir("cli_flow");
  const fs::path d = dir.path();
  REQUIRE(cli("gen-data --classes ball,elongated --counts 6,4 --size 16 --seed 3 --out " + (d / "data").string()) == 0);
  const std::string manifest = (d / "data" / "manifest.csv").string();

  RunConfig c;
  c.seed = 4;
  c.grid_size = 16;
  c.steps = 10;
  c.beta_start = 0.01;
  c.beta_end = 0.3;
  c.max_steps = 5;
  write_config(c, d / "run.cfg");
  const std::string cfg = " --config " + (d / "run.cfg").string();

  REQUIRE(cli("train --manifest " + manifest + cfg + " --out-checkpoint " + (d / "model" / "net.ckpt").string()) == 0);
  CHECK(fs::exists(d / "model" / "net.ckpt"));
  CHECK(count_lines(d / "model" / "net.ckpt.loss.csv") == 6);

  REQUIRE(cli("sample --checkpoint " + (d / "model" / "net.ckpt").string() + " --manifest " + manifest + cfg +
              " --k 5 --out " + (d / "diff").string()) == 0);
  CHECK(count_ext(d / "diff", ".vox") == 50);
  CHECK(fs::exists(d / "diff" / "run.json"));
  CHECK_FALSE(fs::exists(d / "diff" / ".staging-sample"));

  // Same seeds, same bytes.
  REQUIRE(cli("sample --checkpoint " + (d / "model" / "net.ckpt").string() + " --manifest " + manifest + cfg +
              " --k 5 --out " + (d / "diff2").string()) == 0);
  CHECK(tree(d / "diff") == tree(d / "diff2"));

  REQUIRE(cli("baseline --manifest " + manifest + " --fit cylinder --out " + (d / "cyl").string()) == 0);
  CHECK(count_ext(d / "cyl", ".vox") == 10);
  CHECK(cli("baseline --manifest " + manifest + " --fit cone --out " + (d / "cone").string()) == 2);

  REQUIRE(cli("features --in " + manifest + " --out " + (d / "feat").string()) == 0);
  CHECK(count_lines(d / "feat" / "features.csv") == 11);
  CHECK(cli("features --in " + (d / "cyl").string() + " --out " + (d / "feat2").string()) == 2);
  REQUIRE(cli("features --in " + (d / "cyl").string() + " --manifest " + manifest + " --out " + (d / "feat2").string()) ==
          0);
  CHECK(count_lines(d / "feat2" / "features.csv") == 11);

  // Ground truth copied in as predictions scores zero everywhere.
  fs::create_directories(d / "copy");
  for (const auto& r : read_manifest(manifest).records) {
    fs::copy_file(d / "data" / r.voxel_path, d / "copy" / (r.id + "_s0.vox"));
  }
  REQUIRE(cli("eval --gt " + manifest + " --pred-dirs " + (d / "copy").string() + "," + (d / "cyl").string() +
              " --names copy,cylinder --out " + (d / "eval").string()) == 0);
  std::ifstream rep(d / "eval" / "report.csv");
  std::string line;
  std::getline(rep, line);
  CHECK(line == "sample,model,metric,relative_error");
  int copy_rows = 0;
  while (std::getline(rep, line)) {
    if (line.find(",copy,") == std::string::npos) continue;
    ++copy_rows;
    CHECK(std::stod(line.substr(line.rfind(',') + 1)) == 0.0);
  }
  CHECK(copy_rows == 40);
  CHECK(fs::exists(d / "eval" / "summary.csv"));
  CHECK(fs::exists(d / "eval" / "boxplot.csv"));
}

TEST_CASE("a failing command leaves no partial output") {
  testing::TempDir dir("cli_fail");
  const fs::path d = dir.path();
  REQUIRE(cli("gen-data --classes ball --counts 5 --size 16 --seed 5 --out " + (d / "data").string()) == 0);
  const std::string manifest = (d / "data" / "manifest.csv").string();

  // Extrusion taller than a 2-slice grid fails after staging has started.
  CHECK(cli("baseline --manifest " + manifest + " --fit cylinder --depth 2 --out " + (d / "fresh").string()) == 1);
  CHECK_FALSE(fs::exists(d / "fresh"));

  fs::create_directories(d / "kept");
  std::ofstream(d / "kept" / "note.txt") << "keep";
  CHECK(cli("baseline --manifest " + manifest + " --fit cylinder --depth 2 --out " + (d / "kept").string()) == 1);
  CHECK(slurp(d / "kept" / "note.txt") == "keep");
  std::size_t entries = 0;
  for ([[maybe_unused]] const auto& e : fs::directory_iterator(d / "kept")) ++entries;
  CHECK(entries == 1);
}
