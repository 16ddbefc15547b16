#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <sys/wait.h>

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "doctest.h"
#include "test_support.hpp"

namespace fs = std::filesystem;
using invrender::testing::ScratchDir;

namespace {

struct Result {
  int code = -1;
  std::string out;
  std::string err;
};

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

Result run(const ScratchDir& dir, const std::string& args, const std::string& env = {}) {
  const fs::path out = dir / "stdout.txt", err = dir / "stderr.txt";
  const std::string cmd = "cd '" + dir.path().string() + "' && " + env + " '" + INVRENDER_CLI + "' " + args + " >'" +
                          out.string() + "' 2>'" + err.string() + "'";
  const int status = std::system(cmd.c_str());
  Result r;
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  r.out = slurp(out);
  r.err = slurp(err);
  return r;
}

std::size_t lines(const std::string& s) { return static_cast<std::size_t>(std::count(s.begin(), s.end(), '\n')); }

void write(const fs::path& p, const std::string& text) { std::ofstream(p, std::ios::binary) << text; }

const char* kSmall =
    "[dataset]\n"
    "unlabeled_2d = 12\nunlabeled_3d = 12\npaired_train = 8\npaired_test = 4\n"
    "resolution = 8\nimage_width = 8\nimage_height = 8\nview_count = 2\n"
    "[model]\nk_2d = 4\nk_3d = 5\nmlp_hidden = 6\n"
    "[train]\nlearning_rates = 0.001\nepochs = 10\nbatch_size = 4\n";

}  // namespace

TEST_CASE("usage errors exit 1 on stderr") {
  ScratchDir dir("cli_usage");
  Result r = run(dir, "");
  CHECK(r.code == 1);
  CHECK(r.out.empty());
  CHECK_FALSE(r.err.empty());
  CHECK(run(dir, "frobnicate").code == 1);
  CHECK(run(dir, "gen").code == 1);
  CHECK(run(dir, "fit --data d --out m --method cnn").code == 1);
  CHECK(run(dir, "pretrain --data nowhere --out m").code == 1);
  CHECK(run(dir, "gen --config missing.cfg --out d").code == 1);
  r = run(dir, "--help");
  CHECK(r.code == 0);
  CHECK(r.out.find("inspect") != std::string::npos);
}

TEST_CASE("full command sequence") {
  ScratchDir dir("cli_flow");
  write(dir / "small.cfg", kSmall);
  Result r = run(dir, "gen --config small.cfg --out data --threads 2");
  REQUIRE(r.code == 0);
  CHECK(fs::exists(dir / "data" / "manifest.cfg"));
  CHECK(r.err.empty());

  r = run(dir, "pretrain --config small.cfg --data data --out models");
  REQUIRE(r.code == 0);
  const std::string ssm = slurp(dir / "models" / "image.ssm");
  CHECK(run(dir, "pretrain --config small.cfg --data data --out models").code == 0);
  CHECK(slurp(dir / "models" / "image.ssm") == ssm);

  for (const char* method : {"lowdim", "direct", "mlp"}) {
    CAPTURE(method);
    REQUIRE(run(dir, std::string("fit --config small.cfg --data data --out models --method ") + method).code == 0);
    r = run(dir, std::string("eval --data data --out reports --models models --export 1 --method ") + method);
    REQUIRE(r.code == 0);
    CHECK(r.out.find("average_rmse:") != std::string::npos);
    CHECK(lines(slurp(dir / "reports" / (std::string("eval_") + method + "_test.csv"))) == 5);
  }

  r = run(dir, "compare --config small.cfg --data data --out results");
  REQUIRE(r.code == 0);
  const std::string csv = slurp(dir / "results" / "comparison.csv");
  CHECK(lines(csv) == 4);
  CHECK(csv.find("\nlowdim,") != std::string::npos);
  CHECK(csv.find("\ndirect,") != std::string::npos);
  CHECK(csv.find("\nmlp,") != std::string::npos);

  r = run(dir, "inspect models/shape.ssm");
  CHECK(r.code == 0);
  CHECK(r.out.find("k: 5") != std::string::npos);
  r = run(dir, "inspect data/shapes/s000030.voxr");
  CHECK(r.code == 0);
  CHECK(r.out.find("resolution: 8") != std::string::npos);

  CHECK(run(dir, "render --shape data/shapes/s000030.voxr --yaw 90 --out view.pgm").code == 0);
  CHECK(run(dir, "inspect view.pgm").out.find("width: 32") != std::string::npos);
  CHECK(run(dir, "heatmap --pred data/shapes/s000031.voxr --truth data/shapes/s000030.voxr --mode nearest --out h.ply")
            .code == 0);
  CHECK(run(dir, "inspect h.ply").out.find("error_property: yes") != std::string::npos);
  // voxel centers of different shapes are not corresponded
  CHECK(run(dir, "heatmap --pred data/shapes/s000031.voxr --truth data/shapes/s000030.voxr --out h2.ply").code == 1);
}

TEST_CASE("eval with mismatched dimensions names both") {
  ScratchDir dir("cli_mismatch");
  write(dir / "a.cfg", kSmall);
  std::string other = kSmall;
  other.replace(other.find("image_width = 8"), 15, "image_width = 9");
  write(dir / "b.cfg", other);
  REQUIRE(run(dir, "gen --config a.cfg --out a").code == 0);
  REQUIRE(run(dir, "gen --config b.cfg --out b").code == 0);
  REQUIRE(run(dir, "pretrain --config a.cfg --data a --out m").code == 0);
  REQUIRE(run(dir, "fit --data a --out m").code == 0);
  const Result r = run(dir, "eval --data b --out r --models m");
  CHECK(r.code == 1);
  CHECK(lines(r.err) == 1);
  CHECK(r.err.find("72") != std::string::npos);
  CHECK(r.err.find("64") != std::string::npos);
}

TEST_CASE("inspect rejects truncated and unknown files") {
  ScratchDir dir("cli_inspect");
  write(dir / "small.cfg", kSmall);
  REQUIRE(run(dir, "gen --config small.cfg --out d").code == 0);
  REQUIRE(run(dir, "pretrain --config small.cfg --data d --out m").code == 0);
  const std::string bytes = slurp(dir / "m" / "shape.ssm");
  write(dir / "cut.ssm", bytes.substr(0, bytes.size() / 2));
  Result r = run(dir, "inspect cut.ssm");
  CHECK(r.code == 1);
  CHECK(r.err.find("unexpected end of file") != std::string::npos);
  const std::string vox = slurp(dir / "d" / "shapes" / "s000030.voxr");
  write(dir / "cut.voxr", vox.substr(0, vox.size() - 3));
  r = run(dir, "inspect cut.voxr");
  CHECK(r.code == 1);
  CHECK(r.err.find("unexpected end of file") != std::string::npos);
  write(dir / "x.bin", "\x89PNG\r\n");
  CHECK(run(dir, "inspect x.bin").code == 1);
}

TEST_CASE("numerical failure exits 2") {
  ScratchDir dir("cli_numeric");
  write(dir / "small.cfg", kSmall);
  std::string hot = kSmall;
  hot.replace(hot.find("learning_rates = 0.001"), 22, "learning_rates = 1e150");
  write(dir / "hot.cfg", hot);
  REQUIRE(run(dir, "gen --config small.cfg --out d").code == 0);
  REQUIRE(run(dir, "pretrain --config small.cfg --data d --out m").code == 0);
  const Result r = run(dir, "fit --config hot.cfg --data d --out m --method mlp");
  CHECK(r.code == 2);
  CHECK(r.err.find("epoch") != std::string::npos);
}

TEST_CASE("flags override the config, which overrides defaults") {
  ScratchDir dir("cli_precedence");
  fs::create_directories(dir / "cfgs");
  write(dir / "cfgs" / "small.cfg", kSmall);
  // found through INVRENDER_CONFIG_DIR
  REQUIRE(run(dir, "gen --config small.cfg --out d --seed 9", "INVRENDER_CONFIG_DIR=cfgs").code == 0);
  const std::string manifest = slurp(dir / "d" / "manifest.cfg");
  CHECK(manifest.find("seed = 9") != std::string::npos);
  CHECK(manifest.find("paired_train = 8") != std::string::npos);

  // default.cfg in the config directory stands in for a missing --config
  write(dir / "cfgs" / "default.cfg", kSmall);
  REQUIRE(run(dir, "gen --out e", "INVRENDER_CONFIG_DIR=cfgs").code == 0);
  CHECK(slurp(dir / "e" / "manifest.cfg").find("seed = 42") != std::string::npos);
  CHECK(slurp(dir / "e" / "manifest.cfg").find("paired_train = 8") != std::string::npos);
}
