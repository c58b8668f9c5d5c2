// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const char* env = std::getenv("MGC_TEST_TMP");
  const auto root = env && *env ? fs::path(env) : fs::temp_directory_path() / "mgc_tests";
  const auto dir = root / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

struct Result {
  int code;
  std::string out;
  std::string err;
};

Result run(const fs::path& cwd, const std::string& args, const std::string& env = "") {
  const auto out = cwd / "stdout.txt";
  const auto err = cwd / "stderr.txt";
  const std::string cmd = "cd '" + cwd.string() + "' && " + env + " '" MGC_CLI_PATH "' " + args +
                          " >'" + out.string() + "' 2>'" + err.string() + "'";
  const int status = std::system(cmd.c_str());
  return {WIFEXITED(status) ? WEXITSTATUS(status) : -1, slurp(out), slurp(err)};
}

const char* kTiny =
    " --set volume.height=12 --set volume.width=12 --set volume.frames=4"
    " --set 'network={\"stem_width\": 4, \"stage_widths\": [8, 512], \"stage_blocks\": [1, 1],"
    " \"stage_spatial_strides\": [2, 2], \"stage_temporal_kernels\": [1, 1],"
    " \"bottleneck_ratio\": 8, \"norm_groups\": 1}'"
    " --set optimizer.epochs=2 --set optimizer.batch_size=4";

bool same_tree(const fs::path& a, const fs::path& b) {
  std::size_t n = 0;
  for (const auto& e : fs::recursive_directory_iterator(a)) {
    if (!e.is_regular_file()) continue;
    ++n;
    const auto rel = fs::relative(e.path(), a);
    if (!fs::exists(b / rel) || slurp(e.path()) != slurp(b / rel)) return false;
  }
  std::size_t m = 0;
  for (const auto& e : fs::recursive_directory_iterator(b)) m += e.is_regular_file() ? 1 : 0;
  return n == m && n > 0;
}

}  // namespace

TEST_CASE("usage errors exit 1") {
  const auto dir = scratch("cli_usage");
  auto r = run(dir, "");
  CHECK(r.code == 1);
  CHECK(r.err.find("Usage") != std::string::npos);
  r = run(dir, "frobnicate");
  CHECK(r.code == 1);
  CHECK(r.err.find("Usage") != std::string::npos);
  r = run(dir, "synth --out d --bogus");
  CHECK(r.code == 1);
  CHECK(!fs::exists(dir / "d"));
  r = run(dir, "--help");
  CHECK(r.code == 0);
  CHECK(r.out.find("ensemble") != std::string::npos);
}

TEST_CASE("synth is reproducible") {
  const auto dir = scratch("cli_synth");
  REQUIRE(run(dir, "synth --out a --clips 8 --classes 4 --seed 7").code == 0);
  REQUIRE(run(dir, "synth --out b --clips 8 --classes 4 --seed 7").code == 0);
  CHECK(same_tree(dir / "a", dir / "b"));
  REQUIRE(run(dir, "synth --out c --clips 8 --classes 4 --seed 8").code == 0);
  CHECK(slurp(dir / "a" / "manifest.json") != slurp(dir / "c" / "manifest.json"));
  CHECK(run(dir, "synth --out e --clips 4 --classes 8").code == 1);
}

TEST_CASE("config errors exit 1 without outputs") {
  const auto dir = scratch("cli_config");
  auto r = run(dir, "train --config missing.cfg --out run");
  CHECK(r.code == 1);
  CHECK(r.err.find("missing.cfg") != std::string::npos);
  CHECK(!fs::exists(dir / "run"));

  REQUIRE(run(dir, "synth --out d --clips 8 --classes 4 --seed 1").code == 0);
  r = run(dir, "train --config d/config.json --out run --set objective.alpha=-2");
  CHECK(r.code == 1);
  CHECK(!fs::exists(dir / "run"));
  r = run(dir, "train --config d/config.json --out run --set objective.gamma=1");
  CHECK(r.code == 1);
  CHECK(r.err.find("objective.gamma") != std::string::npos);
  CHECK(!fs::exists(dir / "run"));
  r = run(dir, "eval --config d/config.json --checkpoint none.ckpt --out ev");
  CHECK(r.code == 2);
}

TEST_CASE("train, eval, ensemble, ablate") {
  const auto dir = scratch("cli_flow");
  REQUIRE(run(dir, "synth --out d --clips 12 --classes 4 --seed 3").code == 0);
  const std::string cfg = std::string(" --config d/config.json") + kTiny;

  auto r = run(dir, "train" + cfg + " --out run --seed 11");
  REQUIRE_MESSAGE(r.code == 0, r.err);
  CHECK(fs::exists(dir / "run" / "final.ckpt"));
  CHECK(fs::exists(dir / "run" / "metrics.jsonl"));
  CHECK(slurp(dir / "run" / "config.json").find("\"seed\": 11") != std::string::npos);

  r = run(dir, "eval" + cfg + " --seed 11 --checkpoint run/final.ckpt --out ej");
  REQUIRE_MESSAGE(r.code == 0, r.err);
  CHECK(r.out.find("Top-1:") != std::string::npos);
  CHECK(r.out.find("Top-5:") != std::string::npos);

  r = run(dir, "eval" + cfg + " --seed 11 --set volume.modality=limb --checkpoint run/final.ckpt --out el");
  CHECK(r.code == 0);

  r = run(dir, "ensemble --joint ej/scores.bin --limb el/scores.bin --weights 2:3 --out fused");
  REQUIRE_MESSAGE(r.code == 0, r.err);
  CHECK(r.out.find("fusion weights 2:3") != std::string::npos);
  CHECK(r.out.find("Top-1:") != std::string::npos);
  CHECK(fs::exists(dir / "fused" / "scores.bin"));
  CHECK(fs::exists(dir / "fused" / "report.json"));
  const auto default_w = run(dir, "ensemble --joint ej/scores.bin --limb el/scores.bin");
  CHECK(default_w.out.find("fusion weights 2:3") != std::string::npos);

  // Eval scores pass through an identity ensemble unchanged.
  r = run(dir, "ensemble --joint ej/scores.bin --limb ej/scores.bin --weights 1:0 --out same");
  REQUIRE(r.code == 0);
  CHECK(slurp(dir / "same" / "scores.bin") == slurp(dir / "ej" / "scores.bin"));

  CHECK(run(dir, "ensemble --joint ej/scores.bin --limb el/scores.bin --weights 2-3").code == 1);
  CHECK(run(dir, "ensemble --joint ej/scores.bin --limb nope.bin").code == 2);

  r = run(dir, "ablate" + cfg + " --alphas 1,20 --out ab");
  REQUIRE_MESSAGE(r.code == 0, r.err);
  CHECK(r.out.find("alpha=1 ") != std::string::npos);
  CHECK(r.out.find("alpha=20 ") != std::string::npos);

  r = run(dir, "prepare" + cfg + " --split test --images --out vols");
  REQUIRE_MESSAGE(r.code == 0, r.err);
  CHECK(fs::exists(dir / "vols" / "config.json"));
  CHECK(fs::exists(dir / "vols" / "images"));
}

TEST_CASE("output root comes from the environment") {
  const auto dir = scratch("cli_env");
  REQUIRE(run(dir, "synth --out d --clips 8 --classes 4 --seed 2").code == 0);
  const auto r = run(dir, "prepare --config d/config.json --split test", "MGC_OUTPUT_ROOT=outroot");
  REQUIRE_MESSAGE(r.code == 0, r.err);
  REQUIRE(fs::exists(dir / "outroot"));
  CHECK(fs::directory_iterator(dir / "outroot") != fs::directory_iterator());
}
