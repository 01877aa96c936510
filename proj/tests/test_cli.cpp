#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"
#include "t2d/binary_io.hpp"
#include "t2d/checkpoint.hpp"
#include "t2d/cli.hpp"
#include "t2d/kv_config.hpp"
#include "t2d/metrics.hpp"
#include "t2d/volume_io.hpp"

namespace fs = std::filesystem;
using namespace t2d;

namespace {

// Runs the tool in-process, capturing stdout and stderr.
struct Run {
  int code = -1;
  std::string out, err;
};

Run cli(std::vector<std::string> args) {
  args.insert(args.begin(), "t2d");
  std::vector<char*> argv;
  for (auto& a : args) argv.push_back(a.data());
  std::ostringstream out, err;
  auto* old_out = std::cout.rdbuf(out.rdbuf());
  auto* old_err = std::cerr.rdbuf(err.rdbuf());
  Run r;
  r.code = run_cli(static_cast<int>(argv.size()), argv.data());
  std::cout.rdbuf(old_out);
  std::cerr.rdbuf(old_err);
  r.out = out.str();
  r.err = err.str();
  return r;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

const fs::path root = fs::temp_directory_path() / "t2d_test_cli";

const std::vector<std::string> small_model = {
    "--model.input_size=16", "--model.base_width=2", "--model.trunk_width=4",
    "--model.ssa_channels=3", "--model.ssa_pool_size=2"};

std::vector<std::string> with(std::vector<std::string> a, const std::vector<std::string>& b) {
  a.insert(a.end(), b.begin(), b.end());
  return a;
}

}  // namespace

TEST_CASE("validation errors exit with 1 and name the field") {
  Run r = cli({"generate", "--out", (root / "bad").string(), "--phantom.colour=red"});
  CHECK(r.code == 1);
  CHECK(r.err.find("phantom.colour") != std::string::npos);

  r = cli({"train", "--out", (root / "bad").string(), "--model.k=7", "--model.fusion_mode=esm"});
  CHECK(r.code == 1);
  CHECK(r.err.find("model.k") != std::string::npos);

  r = cli({"train", "--out", (root / "bad").string(), "--train.dataset=/nonexistent/t2d"});
  CHECK(r.code == 1);
  CHECK(r.err.find("train.dataset") != std::string::npos);

  r = cli({"bench", "--out", (root / "bad").string(), "--bench.axis=oblique"});
  CHECK(r.code == 1);
  CHECK(r.err.find("bench.axis") != std::string::npos);

  r = cli({"generate", "--out", (root / "bad").string(), "positional"});
  CHECK(r.code == 1);
  CHECK(cli({}).code == 1);
  CHECK(cli({"frobnicate"}).code == 1);

  fs::create_directories(root);
  std::ofstream(root / "bad.cfg") << "model.k=3\nnot a pair\n";
  r = cli({"bench", "--config", (root / "bad.cfg").string(), "--out", (root / "bad").string()});
  CHECK(r.code == 1);
}

TEST_CASE("runtime errors exit with 2") {
  fs::create_directories(root / "rt");
  std::ofstream(root / "rt" / "junk.t2dc") << "not a checkpoint";
  std::ofstream(root / "rt" / "junk.t2dv") << "not a volume";
  const Run r = cli({"predict", "--out", (root / "rt" / "o").string(),
                     "--predict.checkpoint=" + (root / "rt" / "junk.t2dc").string(),
                     "--predict.volume=" + (root / "rt" / "junk.t2dv").string()});
  CHECK(r.code == 2);
  CHECK_FALSE(r.err.empty());
}

TEST_CASE("bench reproduces the window counts") {
  const Run r = cli({"bench", "--out", (root / "bench").string(), "--model.fusion_mode=esm_ssa",
                     "--model.base_width=8", "--model.trunk_width=16", "--model.ssa_channels=8"});
  REQUIRE(r.code == 0);
  const auto j = nlohmann::json::parse(slurp(root / "bench" / "bench.json"));
  REQUIRE(j.size() == 3);
  CHECK(j[0]["scheme"] == "slice2d");
  CHECK(j[0]["windows"] == 394);
  CHECK(j[1]["scheme"] == "thick2d");
  CHECK(j[1]["windows"] == 380);
  CHECK(j[2]["scheme"] == "patch3d");
  CHECK(j[2]["windows"] == 3718);
  CHECK(j[1]["total_macs"].get<std::uint64_t>() < j[2]["total_macs"].get<std::uint64_t>());
  CHECK(r.out.find("thick2d single view < patch3d") != std::string::npos);
  CHECK(fs::exists(root / "bench" / "resolved.cfg"));
}

TEST_CASE("seed fan-out and snapshot reuse") {
  REQUIRE(cli({"bench", "--seed", "40", "--out", (root / "s1").string()}).code == 0);
  const KvConfig kv = KvConfig::load((root / "s1" / "resolved.cfg").string());
  CHECK(kv.raw("run.seed") == "40");
  CHECK(kv.raw("model.seed") == "41");
  REQUIRE(cli({"bench", "--config", (root / "s1" / "resolved.cfg").string(), "--out", (root / "s2").string()}).code == 0);
  CHECK(slurp(root / "s1" / "resolved.cfg") == slurp(root / "s2" / "resolved.cfg"));
  CHECK(slurp(root / "s1" / "bench.json") == slurp(root / "s2" / "bench.json"));
}

TEST_CASE("generate, train, predict, evaluate end to end") {
  const fs::path data = root / "data";
  fs::remove_all(root / "e2e");
  Run r = cli({"generate", "--seed", "3", "--out", data.string(), "--phantom.h=16", "--phantom.w=16",
               "--phantom.d=16", "--dataset.n=4", "--dataset.train_fraction=0.5"});
  REQUIRE(r.code == 0);
  CHECK(fs::exists(data / "manifest.tsv"));
  CHECK(fs::exists(data / "vol_0003.image.t2dv"));
  CHECK(fs::exists(data / "vol_0003.mask.t2dv"));

  std::vector<fs::path> ckpt;
  for (const char* axis : {"coronal", "sagittal", "axial"}) {
    const fs::path out = root / "e2e" / axis;
    r = cli(with({"train", "--seed", "5", "--out", out.string(), "--train.dataset=" + data.string(),
                  "--train.iterations=4", "--train.batch_size=2", "--train.eval_every=2",
                  std::string("--train.axis=") + axis, "--model.k=3"},
                 small_model));
    REQUIRE(r.code == 0);
    for (const char* f : {"final.t2dc", "best.t2dc", "loss.csv", "resolved.cfg"}) CHECK(fs::exists(out / f));
    ckpt.push_back(out / "final.t2dc");
  }
  // Same seed and config: identical checkpoint.
  r = cli(with({"train", "--seed", "5", "--out", (root / "e2e" / "again").string(),
                "--train.dataset=" + data.string(), "--train.iterations=4", "--train.batch_size=2",
                "--train.eval_every=2", "--train.axis=axial", "--model.k=3"},
               small_model));
  REQUIRE(r.code == 0);
  CHECK(io::file_crc(root / "e2e" / "again" / "final.t2dc") == io::file_crc(ckpt[2]));
  CHECK(load_checkpoint(ckpt[0]).config().input_size == 16);

  const fs::path pred = root / "e2e" / "pred";
  r = cli({"predict", "--out", pred.string(), "--predict.volume=" + data.string(),
           "--predict.checkpoint_coronal=" + ckpt[0].string(), "--predict.checkpoint_sagittal=" + ckpt[1].string(),
           "--predict.checkpoint_axial=" + ckpt[2].string()});
  REQUIRE(r.code == 0);
  for (const char* name : {"vol_0002", "vol_0003"}) {
    const std::string n = name;
    for (const char* f : {".coronal.prob.t2dv", ".sagittal.prob.t2dv", ".axial.prob.t2dv", ".fused.mask.t2dv"})
      CHECK(fs::exists(pred / (n + f)));
    CHECK(read_volume(pred / (n + ".fused.mask.t2dv")).kind() == VolumeKind::Mask);
    const auto cost = nlohmann::json::parse(slurp(pred / (n + ".cost.json")));
    CHECK(cost["windows"] == 3 * 14);
  }
  CHECK_FALSE(fs::exists(pred / "vol_0000.fused.mask.t2dv"));

  const fs::path single = root / "e2e" / "single";
  r = cli({"predict", "--out", single.string(), "--predict.volume=" + (data / "vol_0000.image.t2dv").string(),
           "--predict.view=axial", "--predict.checkpoint=" + ckpt[2].string()});
  REQUIRE(r.code == 0);
  CHECK(fs::exists(single / "vol_0000.axial.prob.t2dv"));
  CHECK(fs::exists(single / "vol_0000.axial.mask.t2dv"));

  r = cli({"evaluate", "--out", (root / "e2e" / "eval").string(), "--evaluate.pred=" + pred.string(),
           "--evaluate.gt=" + data.string()});
  REQUIRE(r.code == 0);
  const EvalReport rep = EvalReport::from_csv(slurp(root / "e2e" / "eval" / "eval.csv"));
  REQUIRE(rep.rows.size() == 2);
  CHECK(rep.rows[0].volume == "vol_0002");
  CHECK(rep.rows[0].dsc_f >= 0);
  CHECK(rep.rows[0].dsc_f <= 1);
  CHECK(rep.rows[0].windows == 42);
  CHECK(rep.rows[0].total_macs > 0);

  // Prediction is reproducible, including with several worker threads.
  setenv("T2D_THREADS", "3", 1);
  const fs::path pred3 = root / "e2e" / "pred3";
  r = cli({"predict", "--out", pred3.string(), "--predict.volume=" + data.string(),
           "--predict.checkpoint_coronal=" + ckpt[0].string(), "--predict.checkpoint_sagittal=" + ckpt[1].string(),
           "--predict.checkpoint_axial=" + ckpt[2].string()});
  unsetenv("T2D_THREADS");
  REQUIRE(r.code == 0);
  for (const auto& e : fs::directory_iterator(pred)) {
    if (e.path().extension() != ".t2dv") continue;
    CHECK(io::file_crc(e.path()) == io::file_crc(pred3 / e.path().filename()));
  }
}

TEST_CASE("ablate writes one row per mode and thickness") {
  const fs::path out = root / "ablate";
  const Run r = cli(with({"ablate", "--seed", "2", "--out", out.string(), "--phantom.h=16", "--phantom.w=16",
                          "--phantom.d=16", "--ablate.train_volumes=2", "--ablate.test_volumes=1",
                          "--ablate.modes=plain,esm_ssa", "--ablate.ks=3,6", "--ablate.axes=axial",
                          "--train.iterations=2", "--train.batch_size=1"},
                         small_model));
  REQUIRE(r.code == 0);
  std::istringstream csv(slurp(out / "ablation.csv"));
  std::string line;
  std::getline(csv, line);
  CHECK(line == "mode,k,DSC_C,DSC_S,DSC_A,DSC_F,similarity_fused,similarity_axial");
  std::vector<std::string> keys;
  while (std::getline(csv, line)) keys.push_back(line.substr(0, line.find(',', line.find(',') + 1)));
  CHECK(keys == std::vector<std::string>{"plain,3", "plain,6", "esm_ssa,3", "esm_ssa,6"});

  const Run bad = cli({"ablate", "--out", out.string(), "--ablate.modes=plain,deeplab"});
  CHECK(bad.code == 1);
  CHECK(bad.err.find("ablate.modes") != std::string::npos);
  fs::remove_all(root);
}
