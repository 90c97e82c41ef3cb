#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdio>
#include <fstream>
#include <string>

#include "fpsam/io_util.hpp"
#include "fpsam/sample_db.hpp"
#include "fpsam/toy_detector.hpp"
#include "test_util.hpp"

using namespace fpsam;
using fpsam::testutil::TempDir;

namespace {

struct CliResult {
  int exit_code = -1;
  std::string output;
};

CliResult run_cli(const std::string& args) {
  const std::string cmd = std::string(FPSAM_CLI_PATH) + " " + args + " 2>&1";
  CliResult result;
  FILE* pipe = popen(cmd.c_str(), "r");
  REQUIRE(pipe != nullptr);
  char buf[512];
  while (fgets(buf, sizeof(buf), pipe)) result.output += buf;
  const int status = pclose(pipe);
  result.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return result;
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path);
  out << text;
}

const char* kSpecText =
    "scene_count = 16\n"
    "extent = 32\n"
    "clutter_points = 120\n"
    "clump_min = 1\n"
    "clump_max = 3\n"
    "class = car 4.2 1.8 1.5 1 2\n"
    "class = pedestrian 0.7 0.7 1.75 0 2\n"
    "class = cyclist 1.8 0.7 1.7 0 1\n";

}  // namespace

TEST_CASE("usage errors exit 1, help exits 0") {
  CHECK(run_cli("--help").exit_code == 0);
  CHECK(run_cli("gen --help").exit_code == 0);
  CHECK(run_cli("").exit_code == 1);
  CHECK(run_cli("frobnicate").exit_code == 1);
  const CliResult unknown = run_cli("gen --spec x --out y --no-such-flag");
  CHECK(unknown.exit_code == 1);
  CHECK(unknown.output.find("--no-such-flag") != std::string::npos);
  CHECK(run_cli("gen --out only").exit_code == 1);  // missing required --spec
}

TEST_CASE("data errors exit 2, runtime failures exit 3") {
  TempDir tmp("cli");
  CHECK(run_cli("gen --spec /nonexistent.spec --out " + (tmp.path / "d").string())
            .exit_code == 2);

  // Malformed cloud file inside an otherwise valid dataset.
  write_text(tmp.path / "bad.spec", kSpecText);
  REQUIRE(run_cli("gen --spec " + (tmp.path / "bad.spec").string() + " --seed 1 --out " +
                  (tmp.path / "data").string())
              .exit_code == 0);
  write_text(tmp.path / "data" / "clouds" / "zzz.bin", "xyz");  // 3 bytes
  const CliResult bad = run_cli("build-gt-db --data " + (tmp.path / "data").string() +
                                " --out " + (tmp.path / "db").string());
  CHECK(bad.exit_code == 2);
  CHECK(bad.output.find("zzz") != std::string::npos);

  // Infeasible generation is a runtime failure.
  write_text(tmp.path / "inf.spec",
             "scene_count = 1\nextent = 6\nclass = car 4.2 1.8 1.5 40 40\n");
  CHECK(run_cli("gen --spec " + (tmp.path / "inf.spec").string() + " --out " +
                (tmp.path / "inf").string())
            .exit_code == 3);
}

TEST_CASE("full pipeline: gen, build-gt-db, mine-fp, augment, train, eval") {
  TempDir tmp("cli");
  write_text(tmp.path / "data.spec", kSpecText);
  const std::string data = (tmp.path / "data").string();
  const std::string val = (tmp.path / "val").string();

  REQUIRE(run_cli("gen --spec " + (tmp.path / "data.spec").string() +
                  " --seed 11 --out " + data)
              .exit_code == 0);
  REQUIRE(run_cli("gen --spec " + (tmp.path / "data.spec").string() +
                  " --seed 12 --out " + val)
              .exit_code == 0);

  const CliResult build = run_cli("build-gt-db --data " + data + " --out " +
                                  (tmp.path / "gt_db").string() + " --min-points 5");
  CHECK(build.exit_code == 0);
  CHECK(load_database(tmp.path / "gt_db").total_size() > 0);

  // Zero-weight checkpoint with a high emit threshold: no predictions, so
  // mining over clean data stores nothing and exits 0.
  ToyModelParams quiet = init_toy_params(3);
  quiet.emit_threshold = 0.6;
  save_checkpoint(quiet, tmp.path / "quiet.txt");
  const CliResult mine =
      run_cli("mine-fp --data " + data + " --ckpt " + (tmp.path / "quiet.txt").string() +
              " --out " + (tmp.path / "fp_db").string() + " --score-threshold 0.1");
  CHECK(mine.exit_code == 0);
  CHECK(load_database(tmp.path / "fp_db").total_size() == 0);
  CHECK(mine.output.find("fp_total 0") != std::string::npos);

  // Identity augmentation: outputs byte-equal to the inputs.
  write_text(tmp.path / "zero.plan", "alpha = 0\nbeta = 0\n");
  const Dataset ds = load_dataset(data);
  const std::string scene_id = ds.scenes[0].id;
  const CliResult aug = run_cli("augment --data " + data + " --scene " + scene_id +
                                " --gt-db " + (tmp.path / "gt_db").string() + " --plan " +
                                (tmp.path / "zero.plan").string() + " --seed 4 --out " +
                                (tmp.path / "aug").string());
  CHECK(aug.exit_code == 0);
  CHECK(read_file(tmp.path / "aug" / (scene_id + ".bin")) ==
        read_file(std::filesystem::path(data) / "clouds" / (scene_id + ".bin")));
  CHECK(read_file(tmp.path / "aug" / (scene_id + ".txt")) ==
        read_file(std::filesystem::path(data) / "labels" / (scene_id + ".txt")));

  // Non-trivial augmentation adds labels.
  write_text(tmp.path / "two.plan", "alpha = 2\nbeta = 0\n");
  const CliResult aug2 = run_cli("augment --data " + data + " --scene " + scene_id +
                                 " --gt-db " + (tmp.path / "gt_db").string() +
                                 " --plan " + (tmp.path / "two.plan").string() +
                                 " --seed 4 --out " + (tmp.path / "aug2").string());
  CHECK(aug2.exit_code == 0);
  CHECK(read_file(tmp.path / "aug2" / (scene_id + ".trace.txt")).find("placed") !=
        std::string::npos);

  write_text(tmp.path / "train.cfg",
             "train_dir = " + data + "\n" +
             "val_dir = " + val + "\n" +
             "epochs = 5\n"
             "fp_init_epoch = 2\n"
             "fp_update_interval = 1\n"
             "mode = gt_and_fp\n"
             "seed = 3\n"
             "alpha = 1\n"
             "beta = 1\n"
             "learning_rate = 0.3\n");
  const std::string out1 = (tmp.path / "run1").string();
  const CliResult train1 = run_cli("train --config " + (tmp.path / "train.cfg").string() +
                                   " --out " + out1 + " --workers 2");
  CHECK(train1.exit_code == 0);
  const std::string metrics = read_file(tmp.path / "run1" / "metrics.csv");
  size_t rows = 0;
  for (char ch : metrics) rows += (ch == '\n');
  CHECK(rows == 6);  // header + one row per epoch
  CHECK(std::filesystem::exists(tmp.path / "run1" / "checkpoint.txt"));
  CHECK(std::filesystem::exists(tmp.path / "run1" / "mining_report_gen1.txt"));

  // Identical config and seed: byte-identical metrics.
  const CliResult train2 = run_cli("train --config " + (tmp.path / "train.cfg").string() +
                                   " --out " + (tmp.path / "run2").string() +
                                   " --workers 1");
  CHECK(train2.exit_code == 0);
  CHECK(read_file(tmp.path / "run1" / "metrics.csv") ==
        read_file(tmp.path / "run2" / "metrics.csv"));

  const CliResult eval = run_cli("eval --data " + val + " --ckpt " +
                                 (tmp.path / "run1" / "checkpoint.txt").string() +
                                 " --out " + (tmp.path / "evald").string());
  CHECK(eval.exit_code == 0);
  const std::string eval_csv = read_file(tmp.path / "evald" / "eval.csv");
  CHECK(eval_csv.find("class,ap,tp,fp,fn,gt") == 0);
  CHECK(eval_csv.find("car,") != std::string::npos);
  CHECK(read_file(tmp.path / "evald" / "fp_score_histogram.csv")
            .find("bin_low,bin_high,fp_count") == 0);
}

TEST_CASE("FPSAMPLER_SEED is the fallback seed") {
  TempDir tmp("cli");
  write_text(tmp.path / "data.spec", kSpecText);
  const std::string base = "gen --spec " + (tmp.path / "data.spec").string();

  const CliResult byflag =
      run_cli(base + " --seed 21 --out " + (tmp.path / "a").string());
  REQUIRE(byflag.exit_code == 0);
  CliResult byenv;
  {
    const std::string cmd = "FPSAMPLER_SEED=21 " + std::string(FPSAM_CLI_PATH) + " " +
                            base + " --out " + (tmp.path / "b").string() + " 2>&1";
    FILE* pipe = popen(cmd.c_str(), "r");
    REQUIRE(pipe != nullptr);
    char buf[256];
    while (fgets(buf, sizeof(buf), pipe)) byenv.output += buf;
    byenv.exit_code = WEXITSTATUS(pclose(pipe));
  }
  REQUIRE(byenv.exit_code == 0);
  const Dataset a = load_dataset(tmp.path / "a");
  const Dataset b = load_dataset(tmp.path / "b");
  REQUIRE(a.scenes.size() == b.scenes.size());
  for (size_t i = 0; i < a.scenes.size(); ++i) {
    CHECK(testutil::points_equal(a.scenes[i].cloud, b.scenes[i].cloud));
  }
}

TEST_CASE("compare subcommand emits comparison tables") {
  TempDir tmp("cli");
  write_text(tmp.path / "data.spec",
             "scene_count = 8\n"
             "extent = 28\n"
             "clutter_points = 80\n"
             "clump_min = 1\n"
             "clump_max = 2\n"
             "class = car 4.2 1.8 1.5 1 2\n");
  const std::string data = (tmp.path / "data").string();
  const std::string val = (tmp.path / "val").string();
  REQUIRE(run_cli("gen --spec " + (tmp.path / "data.spec").string() +
                  " --seed 1 --out " + data).exit_code == 0);
  REQUIRE(run_cli("gen --spec " + (tmp.path / "data.spec").string() +
                  " --seed 2 --out " + val).exit_code == 0);
  write_text(tmp.path / "train.cfg",
             "train_dir = " + data + "\nval_dir = " + val + "\n" +
             "epochs = 3\nfp_init_epoch = 2\nfp_update_interval = 1\n"
             "seed = 1\nalpha = 1\nbeta = 1\n");
  const CliResult cmp = run_cli("compare --config " + (tmp.path / "train.cfg").string() +
                                " --seeds 1,2 --out " + (tmp.path / "cmp").string() +
                                " --workers 2");
  CHECK(cmp.exit_code == 0);
  const std::string table = read_file(tmp.path / "cmp" / "comparison.csv");
  CHECK(table.find("none,2,") != std::string::npos);
  CHECK(table.find("gt_only,2,") != std::string::npos);
  CHECK(table.find("fp_only,2,") != std::string::npos);
  CHECK(table.find("gt_and_fp,2,") != std::string::npos);
  CHECK(std::filesystem::exists(tmp.path / "cmp" / "fp_series.csv"));

  CHECK(run_cli("compare --config " + (tmp.path / "train.cfg").string() +
                " --seeds 1,x --out " + (tmp.path / "cmp2").string())
            .exit_code == 2);
}
