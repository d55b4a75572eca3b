#include <doctest.h>

#include <fstream>

#include "gpusentinel/ingest.hpp"
#include "support.hpp"

using gpusentinel::read_file;
using testing::cli;
using testing::run;

namespace {

std::string quiet(const std::string& args) { return cli() + " " + args + " >/dev/null 2>&1"; }

}  // namespace

TEST_CASE("help documents every flag and exits 0") {
  testing::TempDir dir("help");
  CHECK(run(cli() + " --help > " + (dir / "top.txt")) == 0);
  const std::vector<std::pair<std::string, std::vector<std::string>>> commands = {
      {"simulate", {"--benign", "--mixed", "--seed", "--onset", "--duration", "--interval", "--config", "--out"}},
      {"ingest", {"--kernel-log", "--fps-log", "--labels", "--interval", "--out"}},
      {"featurize", {"--window-width", "--window-stride", "--out"}},
      {"train", {"--model", "--test-fraction", "--seed", "--window-width", "--window-stride", "--set", "--out"}},
      {"eval", {"--model-file", "--window-width", "--metrics-csv"}},
      {"detect",
       {"--model-file", "--rules", "--thresholds", "--debounce", "--follow", "--poll-interval", "--grace",
        "--idle-timeout", "--kernel-log", "--fps-log", "--out"}},
      {"report", {"--out"}},
  };
  for (const auto& [cmd, flags] : commands) {
    CAPTURE(cmd);
    const std::string out = dir / (cmd + ".txt");
    CHECK(run(cli() + " " + cmd + " --help > " + out) == 0);
    const std::string text = read_file(out);
    for (const auto& f : flags) CHECK(text.find(f) != std::string::npos);
  }
  CHECK(read_file(dir / "train.txt").find("[0.3]") != std::string::npos);
  CHECK(read_file(dir / "simulate.txt").find("[42]") != std::string::npos);
}

TEST_CASE("exit codes separate usage and data errors") {
  testing::TempDir dir("codes");
  CHECK(run(quiet("")) == 1);
  CHECK(run(quiet("simulate --bogus")) == 1);
  CHECK(run(quiet("simulate --duration 0 --out " + (dir / "x"))) == 1);
  CHECK(run(quiet("train " + (dir / "missing.trace"))) == 2);
  CHECK(run(quiet("ingest " + testing::fixture("malformed_sampler_number.csv").string() + " --out " +
                  (dir / "t.trace"))) == 2);
  CHECK(run(quiet("detect " + (dir / "never.csv") + " --follow --rules --grace 0.2 --poll-interval 0.05")) == 2);
}

TEST_CASE("simulate is byte-identical across runs") {
  testing::TempDir dir("sim");
  REQUIRE(run(quiet("simulate --benign 2 --mixed 2 --seed 42 --duration 120 --out " + (dir / "a"))) == 0);
  REQUIRE(run(quiet("simulate --benign 2 --mixed 2 --seed 42 --duration 120 --out " + (dir / "b"))) == 0);
  for (const char* f : {"benign_000.trace", "benign_001.trace", "mixed_000.trace", "mixed_001.trace"})
    CHECK(read_file(dir / (std::string("a/") + f)) == read_file(dir / (std::string("b/") + f)));
  REQUIRE(run(quiet("simulate --mixed 1 --seed 43 --duration 120 --out " + (dir / "c"))) == 0);
  CHECK(read_file(dir / "a/benign_000.trace") != read_file(dir / "c/mixed_000.trace"));
}

TEST_CASE("seed falls back to the environment") {
  testing::TempDir dir("env");
  REQUIRE(run("GPU_SENTINEL_SEED=5 " + quiet("simulate --duration 60 --out " + (dir / "a"))) == 0);
  REQUIRE(run(quiet("simulate --duration 60 --seed 5 --out " + (dir / "b"))) == 0);
  REQUIRE(run(quiet("simulate --duration 60 --out " + (dir / "c"))) == 0);
  CHECK(read_file(dir / "a/mixed_000.trace") == read_file(dir / "b/mixed_000.trace"));
  CHECK(read_file(dir / "a/mixed_000.trace") != read_file(dir / "c/mixed_000.trace"));
}

TEST_CASE("simulate, train, detect and report end to end") {
  testing::TempDir dir("e2e");
  REQUIRE(run(quiet("simulate --benign 4 --mixed 4 --out " + (dir / "corpus"))) == 0);
  REQUIRE(run(quiet("simulate --mixed 1 --onset 300 --seed 9 --raw --out " + (dir / "one"))) == 0);
  REQUIRE(run(quiet("simulate --benign 1 --mixed 0 --seed 10 --out " + (dir / "quiet"))) == 0);

  CHECK(run(cli() + " train " + (dir / "corpus") + " --model forest --seed 7 --out " + (dir / "a.model") + " > " +
            (dir / "train.txt")) == 0);
  CHECK(run(quiet("train " + (dir / "corpus") + " --model forest --seed 7 --out " + (dir / "b.model"))) == 0);
  CHECK(read_file(dir / "a.model") == read_file(dir / "b.model"));
  CHECK(read_file(dir / "train.txt").find("Random Forest") != std::string::npos);

  CHECK(run(quiet("detect " + (dir / "quiet/benign_000.trace") + " --model-file " + (dir / "a.model") + " --out " +
                  (dir / "benign.ndjson"))) == 0);
  CHECK(read_file(dir / "benign.ndjson").empty());
  CHECK(run(quiet("detect " + (dir / "one/mixed_000.trace") + " --model-file " + (dir / "a.model") + " --out " +
                  (dir / "mixed.ndjson"))) == 0);
  CHECK(read_file(dir / "mixed.ndjson").find("\"t_raised\":") != std::string::npos);
  CHECK(run(quiet("detect " + (dir / "one/mixed_000.trace") + " --model-file " + (dir / "a.model") +
                  " --window-width 20")) == 1);

  CHECK(run(quiet("ingest " + (dir / "one/mixed_000.sampler.csv") + " --kernel-log " +
                  (dir / "one/mixed_000.kernel.csv") + " --fps-log " + (dir / "one/mixed_000.fps.log") +
                  " --labels " + (dir / "one/mixed_000.labels") + " --out " + (dir / "ing.trace"))) == 0);
  CHECK(run(quiet("eval --model-file " + (dir / "a.model") + " " + (dir / "ing.trace"))) == 0);
  CHECK(run(quiet("featurize " + (dir / "corpus") + " --out " + (dir / "ds.csv"))) == 0);
  CHECK(run(quiet("train " + (dir / "ds.csv") + " --model logreg --out " + (dir / "lr.model"))) == 0);

  CHECK(run(quiet("report " + (dir / "one/mixed_000.trace") + " --out " + (dir / "r1"))) == 0);
  CHECK(run(quiet("report " + (dir / "one/mixed_000.trace") + " --out " + (dir / "r2"))) == 0);
  CHECK(read_file(dir / "r1/fps.svg") == read_file(dir / "r2/fps.svg"));
  CHECK(read_file(dir / "r1/power.svg") == read_file(dir / "r2/power.svg"));
  CHECK(read_file(dir / "r1/summary.csv").rfind("channel,benign_mean,miner_mean,delta_pct", 0) == 0);
  CHECK(run(quiet("report " + (dir / "quiet/benign_000.trace") + " --out " + (dir / "r3"))) == 2);
  CHECK(run(quiet("report " + (dir / "quiet/benign_000.trace") + " " + (dir / "quiet/benign_000.trace") +
                  " --out " + (dir / "r4"))) == 0);
  CHECK(read_file(dir / "r4/summary.csv").find("fps,") != std::string::npos);
}

TEST_CASE("train on a single-class corpus names the imbalance") {
  testing::TempDir dir("imb");
  REQUIRE(run(quiet("simulate --benign 2 --mixed 0 --out " + (dir / "c"))) == 0);
  CHECK(run(cli() + " train " + (dir / "c") + " --out " + (dir / "m") + " 2> " + (dir / "err.txt")) == 2);
  CHECK(read_file(dir / "err.txt").find("class imbalance") != std::string::npos);
}

TEST_CASE("follow mode matches batch replay") {
  testing::TempDir dir("follow");
  REQUIRE(run(quiet("simulate --benign 3 --mixed 3 --duration 300 --out " + (dir / "corpus"))) == 0);
  REQUIRE(run(quiet("train " + (dir / "corpus") + " --out " + (dir / "m.model"))) == 0);
  REQUIRE(run(quiet("simulate --mixed 1 --onset 150 --duration 300 --seed 3 --raw --out " + (dir / "live"))) == 0);
  const std::string stem = dir / "live/mixed_000";
  REQUIRE(run(quiet("ingest " + stem + ".sampler.csv --kernel-log " + stem + ".kernel.csv --fps-log " + stem +
                    ".fps.log --out " + (dir / "ing.trace"))) == 0);
  CHECK(run(cli() + " detect " + (dir / "ing.trace") + " --model-file " + (dir / "m.model") + " --verdicts --out " +
            (dir / "batch.ndjson") + " 2> " + (dir / "batch.err")) == 0);
  CHECK(run(cli() + " detect " + stem + ".sampler.csv --follow --kernel-log " + stem + ".kernel.csv --fps-log " +
            stem + ".fps.log --model-file " + (dir / "m.model") +
            " --poll-interval 0.02 --idle-timeout 0.3 --verdicts --out " + (dir / "follow.ndjson") + " 2> " +
            (dir / "follow.err")) == 0);
  CHECK(read_file(dir / "batch.ndjson") == read_file(dir / "follow.ndjson"));
  CHECK(read_file(dir / "batch.err") == read_file(dir / "follow.err"));
  CHECK_FALSE(read_file(dir / "batch.ndjson").empty());
}
