#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "doctest.h"
#include "tempogauge/audio.hpp"
#include "tempogauge/cli.hpp"
#include "tempogauge/dsp.hpp"
#include "tempogauge/synthgen.hpp"
#include "test_util.hpp"

using namespace tempogauge;

namespace {

struct CliResult {
  int status;
  std::string out;
  std::string err;
};

CliResult run_cli(const std::vector<std::string>& args) {
  std::ostringstream out, err;
  int status = cli::run(args, out, err);
  return {status, out.str(), err.str()};
}

std::filesystem::path write_click(const testutil::TempDir& dir,
                                  const std::string& name, double bpm) {
  ClickProfile p;
  p.bpm = bpm;
  p.duration_seconds = 15.0;
  p.seed = 7;
  auto path = dir / name;
  write_wav16(path, gen_click_track(p).clip);
  return path;
}

double parse_bpm_line(const std::string& line) {
  auto tab = line.find('\t');
  REQUIRE(tab != std::string::npos);
  return std::stod(line.substr(tab + 1));
}

}  // namespace

TEST_CASE("the cli requires a subcommand and offers help") {
  CliResult none = run_cli({});
  CHECK(none.status == 1);

  CliResult help = run_cli({"--help"});
  CHECK(help.status == 0);
  CHECK(help.out.find("gen") != std::string::npos);
  CHECK(help.out.find("estimate") != std::string::npos);

  CliResult unknown = run_cli({"frobnicate"});
  CHECK(unknown.status == 1);

  CliResult bad_jobs = run_cli({"--jobs", "0", "gradcheck"});
  CHECK(bad_jobs.status == 1);
}

TEST_CASE("gen writes a corpus and reports it") {
  testutil::TempDir dir;
  CliResult r = run_cli({"gen", "--count", "2", "--bpm-lo", "100", "--bpm-hi",
                         "140", "--out", (dir / "c").string(), "--seed", "3"});
  CHECK(r.status == 0);
  CHECK(r.out.find("wrote 2 tracks") != std::string::npos);
  CHECK(std::filesystem::exists(dir / "c" / "manifest.jsonl"));
  CHECK(std::filesystem::exists(dir / "c" / "synth_0000.wav"));
}

TEST_CASE("oracle prints a tab-separated tempo per file") {
  testutil::TempDir dir;
  auto wav = write_click(dir, "click.wav", 120.0);

  CliResult r = run_cli({"oracle", wav.string()});
  CHECK(r.status == 0);
  REQUIRE(r.out.find(wav.string()) == 0);
  CHECK(parse_bpm_line(r.out) == doctest::Approx(120.0).epsilon(0.04));

  // The deterministic flag must not change a single-threaded answer.
  CliResult det = run_cli({"--deterministic", "oracle", wav.string()});
  CHECK(det.status == 0);
  CHECK(det.out == r.out);

  CliResult jobs = run_cli({"--jobs", "2", "oracle", wav.string()});
  CHECK(jobs.status == 0);
  CHECK(jobs.out == r.out);

  CliResult missing = run_cli({"oracle", (dir / "no.wav").string()});
  CHECK(missing.status == 1);
  CHECK(missing.err.find("error:") == 0);
}

TEST_CASE("spectrogram dumps one csv row per mel band") {
  testutil::TempDir dir;
  auto wav = write_click(dir, "click.wav", 90.0);
  auto csv = dir / "spec.csv";

  CliResult r = run_cli({"spectrogram", wav.string(), "--out", csv.string()});
  CHECK(r.status == 0);
  REQUIRE(std::filesystem::exists(csv));

  std::ifstream f(csv);
  std::string line;
  std::size_t rows = 0;
  while (std::getline(f, line)) {
    if (rows == 0) CHECK(line.find(',') != std::string::npos);
    ++rows;
  }
  CHECK(rows == kNumMels);
}

TEST_CASE("estimate fails cleanly without weights") {
  testutil::TempDir dir;
  auto wav = write_click(dir, "click.wav", 120.0);
  CliResult r = run_cli(
      {"estimate", "--model", (dir / "none.tgw").string(), wav.string()});
  CHECK(r.status == 1);
  CHECK(r.err.find("error:") == 0);
}

TEST_CASE("gradcheck passes through the cli") {
  CliResult r = run_cli({"gradcheck"});
  CHECK(r.status == 0);
  CHECK(r.out.find("PASSED") != std::string::npos);
  CHECK(r.out.find("skipped") != std::string::npos);  // dropout
}

TEST_CASE("train, estimate and evaluate chain together") {
  testutil::TempDir dir;
  CliResult gen = run_cli({"gen", "--count", "4", "--bpm-lo", "100", "--bpm-hi",
                           "140", "--out", (dir / "data").string(), "--seed",
                           "41"});
  REQUIRE(gen.status == 0);

  auto run_dir = dir / "run";
  CliResult train = run_cli(
      {"train", "--manifest", (dir / "data" / "manifest.jsonl").string(),
       "--out", run_dir.string(), "--max-epochs", "1", "--batch-size", "4",
       "--windows-per-track", "1", "--patience", "1", "--seed", "5"});
  REQUIRE(train.status == 0);
  CHECK(train.out.find("parameters: 6424960") != std::string::npos);
  CHECK(train.out.find("6583772") != std::string::npos);
  CHECK(train.out.find("epoch 1") != std::string::npos);
  REQUIRE(std::filesystem::exists(run_dir / "weights.tgw"));
  CHECK(std::filesystem::exists(run_dir / "history.json"));
  CHECK(std::filesystem::exists(run_dir / "split.jsonl"));

  auto wav = dir / "data" / "synth_0000.wav";
  CliResult est = run_cli({"estimate", "--model",
                           (run_dir / "weights.tgw").string(), wav.string()});
  CHECK(est.status == 0);
  const double bpm = parse_bpm_line(est.out);
  CHECK(bpm >= kBpmMin);
  CHECK(bpm <= kBpmMax);

  CliResult eval = run_cli(
      {"evaluate", "--model", (run_dir / "weights.tgw").string(), "--manifest",
       (run_dir / "split.jsonl").string(), "--split", "val", "--json",
       (dir / "report.json").string()});
  CHECK(eval.status == 0);
  CHECK(eval.out.find("Dataset") != std::string::npos);
  // The split copy must re-anchor paths, so every val track really loads.
  CHECK(eval.out.find("synth") != std::string::npos);
  CHECK(eval.out.find("error:") == std::string::npos);
  CHECK(std::filesystem::exists(dir / "report.json"));
}

TEST_CASE("the seed falls back to the environment") {
  testutil::TempDir dir;
  setenv("TEMPOGAUGE_SEED", "123", 1);
  CliResult a = run_cli({"gen", "--count", "1", "--out",
                         (dir / "a").string()});
  CliResult b = run_cli({"gen", "--count", "1", "--out",
                         (dir / "b").string()});
  unsetenv("TEMPOGAUGE_SEED");
  REQUIRE(a.status == 0);
  REQUIRE(b.status == 0);

  AudioClip ca = read_wav(dir / "a" / "synth_0000.wav");
  AudioClip cb = read_wav(dir / "b" / "synth_0000.wav");
  CHECK(ca.samples == cb.samples);

  setenv("TEMPOGAUGE_SEED", "not-a-number", 1);
  CliResult bad = run_cli({"gen", "--count", "1", "--out",
                           (dir / "c").string()});
  unsetenv("TEMPOGAUGE_SEED");
  CHECK(bad.status == 1);
  CHECK(bad.err.find("TEMPOGAUGE_SEED") != std::string::npos);
}
