#include <cmath>
#include <cstring>
#include <string>
#include <vector>

#include "doctest.h"
#include "json.hpp"
#include "tempogauge/errors.hpp"
#include "tempogauge/evaluation.hpp"
#include "tempogauge/synthgen.hpp"
#include "test_util.hpp"

using namespace tempogauge;

namespace {

ModelConfig small_config() {
  ModelConfig cfg;
  cfg.rnn_units = 4;
  cfg.dense_widths = {32, 16};
  return cfg;
}

}  // namespace

TEST_CASE("accuracy0 compares whole-bpm rounds") {
  CHECK(accuracy0(120.4, 120.0));
  CHECK(accuracy0(119.5, 120.0));
  CHECK_FALSE(accuracy0(121.0, 120.0));
}

TEST_CASE("accuracy1 is a four percent band") {
  CHECK(accuracy1(104.0, 100.0));
  CHECK(accuracy1(96.0, 100.0));
  CHECK_FALSE(accuracy1(104.1, 100.0));
  CHECK_FALSE(accuracy1(95.9, 100.0));
}

TEST_CASE("accuracy2 admits octave and triple relatives") {
  // A 290 estimate against 145 truth is the doubling case: the matching
  // factor reported is the truth multiple, estimate = 2 * truth.
  auto f = accuracy2(290.0, 145.0);
  REQUIRE(f.has_value());
  CHECK(*f == doctest::Approx(2.0));

  // 70 against 140 is halving.
  f = accuracy2(70.0, 140.0);
  REQUIRE(f.has_value());
  CHECK(*f == doctest::Approx(0.5));

  f = accuracy2(100.0, 100.0);
  REQUIRE(f.has_value());
  CHECK(*f == doctest::Approx(1.0));

  f = accuracy2(100.0, 300.0);
  REQUIRE(f.has_value());
  CHECK(*f == doctest::Approx(1.0 / 3.0));

  f = accuracy2(300.0, 100.0);
  REQUIRE(f.has_value());
  CHECK(*f == doctest::Approx(3.0));

  CHECK_FALSE(accuracy2(150.0, 100.0).has_value());

  // When the exact match holds, the reported factor is the one nearest 1.
  f = accuracy2(100.0, 100.0);
  CHECK(*f == doctest::Approx(1.0));
}

TEST_CASE("the accuracy family nests over the whole class grid") {
  for (int t = 30; t <= 285; t += 5) {
    for (int e = 30; e <= 285; e += 5) {
      const double truth = t, est = e;
      if (accuracy0(est, truth)) CHECK(accuracy1(est, truth));
      if (accuracy1(est, truth)) {
        auto f = accuracy2(est, truth);
        REQUIRE(f.has_value());
        CHECK(*f == doctest::Approx(1.0));
      }
    }
  }
}

TEST_CASE("estimate_track is deterministic and windows the track") {
  ClickProfile p;
  p.bpm = 120.0;
  p.duration_seconds = 30.0;
  p.seed = 23;
  AudioClip clip = gen_click_track(p).clip;

  TempoModel model = build_model(small_config(), 9);
  TempoEstimate a = estimate_track(model, clip);
  TempoEstimate b = estimate_track(model, clip);

  CHECK(a.bpm == b.bpm);
  REQUIRE(a.class_probs.size() == kNumClasses);
  CHECK(std::memcmp(a.class_probs.data(), b.class_probs.data(),
                    a.class_probs.size() * sizeof(float)) == 0);

  // Windows start every 128 frames while a full window still fits.
  const std::size_t frames = 1 + (clip.samples.size() - kFftSize) / kHopSize;
  CHECK(a.n_windows == 1 + (frames - kWindowFrames) / 128);
  CHECK(a.n_windows > 1);
  CHECK(a.bpm >= kBpmMin);
  CHECK(a.bpm <= kBpmMax);

  double sum = 0.0;
  for (float v : a.class_probs) sum += v;
  CHECK(sum == doctest::Approx(1.0).epsilon(1e-4));
}

TEST_CASE("short tracks take the stretch path") {
  // 6 s at the model rate is about 128 frames, under one window.
  ClickProfile p;
  p.bpm = 150.0;
  p.duration_seconds = 12.0;
  p.seed = 31;
  AudioClip clip = gen_click_track(p).clip;
  clip.samples.resize(static_cast<std::size_t>(6.0 * kModelSampleRate));

  TempoModel model = build_model(small_config(), 9);
  TempoEstimate e = estimate_track(model, clip);
  CHECK(e.n_windows == 1);
  CHECK(e.bpm >= kBpmMin);
  CHECK(e.bpm <= kBpmMax);
}

TEST_CASE("clips off the model rate are resampled first") {
  ClickProfile p;
  p.bpm = 120.0;
  p.duration_seconds = 15.0;
  p.seed = 37;
  AudioClip clip = gen_click_track(p).clip;

  AudioClip upsampled = resample(clip, 22050);
  TempoModel model = build_model(small_config(), 9);
  TempoEstimate native = estimate_track(model, clip);
  TempoEstimate doubled = estimate_track(model, upsampled);
  // Same content, same window count; the distributions stay close but are
  // not bit-identical because resampling is lossy.
  CHECK(native.n_windows == doubled.n_windows);
}

TEST_CASE("evaluate_manifest aggregates per dataset and flags bad files") {
  testutil::TempDir dir;
  DatasetManifest m = gen_corpus(3, 100.0, 140.0, dir.path(), 51, "zeta");
  DatasetManifest extra = gen_corpus(2, 100.0, 140.0, dir.path() / "b", 52, "alpha");
  for (const auto& e : extra.entries) {
    ManifestEntry moved = e;
    moved.path = (std::filesystem::path("b") / e.path).string();
    m.entries.push_back(moved);
  }
  ManifestEntry missing;
  missing.path = "missing.wav";
  missing.bpm = 100.0;
  missing.dataset = "zeta";
  m.entries.push_back(missing);

  TempoModel model = build_model(small_config(), 9);
  EvalReport report = evaluate_manifest(model, m, "", "weights.tgw");

  REQUIRE(report.rows.size() == 2);
  CHECK(report.rows[0].dataset == "alpha");  // sorted by name
  CHECK(report.rows[1].dataset == "zeta");
  CHECK(report.rows[0].n == 2);
  CHECK(report.rows[1].n == 3);  // the unreadable track is excluded

  REQUIRE(report.errors.size() == 1);
  CHECK(report.errors[0].find("missing.wav") != std::string::npos);

  REQUIRE(report.details.size() == 5);
  for (std::size_t i = 0; i + 1 < report.details.size(); ++i) {
    CHECK(report.details[i].path <= report.details[i + 1].path);
  }
  CHECK(report.model_path == "weights.tgw");
  CHECK(report.created_at.find("T") != std::string::npos);

  SUBCASE("split filtering narrows the row counts") {
    for (auto& e : m.entries) e.split = "train";
    m.entries[0].split = "val";
    EvalReport vals = evaluate_manifest(model, m, "val");
    REQUIRE(vals.rows.size() == 1);
    CHECK(vals.rows[0].n == 1);
    CHECK(vals.errors.empty());  // the missing track is filtered out too
  }

  SUBCASE("the table renders one-decimal percentages") {
    std::string table = render_table(report);
    CHECK(table.find("Dataset") != std::string::npos);
    CHECK(table.find("Acc2") != std::string::npos);
    CHECK(table.find("alpha") != std::string::npos);
    // Percentages carry exactly one decimal: find something like "0.0".
    CHECK(table.find(".") != std::string::npos);
  }

  SUBCASE("the json report parses and mirrors the rows") {
    nlohmann::json j = nlohmann::json::parse(report_to_json(report));
    REQUIRE(j["rows"].size() == 2);
    CHECK(j["rows"][0]["dataset"] == "alpha");
    CHECK(j["details"].size() == 5);
    CHECK(j["errors"].size() == 1);
    CHECK(j["model"] == "weights.tgw");
  }
}
