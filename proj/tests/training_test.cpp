#include <filesystem>
#include <random>
#include <set>
#include <sstream>
#include <string>

#include "doctest.h"
#include "json.hpp"
#include "tempogauge/errors.hpp"
#include "tempogauge/synthgen.hpp"
#include "tempogauge/training.hpp"
#include "test_util.hpp"

using namespace tempogauge;

namespace {

DatasetManifest fake_manifest(std::size_t n, const std::string& dataset) {
  DatasetManifest m;
  for (std::size_t i = 0; i < n; ++i) {
    ManifestEntry e;
    e.path = dataset + "_" + std::to_string(i) + ".wav";
    e.bpm = 100.0;
    e.dataset = dataset;
    m.entries.push_back(e);
  }
  return m;
}

std::size_t count_split(const DatasetManifest& m, const std::string& split) {
  std::size_t n = 0;
  for (const auto& e : m.entries) n += e.split == split ? 1 : 0;
  return n;
}

// Small network at the fixed 40x256 input geometry so training runs fast;
// classes stay at 256 because labels are whole-bpm classes.
ModelConfig small_train_config() {
  ModelConfig cfg;
  cfg.rnn_units = 4;
  cfg.dense_widths = {32, 16};
  return cfg;
}

}  // namespace

TEST_CASE("train config validation and strict parsing") {
  TrainConfig c;
  CHECK_NOTHROW(c.validate());
  c.batch_size = 0;
  CHECK_THROWS_AS(c.validate(), ValidationError);

  TrainConfig parsed = train_config_from_json(
      R"({"batch_size": 8, "max_epochs": 3, "early_stop_patience": 2,
          "windows_per_track_per_epoch": 1, "seed": 5})");
  CHECK(parsed.batch_size == 8);
  CHECK(parsed.max_epochs == 3);
  CHECK(parsed.early_stop_patience == 2);
  CHECK(parsed.windows_per_track_per_epoch == 1);
  CHECK(parsed.seed == 5);

  TrainConfig defaults = train_config_from_json("{}");
  CHECK(defaults.batch_size == 32);
  CHECK(defaults.max_epochs == 1000);

  try {
    train_config_from_json(R"({"batch_size": 8, "lr": 0.1})");
    FAIL("expected ValidationError");
  } catch (const ValidationError& e) {
    CHECK(std::string(e.what()).find("lr") != std::string::npos);
  }

  CHECK_THROWS_AS(train_config_from_json("[1, 2]"), ValidationError);
  CHECK_THROWS_AS(train_config_from_json("not json"), ValidationError);
  CHECK_THROWS_AS(train_config_from_file("/nonexistent/cfg.json"), IoError);
}

TEST_CASE("split_dataset assigns quotas by largest remainder") {
  SUBCASE("plain datasets get 80/20") {
    DatasetManifest m = fake_manifest(10, "a");
    split_dataset(m, 1);
    CHECK(count_split(m, "train") == 8);
    CHECK(count_split(m, "val") == 2);
    CHECK(count_split(m, "test") == 0);
  }

  SUBCASE("held-out datasets get 80/10/10") {
    DatasetManifest m = fake_manifest(443, "h");
    split_dataset(m, 1, {"h"});
    // 443 * 0.8 = 354.4: the train share holds the largest remainder.
    CHECK(count_split(m, "train") == 355);
    CHECK(count_split(m, "val") == 44);
    CHECK(count_split(m, "test") == 44);
  }

  SUBCASE("a held-out dataset needs at least ten tracks") {
    DatasetManifest m = fake_manifest(9, "h");
    CHECK_THROWS_AS(split_dataset(m, 1, {"h"}), ValidationError);
  }

  SUBCASE("existing assignments are preserved") {
    DatasetManifest m = fake_manifest(10, "a");
    m.entries[0].split = "test";
    split_dataset(m, 1);
    CHECK(m.entries[0].split == "test");
    // The remaining nine unassigned get 80/20 of their own count.
    CHECK(count_split(m, "train") == 7);  // round(9 * 0.8) by remainder
    CHECK(count_split(m, "val") == 2);
  }

  SUBCASE("assignment is a pure function of the seed") {
    DatasetManifest a = fake_manifest(20, "a");
    DatasetManifest b = fake_manifest(20, "a");
    split_dataset(a, 9);
    split_dataset(b, 9);
    for (std::size_t i = 0; i < a.entries.size(); ++i) {
      CHECK(a.entries[i].split == b.entries[i].split);
    }

    DatasetManifest c = fake_manifest(20, "a");
    split_dataset(c, 10);
    bool any_diff = false;
    for (std::size_t i = 0; i < a.entries.size(); ++i) {
      any_diff = any_diff || a.entries[i].split != c.entries[i].split;
    }
    CHECK(any_diff);
  }
}

TEST_CASE("early stopper waits out patience and resets on improvement") {
  EarlyStopper stop(3);
  CHECK(stop.update(1, 1.0));
  CHECK_FALSE(stop.update(2, 1.1));
  CHECK_FALSE(stop.update(3, 1.0));  // equal is not an improvement
  CHECK_FALSE(stop.should_stop());
  CHECK(stop.update(4, 0.9));  // resets the stale counter
  CHECK(stop.best_epoch == 4);
  CHECK_FALSE(stop.update(5, 0.95));
  CHECK_FALSE(stop.update(6, 0.95));
  CHECK_FALSE(stop.should_stop());
  CHECK_FALSE(stop.update(7, 0.95));
  CHECK(stop.should_stop());
  CHECK(stop.best == 0.9);
}

TEST_CASE("window sampler draws in-range labelled examples") {
  testutil::TempDir dir;
  DatasetManifest m = gen_corpus(3, 90.0, 150.0, dir.path(), 314);
  split_dataset(m, 2);
  REQUIRE(count_split(m, "train") == 2);

  std::vector<std::filesystem::path> paths;
  for (const auto& e : m.entries) paths.push_back(m.resolve(e));
  SpectrogramCache cache;
  cache.precompute(paths);

  WindowSampler sampler(m, cache, "train");
  CHECK(sampler.size() == 2);

  std::mt19937_64 rng(7);
  for (int i = 0; i < 8; ++i) {
    TrainingExample ex = sampler.sample(rng);
    CHECK(ex.target_class < kNumClasses);
    for (float v : ex.window.values) REQUIRE(std::isfinite(v));
  }
  // 90..150 bpm scaled by at most 1.2 stays far from the class edges.
  CHECK(sampler.clamp_events() == 0);
}

TEST_CASE("training runs end to end on a small corpus") {
  testutil::TempDir dir;
  DatasetManifest m = gen_corpus(4, 100.0, 140.0, dir.path(), 2718);
  split_dataset(m, 3);
  REQUIRE(count_split(m, "val") == 1);

  TrainConfig cfg;
  cfg.batch_size = 4;
  cfg.max_epochs = 2;
  cfg.early_stop_patience = 2;
  cfg.windows_per_track_per_epoch = 2;
  cfg.seed = 11;

  TempoModel model = build_model(small_train_config(), 5);
  std::ostringstream log;
  TrainResult result = train(m, std::move(model), cfg, &log);

  REQUIRE(result.history.epochs.size() == 2);
  CHECK(result.history.epochs[0].epoch == 1);
  CHECK(result.history.best_epoch >= 1);
  CHECK(std::isfinite(result.history.best_val_loss));
  CHECK(result.history.best_val_loss > 0.0);
  CHECK(log.str().find("epoch") != std::string::npos);

  // The returned model carries usable batch-norm statistics.
  SpectrogramWindow w{};
  TempoClassDistribution d = predict_window(result.model, w);
  CHECK(d.probs.size() == kNumClasses);

  SUBCASE("checkpoint writes both artifacts") {
    testutil::TempDir ckpt;
    checkpoint(result.model, result.history, ckpt.path());
    CHECK(std::filesystem::exists(ckpt / "weights.tgw"));
    CHECK(std::filesystem::exists(ckpt / "history.json"));
    TempoModel back = load_weights(ckpt / "weights.tgw");
    CHECK(back.cfg.rnn_units == 4);
  }
}

TEST_CASE("training requires train and val splits") {
  testutil::TempDir dir;
  DatasetManifest m = gen_corpus(2, 100.0, 140.0, dir.path(), 6);
  for (auto& e : m.entries) e.split = "train";  // no val anywhere
  TempoModel model = build_model(small_train_config(), 5);
  TrainConfig cfg;
  cfg.max_epochs = 1;
  CHECK_THROWS_AS(train(m, std::move(model), cfg, nullptr), ValidationError);
}

TEST_CASE("history serializes every epoch") {
  TrainHistory h;
  h.epochs.push_back({1, 2.5, 3.5, 0.1});
  h.epochs.push_back({2, 2.0, 3.0, 0.1});
  h.best_epoch = 2;
  h.best_val_loss = 3.0;
  h.stopped_early = true;

  nlohmann::json j = nlohmann::json::parse(history_to_json(h));
  CHECK(j["best_epoch"] == 2);
  CHECK(j["best_val_loss"] == doctest::Approx(3.0));
  CHECK(j["stopped_early"] == true);
  REQUIRE(j["epochs"].size() == 2);
  CHECK(j["epochs"][1]["train_loss"] == doctest::Approx(2.0));
}
