#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <limits>
#include <random>
#include <set>
#include <string>
#include <unordered_map>
#include <vector>

#include "tempogauge/manifest.hpp"
#include "tempogauge/model.hpp"

namespace tempogauge {

// Everything else about optimization (learning rate 1e-3, momentum 0.9,
// elementwise gradient clip at 5) is fixed; these are the knobs that vary
// by experiment.
struct TrainConfig {
  std::size_t batch_size = 32;
  std::size_t max_epochs = 1000;
  std::size_t early_stop_patience = 100;
  std::size_t windows_per_track_per_epoch = 4;
  std::uint64_t seed = 0;

  void validate() const;
};

// Strict JSON object: exactly the TrainConfig fields are accepted, anything
// else is a ValidationError naming the key (so a misspelled knob never
// silently falls back to its default).
TrainConfig train_config_from_json(const std::string& text);
TrainConfig train_config_from_file(const std::filesystem::path& path);

// Assigns "unassigned" entries a split, per dataset, deterministically from
// the seed. Datasets listed in heldout get 80/10/10 train/val/test and must
// hold at least 10 unassigned tracks; all others get 80/20 train/val.
// Quotas round by largest remainder. Entries that already carry a split are
// left untouched.
void split_dataset(DatasetManifest& manifest, std::uint64_t seed,
                   const std::set<std::string>& heldout = {});

struct EpochRecord {
  std::size_t epoch = 0;  // 1-based
  double train_loss = 0.0;
  double val_loss = 0.0;
  double seconds = 0.0;
};

struct TrainHistory {
  std::vector<EpochRecord> epochs;
  std::size_t best_epoch = 0;
  double best_val_loss = 0.0;
  std::size_t label_clamp_events = 0;
  bool stopped_early = false;
};

// Tracks the best validation loss seen; stop after `patience` consecutive
// epochs without strict improvement.
struct EarlyStopper {
  std::size_t patience;
  double best = std::numeric_limits<double>::infinity();
  std::size_t best_epoch = 0;
  std::size_t stale = 0;

  explicit EarlyStopper(std::size_t p) : patience(p) {}

  bool update(std::size_t epoch, double val_loss) {
    if (val_loss < best) {
      best = val_loss;
      best_epoch = epoch;
      stale = 0;
      return true;
    }
    ++stale;
    return false;
  }

  bool should_stop() const { return stale >= patience; }
};

// Memoized mel spectrograms keyed by resolved path. precompute runs the
// decode/resample/mel chain in parallel; get afterwards is read-only.
class SpectrogramCache {
 public:
  void precompute(const std::vector<std::filesystem::path>& paths);
  const MelSpectrogram& get(const std::filesystem::path& path) const;

 private:
  std::unordered_map<std::string, MelSpectrogram> cache_;
};

struct TrainingExample {
  SpectrogramWindow window;
  std::size_t target_class = 0;
};

// Draws one augmented training example: uniform track, uniform scale factor
// from the 0.80..1.20 grid, uniform window offset (or a stretch when the
// scaled track is shorter than a window). The label moves with the applied
// time scale; labels that fall outside the class range clamp to the edge and
// are counted.
class WindowSampler {
 public:
  WindowSampler(const DatasetManifest& manifest, const SpectrogramCache& cache,
                std::string split);

  TrainingExample sample(std::mt19937_64& rng);
  std::size_t size() const { return tracks_.size(); }
  std::size_t clamp_events() const { return clamp_events_; }

 private:
  struct Track {
    std::filesystem::path path;
    double bpm;
  };
  std::vector<Track> tracks_;
  const SpectrogramCache& cache_;
  std::size_t clamp_events_ = 0;
};

struct TrainResult {
  TempoModel model;  // parameters of the best validation epoch
  TrainHistory history;
};

// Full loop: spectrogram cache, augmented sampling, SGD with momentum and
// clipping, per-epoch validation on deterministic non-overlapping tiles,
// early stopping with best-epoch snapshot. Throws DivergedError (naming
// epoch and batch) on a non-finite loss, ValidationError if the manifest
// lacks train or val entries.
TrainResult train(const DatasetManifest& manifest, TempoModel model,
                  const TrainConfig& config, std::ostream* log = nullptr);

// weights.tgw + history.json under dir, both written via temp-and-rename.
void checkpoint(TempoModel& model, const TrainHistory& history,
                const std::filesystem::path& dir);

std::string history_to_json(const TrainHistory& history);

}  // namespace tempogauge
