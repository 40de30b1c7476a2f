#include "tempogauge/training.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>
#include <ostream>

#include "json.hpp"
#include "tempogauge/audio.hpp"
#include "tempogauge/dsp.hpp"
#include "tempogauge/errors.hpp"
#include "tempogauge/optimizer.hpp"
#include "tempogauge/threading.hpp"

namespace tempogauge {

namespace {
using nlohmann::json;
}

void TrainConfig::validate() const {
  if (batch_size < 1) throw ValidationError("training config: batch_size < 1");
  if (max_epochs < 1) throw ValidationError("training config: max_epochs < 1");
  if (early_stop_patience < 1) {
    throw ValidationError("training config: early_stop_patience < 1");
  }
  if (windows_per_track_per_epoch < 1) {
    throw ValidationError("training config: windows_per_track_per_epoch < 1");
  }
}

TrainConfig train_config_from_json(const std::string& text) {
  json j = json::parse(text, nullptr, false);
  if (j.is_discarded() || !j.is_object()) {
    throw ValidationError("training config: not a JSON object");
  }
  TrainConfig c;
  for (const auto& [key, value] : j.items()) {
    if (key == "batch_size") {
      c.batch_size = value.get<std::size_t>();
    } else if (key == "max_epochs") {
      c.max_epochs = value.get<std::size_t>();
    } else if (key == "early_stop_patience") {
      c.early_stop_patience = value.get<std::size_t>();
    } else if (key == "windows_per_track_per_epoch") {
      c.windows_per_track_per_epoch = value.get<std::size_t>();
    } else if (key == "seed") {
      c.seed = value.get<std::uint64_t>();
    } else {
      throw ValidationError("training config: unknown key \"" + key + "\"");
    }
  }
  c.validate();
  return c;
}

TrainConfig train_config_from_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open training config " + path.string());
  std::string text((std::istreambuf_iterator<char>(in)),
                   std::istreambuf_iterator<char>());
  return train_config_from_json(text);
}

namespace {

// Largest-remainder apportionment of n into the given fractions; ties go to
// the earlier fraction.
std::vector<std::size_t> apportion(std::size_t n,
                                   const std::vector<double>& fractions) {
  std::vector<std::size_t> base(fractions.size());
  std::vector<double> remainder(fractions.size());
  std::size_t assigned = 0;
  for (std::size_t i = 0; i < fractions.size(); ++i) {
    double quota = static_cast<double>(n) * fractions[i];
    base[i] = static_cast<std::size_t>(std::floor(quota));
    remainder[i] = quota - static_cast<double>(base[i]);
    assigned += base[i];
  }
  std::vector<std::size_t> order(fractions.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return remainder[a] > remainder[b];
  });
  for (std::size_t i = 0; assigned < n; ++i, ++assigned) {
    ++base[order[i % order.size()]];
  }
  return base;
}

}  // namespace

void split_dataset(DatasetManifest& manifest, std::uint64_t seed,
                   const std::set<std::string>& heldout) {
  // Group the unassigned entries per dataset, datasets in sorted order so
  // the shuffle stream is reproducible.
  std::map<std::string, std::vector<std::size_t>> groups;
  for (std::size_t i = 0; i < manifest.entries.size(); ++i) {
    if (manifest.entries[i].split == "unassigned") {
      groups[manifest.entries[i].dataset].push_back(i);
    }
  }
  std::mt19937_64 rng(seed);
  for (auto& [dataset, idx] : groups) {
    bool three_way = heldout.count(dataset) > 0;
    if (three_way && idx.size() < 10) {
      throw ValidationError("split: held-out dataset \"" + dataset + "\" has " +
                            std::to_string(idx.size()) +
                            " unassigned tracks; need at least 10 for 80/10/10");
    }
    std::shuffle(idx.begin(), idx.end(), rng);
    std::vector<std::size_t> counts =
        three_way ? apportion(idx.size(), {0.8, 0.1, 0.1})
                  : apportion(idx.size(), {0.8, 0.2});
    if (counts.size() < 2 || counts[0] == 0 || counts[1] == 0 ||
        (three_way && counts[2] == 0)) {
      throw ValidationError("split: dataset \"" + dataset + "\" has " +
                            std::to_string(idx.size()) +
                            " unassigned tracks; too few to split");
    }
    std::size_t k = 0;
    const char* names[3] = {"train", "val", "test"};
    for (std::size_t s = 0; s < counts.size(); ++s) {
      for (std::size_t j = 0; j < counts[s]; ++j) {
        manifest.entries[idx[k++]].split = names[s];
      }
    }
  }
}

void SpectrogramCache::precompute(
    const std::vector<std::filesystem::path>& paths) {
  std::vector<std::filesystem::path> todo;
  for (const auto& p : paths) {
    if (!cache_.count(p.string())) todo.push_back(p);
  }
  std::sort(todo.begin(), todo.end());
  todo.erase(std::unique(todo.begin(), todo.end()), todo.end());

  std::vector<MelSpectrogram> done(todo.size());
  std::vector<std::string> failure(todo.size());
  parallel_for(todo.size(), [&](std::size_t begin, std::size_t end) {
    for (std::size_t i = begin; i < end; ++i) {
      try {
        AudioClip clip = read_wav(todo[i]);
        done[i] = mel_spectrogram(resample(clip, kModelSampleRate));
      } catch (const Error& e) {
        failure[i] = e.what();
      }
    }
  });
  for (std::size_t i = 0; i < todo.size(); ++i) {
    if (!failure[i].empty()) {
      throw ValidationError("cannot prepare " + todo[i].string() + ": " +
                            failure[i]);
    }
    cache_.emplace(todo[i].string(), std::move(done[i]));
  }
}

const MelSpectrogram& SpectrogramCache::get(
    const std::filesystem::path& path) const {
  auto it = cache_.find(path.string());
  if (it == cache_.end()) {
    throw ValidationError("spectrogram cache: " + path.string() +
                          " was never prepared");
  }
  return it->second;
}

WindowSampler::WindowSampler(const DatasetManifest& manifest,
                             const SpectrogramCache& cache, std::string split)
    : cache_(cache) {
  for (const auto& e : manifest.entries) {
    if (e.split == split) tracks_.push_back({manifest.resolve(e), e.bpm});
  }
  if (tracks_.empty()) {
    throw ValidationError("sampler: no entries with split \"" + split + "\"");
  }
}

TrainingExample WindowSampler::sample(std::mt19937_64& rng) {
  std::uniform_int_distribution<std::size_t> pick_track(0, tracks_.size() - 1);
  std::uniform_int_distribution<std::size_t> pick_scale(
      0, ScaleFactor::all().size() - 1);
  const Track& track = tracks_[pick_track(rng)];
  double c = ScaleFactor::all()[pick_scale(rng)];

  ScaledSpectrogram scaled =
      scale_time(cache_.get(track.path), ScaleFactor::of(c));
  double label_bpm = track.bpm * scaled.bpm_multiplier;

  TrainingExample ex;
  if (scaled.spec.n_frames >= kWindowFrames) {
    std::uniform_int_distribution<std::size_t> pick_offset(
        0, scaled.spec.n_frames - kWindowFrames);
    ex.window = crop_window(scaled.spec, pick_offset(rng));
  } else {
    StretchedWindow sw = stretch_to_window(scaled.spec);
    ex.window = sw.window;
    label_bpm *= sw.bpm_multiplier;
  }
  auto rounded = std::llround(label_bpm);
  if (rounded < static_cast<long long>(kBpmMin) ||
      rounded > static_cast<long long>(kBpmMax)) {
    ++clamp_events_;
  }
  ex.target_class = bpm_to_class(label_bpm);
  return ex;
}

namespace {

struct ValTile {
  SpectrogramWindow window;
  std::size_t target_class;
};

std::vector<ValTile> build_val_tiles(const DatasetManifest& manifest,
                                     const SpectrogramCache& cache) {
  std::vector<ValTile> tiles;
  for (const auto& e : manifest.entries) {
    if (e.split != "val") continue;
    const MelSpectrogram& spec = cache.get(manifest.resolve(e));
    if (spec.n_frames >= kWindowFrames) {
      for (std::size_t off = 0; off + kWindowFrames <= spec.n_frames;
           off += kWindowFrames) {
        tiles.push_back({crop_window(spec, off), bpm_to_class(e.bpm)});
      }
    } else {
      StretchedWindow sw = stretch_to_window(spec);
      tiles.push_back(
          {sw.window, bpm_to_class(e.bpm * sw.bpm_multiplier)});
    }
  }
  return tiles;
}

double validation_loss(TempoModel& model, const std::vector<ValTile>& tiles,
                       std::size_t batch_size) {
  double total = 0.0;
  std::size_t done = 0;
  while (done < tiles.size()) {
    std::size_t b = std::min(batch_size, tiles.size() - done);
    nn::Tensor<float> x({b, kWindowFrames, kNumMels});
    std::vector<std::size_t> targets(b);
    for (std::size_t i = 0; i < b; ++i) {
      fill_batch_row(x, i, tiles[done + i].window);
      targets[i] = tiles[done + i].target_class;
    }
    nn::Tensor<float> logits = model.net.forward(x, nn::Mode::kInfer);
    float loss = nn::softmax_cce<float>(logits, targets, nullptr);
    total += static_cast<double>(loss) * static_cast<double>(b);
    done += b;
  }
  return total / static_cast<double>(tiles.size());
}

}  // namespace

TrainResult train(const DatasetManifest& manifest, TempoModel model,
                  const TrainConfig& config, std::ostream* log) {
  config.validate();

  std::vector<std::filesystem::path> train_paths, all_paths;
  std::size_t n_val = 0;
  for (const auto& e : manifest.entries) {
    if (e.split == "train" || e.split == "val") {
      all_paths.push_back(manifest.resolve(e));
      if (e.split == "val") ++n_val;
    }
  }
  if (all_paths.size() == n_val || n_val == 0) {
    throw ValidationError(
        "train: manifest needs both train and val entries; run the split "
        "first");
  }

  SpectrogramCache cache;
  cache.precompute(all_paths);
  WindowSampler sampler(manifest, cache, "train");
  std::vector<ValTile> val_tiles = build_val_tiles(manifest, cache);

  std::mt19937_64 rng(config.seed);
  nn::SgdMomentum<float> opt;
  std::vector<nn::TensorRef<float>> params = model.net.params();

  TrainHistory history;
  EarlyStopper stopper(config.early_stop_patience);
  TempoModel best = model;

  std::size_t examples_per_epoch =
      sampler.size() * config.windows_per_track_per_epoch;
  std::size_t batches =
      std::max<std::size_t>(1, examples_per_epoch / config.batch_size);

  for (std::size_t epoch = 1; epoch <= config.max_epochs; ++epoch) {
    auto t0 = std::chrono::steady_clock::now();
    double epoch_loss = 0.0;
    for (std::size_t bi = 0; bi < batches; ++bi) {
      nn::Tensor<float> x({config.batch_size, kWindowFrames, kNumMels});
      std::vector<std::size_t> targets(config.batch_size);
      for (std::size_t i = 0; i < config.batch_size; ++i) {
        TrainingExample ex = sampler.sample(rng);
        fill_batch_row(x, i, ex.window);
        targets[i] = ex.target_class;
      }
      model.net.zero_grad();
      nn::Tensor<float> logits = model.net.forward(x, nn::Mode::kTrain, &rng);
      nn::Tensor<float> dlogits;
      float loss = nn::softmax_cce(logits, targets, &dlogits);
      if (!std::isfinite(loss)) {
        throw DivergedError("train: non-finite loss at epoch " +
                            std::to_string(epoch) + ", batch " +
                            std::to_string(bi + 1));
      }
      model.net.backward(dlogits);
      opt.step(params);
      epoch_loss += static_cast<double>(loss);
    }
    epoch_loss /= static_cast<double>(batches);

    double val_loss = validation_loss(model, val_tiles, config.batch_size);
    if (!std::isfinite(val_loss)) {
      throw DivergedError("train: non-finite validation loss at epoch " +
                          std::to_string(epoch));
    }
    auto t1 = std::chrono::steady_clock::now();
    double seconds = std::chrono::duration<double>(t1 - t0).count();
    history.epochs.push_back({epoch, epoch_loss, val_loss, seconds});

    bool improved = stopper.update(epoch, val_loss);
    if (improved) best = model;
    if (log) {
      (*log) << "epoch " << epoch << "  train " << epoch_loss << "  val "
             << val_loss << (improved ? "  (best)" : "") << "  " << seconds
             << " s\n";
      log->flush();
    }
    if (stopper.should_stop()) {
      history.stopped_early = true;
      break;
    }
  }

  history.best_epoch = stopper.best_epoch;
  history.best_val_loss = stopper.best;
  history.label_clamp_events = sampler.clamp_events();

  TrainResult result{std::move(best), std::move(history)};
  return result;
}

std::string history_to_json(const TrainHistory& history) {
  json j;
  j["best_epoch"] = history.best_epoch;
  j["best_val_loss"] = history.best_val_loss;
  j["label_clamp_events"] = history.label_clamp_events;
  j["stopped_early"] = history.stopped_early;
  j["epochs"] = json::array();
  for (const auto& e : history.epochs) {
    j["epochs"].push_back({{"epoch", e.epoch},
                           {"train_loss", e.train_loss},
                           {"val_loss", e.val_loss},
                           {"seconds", e.seconds}});
  }
  return j.dump(2);
}

void checkpoint(TempoModel& model, const TrainHistory& history,
                const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError("checkpoint: cannot create " + dir.string());
  save_weights(model, dir / "weights.tgw");

  std::filesystem::path tmp = dir / "history.json.tmp";
  {
    std::ofstream out(tmp, std::ios::trunc);
    if (!out) throw IoError("checkpoint: cannot open " + tmp.string());
    out << history_to_json(history) << "\n";
    if (!out) throw IoError("checkpoint: write failed on " + tmp.string());
  }
  std::filesystem::rename(tmp, dir / "history.json", ec);
  if (ec) throw IoError("checkpoint: cannot move history into place");
}

}  // namespace tempogauge
