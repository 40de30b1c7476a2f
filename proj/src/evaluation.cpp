#include "tempogauge/evaluation.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <ctime>
#include <map>

#include "json.hpp"
#include "tempogauge/dsp.hpp"
#include "tempogauge/errors.hpp"
#include "tempogauge/threading.hpp"

namespace tempogauge {

namespace {
using nlohmann::json;

constexpr std::size_t kEstimateHop = 128;  // frames between estimate windows

void check_pair(double estimate, double truth, const char* who) {
  if (!(truth > 0.0) || !std::isfinite(truth)) {
    throw DomainError(std::string(who) + ": ground truth must be positive");
  }
  if (!(estimate > 0.0) || !std::isfinite(estimate)) {
    throw DomainError(std::string(who) + ": estimate must be positive");
  }
}

}  // namespace

TempoEstimate estimate_track(TempoModel& model, const AudioClip& clip) {
  AudioClip at_rate = clip.sample_rate == kModelSampleRate
                          ? clip
                          : resample(clip, kModelSampleRate);
  MelSpectrogram spec = mel_spectrogram(at_rate);

  TempoEstimate out;
  std::vector<double> mean_probs(model.cfg.n_classes, 0.0);
  double stretch_multiplier = 1.0;

  if (spec.n_frames < kWindowFrames) {
    StretchedWindow sw = stretch_to_window(spec);
    stretch_multiplier = sw.bpm_multiplier;
    TempoClassDistribution dist = predict_window(model, sw.window);
    for (std::size_t i = 0; i < dist.probs.size(); ++i) {
      mean_probs[i] = dist.probs[i];
    }
    out.n_windows = 1;
  } else {
    std::vector<std::size_t> offsets;
    for (std::size_t off = 0; off + kWindowFrames <= spec.n_frames;
         off += kEstimateHop) {
      offsets.push_back(off);
    }
    std::size_t done = 0;
    const std::size_t chunk = 32;
    while (done < offsets.size()) {
      std::size_t b = std::min(chunk, offsets.size() - done);
      nn::Tensor<float> x({b, kWindowFrames, kNumMels});
      for (std::size_t i = 0; i < b; ++i) {
        fill_batch_row(x, i, crop_window(spec, offsets[done + i]));
      }
      nn::Tensor<float> logits = model.net.forward(x, nn::Mode::kInfer);
      nn::Tensor<float> probs = nn::softmax_rows(logits);
      for (std::size_t i = 0; i < b; ++i) {
        for (std::size_t c = 0; c < model.cfg.n_classes; ++c) {
          mean_probs[c] += static_cast<double>(probs(i, c));
        }
      }
      done += b;
    }
    out.n_windows = offsets.size();
    for (double& p : mean_probs) p /= static_cast<double>(out.n_windows);
  }

  std::size_t best = 0;
  for (std::size_t c = 1; c < mean_probs.size(); ++c) {
    if (mean_probs[c] > mean_probs[best]) best = c;
  }
  double bpm = class_to_bpm(best) / stretch_multiplier;
  out.bpm = std::clamp(bpm, kBpmMin, kBpmMax);
  out.class_probs.assign(mean_probs.begin(), mean_probs.end());
  return out;
}

bool accuracy0(double estimate, double truth) {
  check_pair(estimate, truth, "accuracy0");
  return std::llround(estimate) == std::llround(truth);
}

bool accuracy1(double estimate, double truth) {
  check_pair(estimate, truth, "accuracy1");
  return std::abs(estimate - truth) <= 0.04 * truth;
}

std::optional<double> accuracy2(double estimate, double truth) {
  check_pair(estimate, truth, "accuracy2");
  // Ordered by |k - 1| so the returned factor is the one nearest 1.
  static constexpr double kFactors[5] = {1.0, 0.5, 1.0 / 3.0, 2.0, 3.0};
  for (double k : kFactors) {
    double target = k * truth;
    if (std::abs(estimate - target) <= 0.04 * target) return k;
  }
  return std::nullopt;
}

EvalReport evaluate_manifest(TempoModel& model, const DatasetManifest& manifest,
                             const std::string& split_filter,
                             const std::string& model_path) {
  std::vector<const ManifestEntry*> picked;
  for (const auto& e : manifest.entries) {
    if (split_filter.empty() || e.split == split_filter) picked.push_back(&e);
  }

  struct Outcome {
    EvalDetail detail;
    std::string error;
  };
  std::vector<Outcome> outcomes(picked.size());
  parallel_for(picked.size(), [&](std::size_t begin, std::size_t end) {
    // Forward passes cache activations inside the net, so each worker
    // estimates on its own copy of the model.
    TempoModel local = model;
    for (std::size_t i = begin; i < end; ++i) {
      const ManifestEntry& e = *picked[i];
      Outcome& o = outcomes[i];
      o.detail.path = e.path;
      o.detail.dataset = e.dataset;
      o.detail.truth = e.bpm;
      try {
        AudioClip clip = read_wav(manifest.resolve(e));
        TempoEstimate est = estimate_track(local, clip);
        o.detail.estimate = est.bpm;
        o.detail.acc0 = accuracy0(est.bpm, e.bpm);
        o.detail.acc1 = accuracy1(est.bpm, e.bpm);
        o.detail.acc2_factor = accuracy2(est.bpm, e.bpm);
      } catch (const Error& ex) {
        o.error = ex.what();
      }
    }
  });

  EvalReport report;
  report.model_path = model_path;
  {
    auto now = std::chrono::system_clock::now();
    std::time_t tt = std::chrono::system_clock::to_time_t(now);
    char buf[32];
    std::tm tm_utc{};
    gmtime_r(&tt, &tm_utc);
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm_utc);
    report.created_at = buf;
  }

  struct Tally {
    std::size_t n = 0, a0 = 0, a1 = 0, a2 = 0;
  };
  std::map<std::string, Tally> tallies;
  for (auto& o : outcomes) {
    if (!o.error.empty()) {
      report.errors.push_back(o.detail.path + ": " + o.error);
      continue;
    }
    Tally& t = tallies[o.detail.dataset];
    ++t.n;
    t.a0 += o.detail.acc0 ? 1 : 0;
    t.a1 += o.detail.acc1 ? 1 : 0;
    t.a2 += o.detail.acc2_factor.has_value() ? 1 : 0;
    report.details.push_back(std::move(o.detail));
  }
  std::sort(report.details.begin(), report.details.end(),
            [](const EvalDetail& a, const EvalDetail& b) {
              return a.path < b.path;
            });
  for (const auto& [dataset, t] : tallies) {
    double n = static_cast<double>(t.n);
    report.rows.push_back({dataset, t.n, 100.0 * t.a0 / n, 100.0 * t.a1 / n,
                           100.0 * t.a2 / n});
  }
  return report;
}

std::string render_table(const EvalReport& report) {
  std::size_t name_w = 7;  // "Dataset"
  for (const auto& r : report.rows) name_w = std::max(name_w, r.dataset.size());

  auto line = [&](const std::string& name, const std::string& n,
                  const std::string& a0, const std::string& a1,
                  const std::string& a2) {
    std::string out = name;
    out.append(name_w - name.size(), ' ');
    auto pad = [](const std::string& s, std::size_t w) {
      return std::string(w > s.size() ? w - s.size() : 0, ' ') + s;
    };
    out += pad(n, 7);
    out += pad(a0, 8);
    out += pad(a1, 8);
    out += pad(a2, 8);
    return out + "\n";
  };

  std::string out = line("Dataset", "N", "Acc0", "Acc1", "Acc2");
  char buf[32];
  for (const auto& r : report.rows) {
    std::string cols[3];
    const double vals[3] = {r.acc0_pct, r.acc1_pct, r.acc2_pct};
    for (int i = 0; i < 3; ++i) {
      std::snprintf(buf, sizeof buf, "%.1f", vals[i]);
      cols[i] = buf;
    }
    out += line(r.dataset, std::to_string(r.n), cols[0], cols[1], cols[2]);
  }
  return out;
}

std::string report_to_json(const EvalReport& report) {
  json j;
  j["model"] = report.model_path;
  j["created_at"] = report.created_at;
  j["rows"] = json::array();
  for (const auto& r : report.rows) {
    j["rows"].push_back({{"dataset", r.dataset},
                         {"n", r.n},
                         {"acc0", r.acc0_pct},
                         {"acc1", r.acc1_pct},
                         {"acc2", r.acc2_pct}});
  }
  j["details"] = json::array();
  for (const auto& d : report.details) {
    json item = {{"path", d.path},
                 {"dataset", d.dataset},
                 {"bpm", d.truth},
                 {"estimate", d.estimate},
                 {"acc0", d.acc0},
                 {"acc1", d.acc1}};
    if (d.acc2_factor) {
      item["acc2_factor"] = *d.acc2_factor;
    } else {
      item["acc2_factor"] = nullptr;
    }
    j["details"].push_back(std::move(item));
  }
  j["errors"] = report.errors;
  return j.dump(2);
}

}  // namespace tempogauge
