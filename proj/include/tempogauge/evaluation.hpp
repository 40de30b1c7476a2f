#pragma once

#include <optional>
#include <string>
#include <vector>

#include "tempogauge/audio.hpp"
#include "tempogauge/manifest.hpp"
#include "tempogauge/model.hpp"

namespace tempogauge {

struct TempoEstimate {
  double bpm = 0.0;                // clamped to [kBpmMin, kBpmMax]
  std::vector<float> class_probs;  // mean distribution over windows
  std::size_t n_windows = 0;
};

// Whole-track estimate: windows at 128-frame hops, class distributions
// averaged, argmax (ties to the lower class). Tracks shorter than one window
// are stretched and the answer divided by the stretch's tempo multiplier.
// Clips not at the model rate are resampled first. Deterministic: same model
// and clip give bit-identical results.
TempoEstimate estimate_track(TempoModel& model, const AudioClip& clip);

// Exact agreement after rounding both tempi to whole bpm.
bool accuracy0(double estimate, double truth);

// Within 4% of the true tempo.
bool accuracy1(double estimate, double truth);

// Within 4% of k * truth for k in {1, 1/2, 1/3, 2, 3}; returns the matching
// factor nearest 1, or nullopt. accuracy1 implies accuracy2 with factor 1.
std::optional<double> accuracy2(double estimate, double truth);

struct EvalRow {
  std::string dataset;
  std::size_t n = 0;
  double acc0_pct = 0.0;
  double acc1_pct = 0.0;
  double acc2_pct = 0.0;
};

struct EvalDetail {
  std::string path;
  std::string dataset;
  double truth = 0.0;
  double estimate = 0.0;
  bool acc0 = false;
  bool acc1 = false;
  std::optional<double> acc2_factor;
};

struct EvalReport {
  std::vector<EvalRow> rows;        // per dataset, sorted by name
  std::vector<EvalDetail> details;  // sorted by path
  std::vector<std::string> errors;  // unreadable tracks, excluded from rows
  std::string model_path;
  std::string created_at;  // UTC, ISO 8601
};

// split_filter: "train", "val", "test", "unassigned", or "" for everything.
EvalReport evaluate_manifest(TempoModel& model, const DatasetManifest& manifest,
                             const std::string& split_filter = "",
                             const std::string& model_path = "");

// Fixed-width table, percentages with one decimal:
//   Dataset | N | Acc0 | Acc1 | Acc2
std::string render_table(const EvalReport& report);

std::string report_to_json(const EvalReport& report);

}  // namespace tempogauge
