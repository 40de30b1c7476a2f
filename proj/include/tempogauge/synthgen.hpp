#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>

#include "tempogauge/audio.hpp"
#include "tempogauge/manifest.hpp"

namespace tempogauge {

// Percussion-only test signal: decaying noise bursts on a metronome grid.
// Bar-start hits are accented +6 dB, subdivision hits sit -6 dB below the
// beat so the beat stays the dominant periodicity.
struct ClickProfile {
  double bpm = 120.0;                     // [30, 285]
  double duration_seconds = 30.0;         // >= 12
  int subdivision = 1;                    // hits per beat: 1, 2 or 3
  int accent_period = 4;                  // beats per bar: 3, 4 or 6
  double click_decay_ms = 5.0;            // burst energy decay constant
  std::optional<double> noise_snr_db;     // background noise; none = clean
  std::uint64_t seed = 0;
};

struct GeneratedTrack {
  AudioClip clip;       // mono, kModelSampleRate, peak-normalized to 0.9
  double bpm = 0.0;     // ground-truth annotation
};

// Deterministic for a given profile. Beat positions are rounded to whole
// samples individually, so the grid never drifts. DomainError on any field
// outside its documented range.
GeneratedTrack gen_click_track(const ClickProfile& profile);

// Writes n 16-bit WAVs plus manifest.jsonl into out_dir and returns the
// manifest. Tempi are drawn uniformly from [bpm_lo, bpm_hi]; the accent
// period is chosen so the bar-level periodicity falls below the scanned
// tempo range, which keeps the autocorrelation oracle locked to the beat.
DatasetManifest gen_corpus(std::size_t n, double bpm_lo, double bpm_hi,
                           const std::filesystem::path& out_dir,
                           std::uint64_t seed,
                           const std::string& dataset_name = "synth");

}  // namespace tempogauge
