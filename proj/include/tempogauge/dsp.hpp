#pragma once

#include <array>
#include <cstddef>
#include <vector>

#include "tempogauge/audio.hpp"

namespace tempogauge {

// Everything model-facing runs at this rate; callers resample first.
inline constexpr int kModelSampleRate = 11025;
inline constexpr std::size_t kFftSize = 1024;
inline constexpr std::size_t kHopSize = 512;
inline constexpr std::size_t kNumBins = kFftSize / 2 + 1;  // 513
inline constexpr std::size_t kNumMels = 40;
inline constexpr std::size_t kWindowFrames = 256;
inline constexpr double kMelLoHz = 20.0;
inline constexpr double kMelHiHz = 5000.0;
inline constexpr double kBpmMin = 30.0;
inline constexpr double kBpmMax = 285.0;

// Magnitude STFT, stored frame-major. frames = 1 + (n - kFftSize) / kHopSize;
// inputs shorter than one window are a TooShortError.
struct Spectrogram {
  std::size_t n_bins = 0;
  std::size_t n_frames = 0;
  std::vector<float> data;  // [frame][bin]

  float at(std::size_t bin, std::size_t frame) const {
    return data[frame * n_bins + bin];
  }
};

// Periodic Hann window of kFftSize, hop kHopSize, no padding. The clip must
// already be at kModelSampleRate (DomainError otherwise).
Spectrogram stft_magnitude(const AudioClip& clip);

// 40 triangular filters, edges equally spaced on the mel scale between
// kMelLoHz and kMelHiHz, each triangle peaking at 1. Built once; the cached
// instance is safe for concurrent readers.
struct MelFilterbank {
  std::array<float, kNumMels * kNumBins> weights;  // [mel][bin]
  std::array<double, kNumMels> center_hz;

  static const MelFilterbank& instance();
};

double hz_to_mel(double hz);
double mel_to_hz(double mel);

// Mel magnitudes, stored band-major so each band's time series is contiguous.
struct MelSpectrogram {
  std::size_t n_mels = 0;
  std::size_t n_frames = 0;
  double hop_seconds = 0.0;
  std::vector<float> data;  // [mel][frame]

  float at(std::size_t mel, std::size_t frame) const {
    return data[mel * n_frames + frame];
  }
  float& at(std::size_t mel, std::size_t frame) {
    return data[mel * n_frames + frame];
  }
};

MelSpectrogram mel_spectrogram(const AudioClip& clip);

// The eleven admissible playback-speed factors {0.80, 0.84, ..., 1.20}.
// ScaleFactor::of rejects anything off the grid, so a scaled spectrogram's
// label multiplier is always one of these values.
class ScaleFactor {
 public:
  static ScaleFactor of(double value);  // DomainError off the grid
  static const std::array<double, 11>& all();
  double value() const { return value_; }

 private:
  explicit ScaleFactor(double v) : value_(v) {}
  double value_;
};

struct ScaledSpectrogram {
  MelSpectrogram spec;
  double bpm_multiplier = 1.0;  // multiply the track's bpm label by this
};

// Resamples every band along time to round(frames / c) frames with linear
// interpolation; endpoints map to endpoints. Playing c times faster raises
// the labelled tempo by c. Requires >= 2 frames.
ScaledSpectrogram scale_time(const MelSpectrogram& spec, ScaleFactor c);

// Fixed model input: 40 bands x 256 frames.
struct SpectrogramWindow {
  std::array<float, kNumMels * kWindowFrames> values;
  std::size_t source_offset = 0;  // first source frame (0 for stretched input)

  float at(std::size_t mel, std::size_t frame) const {
    return values[mel * kWindowFrames + frame];
  }
  float& at(std::size_t mel, std::size_t frame) {
    return values[mel * kWindowFrames + frame];
  }
};

// offset + 256 must fit inside spec (BoundsError otherwise).
SpectrogramWindow crop_window(const MelSpectrogram& spec, std::size_t offset);

struct StretchedWindow {
  SpectrogramWindow window;
  double bpm_multiplier = 1.0;  // frames / 256, always < 1
};

// For tracks shorter than one window: stretches [2, 256) frames up to 256.
// TooShortError below 2 frames; DomainError at >= 256 (crop instead).
StretchedWindow stretch_to_window(const MelSpectrogram& spec);

// Half-wave rectified spectral flux, summed over bands; envelope[0] = 0.
std::vector<float> onset_envelope(const MelSpectrogram& spec);

// Tempo from the autocorrelation of an onset envelope. Scans integer lags
// covering [kBpmMin, kBpmMax], measures each local maximum as the mass
// above its flanking minima with a centroid-refined lag, scores it by the
// weighted mean mass over its multiples, and answers with the smallest-lag
// candidate scoring within 85% of the best; that near-tie rule prefers the
// fastest metrical level (harmonically related peaks resolve toward the
// beat, not the bar), while a halving guard rejects subdivision combs.
// Throws NoPeriodicityError when the envelope has zero variance and
// TooShortError when it cannot cover the lag range.
double autocorr_tempo(const std::vector<float>& envelope, double hop_seconds);

}  // namespace tempogauge
