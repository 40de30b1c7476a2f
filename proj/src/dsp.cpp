#include "tempogauge/dsp.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <numbers>

#include "tempogauge/errors.hpp"
#include "tempogauge/threading.hpp"

namespace tempogauge {

namespace {

// Iterative radix-2 FFT, in place. Size must be a power of two.
void fft_inplace(std::complex<double>* a, std::size_t n) {
  for (std::size_t i = 1, j = 0; i < n; ++i) {
    std::size_t bit = n >> 1;
    for (; j & bit; bit >>= 1) j ^= bit;
    j ^= bit;
    if (i < j) std::swap(a[i], a[j]);
  }
  for (std::size_t len = 2; len <= n; len <<= 1) {
    double ang = -2.0 * std::numbers::pi / static_cast<double>(len);
    std::complex<double> wlen(std::cos(ang), std::sin(ang));
    for (std::size_t i = 0; i < n; i += len) {
      std::complex<double> w(1.0, 0.0);
      for (std::size_t k = 0; k < len / 2; ++k) {
        std::complex<double> u = a[i + k];
        std::complex<double> v = a[i + k + len / 2] * w;
        a[i + k] = u + v;
        a[i + k + len / 2] = u - v;
        w *= wlen;
      }
    }
  }
}

const std::array<double, kFftSize>& hann_window() {
  static const std::array<double, kFftSize> w = [] {
    std::array<double, kFftSize> out{};
    for (std::size_t i = 0; i < kFftSize; ++i) {
      out[i] = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi *
                                    static_cast<double>(i) / kFftSize);
    }
    return out;
  }();
  return w;
}

}  // namespace

Spectrogram stft_magnitude(const AudioClip& clip) {
  if (clip.sample_rate != kModelSampleRate) {
    throw DomainError("stft: clip is at " + std::to_string(clip.sample_rate) +
                      " Hz, expected " + std::to_string(kModelSampleRate));
  }
  if (clip.samples.size() < kFftSize) {
    throw TooShortError("stft: need at least " + std::to_string(kFftSize) +
                        " samples, got " + std::to_string(clip.samples.size()));
  }

  Spectrogram out;
  out.n_bins = kNumBins;
  out.n_frames = 1 + (clip.samples.size() - kFftSize) / kHopSize;
  out.data.resize(out.n_bins * out.n_frames);

  const auto& win = hann_window();
  const float* x = clip.samples.data();
  parallel_for(out.n_frames, [&](std::size_t begin, std::size_t end) {
    std::vector<std::complex<double>> buf(kFftSize);
    for (std::size_t t = begin; t < end; ++t) {
      const float* frame = x + t * kHopSize;
      for (std::size_t i = 0; i < kFftSize; ++i) {
        buf[i] = std::complex<double>(frame[i] * win[i], 0.0);
      }
      fft_inplace(buf.data(), kFftSize);
      float* row = out.data.data() + t * kNumBins;
      for (std::size_t b = 0; b < kNumBins; ++b) {
        row[b] = static_cast<float>(std::abs(buf[b]));
      }
    }
  });
  return out;
}

double hz_to_mel(double hz) { return 2595.0 * std::log10(1.0 + hz / 700.0); }
double mel_to_hz(double mel) {
  return 700.0 * (std::pow(10.0, mel / 2595.0) - 1.0);
}

const MelFilterbank& MelFilterbank::instance() {
  static const MelFilterbank fb = [] {
    MelFilterbank out;
    out.weights.fill(0.0f);
    const double mel_lo = hz_to_mel(kMelLoHz);
    const double mel_hi = hz_to_mel(kMelHiHz);
    std::array<double, kNumMels + 2> edges;
    for (std::size_t i = 0; i < edges.size(); ++i) {
      edges[i] = mel_lo + (mel_hi - mel_lo) * static_cast<double>(i) /
                              static_cast<double>(kNumMels + 1);
    }
    for (std::size_t m = 0; m < kNumMels; ++m) {
      out.center_hz[m] = mel_to_hz(edges[m + 1]);
      for (std::size_t b = 0; b < kNumBins; ++b) {
        double f = static_cast<double>(b) * kModelSampleRate / kFftSize;
        double mel = hz_to_mel(f);
        double rise = (mel - edges[m]) / (edges[m + 1] - edges[m]);
        double fall = (edges[m + 2] - mel) / (edges[m + 2] - edges[m + 1]);
        double w = std::min(rise, fall);
        if (w > 0.0) out.weights[m * kNumBins + b] = static_cast<float>(w);
      }
    }
    return out;
  }();
  return fb;
}

MelSpectrogram mel_spectrogram(const AudioClip& clip) {
  Spectrogram stft = stft_magnitude(clip);
  const MelFilterbank& fb = MelFilterbank::instance();

  // Each triangle's support is one contiguous bin run.
  std::array<std::pair<std::size_t, std::size_t>, kNumMels> support;
  for (std::size_t m = 0; m < kNumMels; ++m) {
    std::size_t lo = 0, hi = 0;
    const float* w = fb.weights.data() + m * kNumBins;
    while (lo < kNumBins && w[lo] == 0.0f) ++lo;
    hi = lo;
    while (hi < kNumBins && w[hi] != 0.0f) ++hi;
    support[m] = {lo, hi};
  }

  MelSpectrogram out;
  out.n_mels = kNumMels;
  out.n_frames = stft.n_frames;
  out.hop_seconds = static_cast<double>(kHopSize) / kModelSampleRate;
  out.data.resize(kNumMels * stft.n_frames);
  parallel_for(stft.n_frames, [&](std::size_t begin, std::size_t end) {
    for (std::size_t t = begin; t < end; ++t) {
      const float* frame = stft.data.data() + t * kNumBins;
      for (std::size_t m = 0; m < kNumMels; ++m) {
        const float* w = fb.weights.data() + m * kNumBins;
        double acc = 0.0;
        for (std::size_t b = support[m].first; b < support[m].second; ++b) {
          acc += static_cast<double>(w[b]) * frame[b];
        }
        out.data[m * out.n_frames + t] = static_cast<float>(acc);
      }
    }
  });
  return out;
}

ScaleFactor ScaleFactor::of(double value) {
  for (double v : all()) {
    if (std::abs(value - v) < 1e-9) return ScaleFactor(v);
  }
  throw DomainError("scale factor " + std::to_string(value) +
                    " is not on the 0.80..1.20 grid (step 0.04)");
}

const std::array<double, 11>& ScaleFactor::all() {
  static const std::array<double, 11> factors = [] {
    std::array<double, 11> out{};
    for (int i = 0; i < 11; ++i) out[i] = 0.80 + 0.04 * i;
    return out;
  }();
  return factors;
}

ScaledSpectrogram scale_time(const MelSpectrogram& spec, ScaleFactor c) {
  if (spec.n_frames < 2) throw TooShortError("scale_time: need >= 2 frames");
  std::size_t t_in = spec.n_frames;
  auto t_out = static_cast<std::size_t>(
      std::llround(static_cast<double>(t_in) / c.value()));
  if (t_out < 2) t_out = 2;

  ScaledSpectrogram out;
  out.bpm_multiplier = c.value();
  out.spec.n_mels = spec.n_mels;
  out.spec.n_frames = t_out;
  out.spec.hop_seconds = spec.hop_seconds;
  out.spec.data.resize(spec.n_mels * t_out);
  double step = static_cast<double>(t_in - 1) / static_cast<double>(t_out - 1);
  for (std::size_t m = 0; m < spec.n_mels; ++m) {
    const float* src = spec.data.data() + m * t_in;
    float* dst = out.spec.data.data() + m * t_out;
    for (std::size_t j = 0; j < t_out; ++j) {
      double pos = static_cast<double>(j) * step;
      auto i0 = static_cast<std::size_t>(pos);
      if (i0 >= t_in - 1) {
        dst[j] = src[t_in - 1];
        continue;
      }
      double frac = pos - static_cast<double>(i0);
      dst[j] = static_cast<float>((1.0 - frac) * src[i0] + frac * src[i0 + 1]);
    }
  }
  return out;
}

SpectrogramWindow crop_window(const MelSpectrogram& spec, std::size_t offset) {
  if (spec.n_mels != kNumMels) {
    throw ShapeError("crop_window: expected " + std::to_string(kNumMels) +
                     " bands");
  }
  if (offset + kWindowFrames > spec.n_frames) {
    throw BoundsError("crop_window: offset " + std::to_string(offset) +
                      " + " + std::to_string(kWindowFrames) + " exceeds " +
                      std::to_string(spec.n_frames) + " frames");
  }
  SpectrogramWindow out;
  out.source_offset = offset;
  for (std::size_t m = 0; m < kNumMels; ++m) {
    const float* src = spec.data.data() + m * spec.n_frames + offset;
    std::copy(src, src + kWindowFrames, out.values.begin() + m * kWindowFrames);
  }
  return out;
}

StretchedWindow stretch_to_window(const MelSpectrogram& spec) {
  if (spec.n_mels != kNumMels) {
    throw ShapeError("stretch_to_window: expected " + std::to_string(kNumMels) +
                     " bands");
  }
  if (spec.n_frames < 2) {
    throw TooShortError("stretch_to_window: need >= 2 frames");
  }
  if (spec.n_frames >= kWindowFrames) {
    throw DomainError("stretch_to_window: input already has " +
                      std::to_string(spec.n_frames) +
                      " frames; crop_window applies");
  }
  std::size_t t_in = spec.n_frames;
  StretchedWindow out;
  out.bpm_multiplier =
      static_cast<double>(t_in) / static_cast<double>(kWindowFrames);
  out.window.source_offset = 0;
  double step = static_cast<double>(t_in - 1) / (kWindowFrames - 1);
  for (std::size_t m = 0; m < kNumMels; ++m) {
    const float* src = spec.data.data() + m * t_in;
    float* dst = out.window.values.data() + m * kWindowFrames;
    for (std::size_t j = 0; j < kWindowFrames; ++j) {
      double pos = static_cast<double>(j) * step;
      auto i0 = static_cast<std::size_t>(pos);
      if (i0 >= t_in - 1) {
        dst[j] = src[t_in - 1];
        continue;
      }
      double frac = pos - static_cast<double>(i0);
      dst[j] = static_cast<float>((1.0 - frac) * src[i0] + frac * src[i0 + 1]);
    }
  }
  return out;
}

std::vector<float> onset_envelope(const MelSpectrogram& spec) {
  if (spec.n_frames < 2) {
    throw TooShortError("onset_envelope: need >= 2 frames");
  }
  std::vector<float> env(spec.n_frames, 0.0f);
  for (std::size_t t = 1; t < spec.n_frames; ++t) {
    double acc = 0.0;
    for (std::size_t m = 0; m < spec.n_mels; ++m) {
      float d = spec.data[m * spec.n_frames + t] -
                spec.data[m * spec.n_frames + t - 1];
      if (d > 0.0f) acc += d;
    }
    env[t] = static_cast<float>(acc);
  }
  return env;
}

double autocorr_tempo(const std::vector<float>& envelope, double hop_seconds) {
  if (!(hop_seconds > 0.0)) {
    throw DomainError("autocorr_tempo: hop must be positive");
  }
  const auto kmax = static_cast<std::size_t>(
      std::floor(60.0 / (kBpmMin * hop_seconds)));
  const auto kmin = std::max<std::size_t>(
      1, static_cast<std::size_t>(std::ceil(60.0 / (kBpmMax * hop_seconds))));
  if (kmin > kmax) {
    throw DomainError("autocorr_tempo: hop too coarse for the tempo range");
  }
  const std::size_t n = envelope.size();
  if (n < kmax + 3) {
    throw TooShortError("autocorr_tempo: envelope of " + std::to_string(n) +
                        " frames cannot cover lag " + std::to_string(kmax + 1));
  }

  double mean = 0.0;
  for (float v : envelope) mean += v;
  mean /= static_cast<double>(n);
  std::vector<double> d(n);
  double var = 0.0;
  for (std::size_t t = 0; t < n; ++t) {
    d[t] = envelope[t] - mean;
    var += d[t] * d[t];
  }
  if (var <= 0.0) {
    throw NoPeriodicityError("autocorr_tempo: envelope has zero variance");
  }

  // Overlap-normalized autocorrelation, padded two lags past the scan range
  // so every candidate has a full neighborhood.
  const std::size_t klo = kmin > 2 ? kmin - 2 : 1;
  const std::size_t khi = kmax + 2;
  std::vector<double> c(khi + 1, 0.0);
  for (std::size_t k = klo; k <= khi; ++k) {
    double acc = 0.0;
    for (std::size_t t = 0; t + k < n; ++t) acc += d[t] * d[t + k];
    c[k] = acc / static_cast<double>(n - k);
  }

  // A periodic spike train's correlation peak spreads over neighboring lags
  // when the period is not a whole number of frames, and how much of it the
  // single tallest lag keeps depends on the quantization phase, which
  // differs between the beat lag and its multiples. The phase-invariant
  // statistic is the peak's mass above its own flanking minima, with the
  // refined lag as the centroid of that mass.
  std::vector<std::size_t> maxima;
  for (std::size_t k = kmin; k <= kmax; ++k) {
    if (c[k] >= c[k - 1] && c[k] > c[k + 1]) maxima.push_back(k);
  }

  struct Candidate {
    double lag;
    double mass;
  };
  std::vector<Candidate> cands;
  auto in_range = [&](double bpm) {
    return bpm >= kBpmMin - 1e-9 && bpm <= kBpmMax + 1e-9;
  };
  for (std::size_t i = 0; i < maxima.size(); ++i) {
    const std::size_t k = maxima[i];
    std::size_t jl = k, jr = k;
    while (jl > klo && c[jl - 1] < c[jl]) --jl;
    while (jr < khi && c[jr + 1] < c[jr]) ++jr;
    const double floor_level = 0.5 * (c[jl] + c[jr]);

    // Window wide enough to cover the spread peak but never reaching into a
    // neighboring peak of a dense subdivision comb.
    std::size_t gap = khi;
    if (i > 0) gap = std::min(gap, k - maxima[i - 1]);
    if (i + 1 < maxima.size()) gap = std::min(gap, maxima[i + 1] - k);
    const std::size_t hw = gap > 4 ? 2 : 1;

    double mass = 0.0, moment = 0.0;
    const std::size_t wlo = (k - klo >= hw) ? k - hw : klo;
    for (std::size_t j = wlo; j <= std::min(khi, k + hw); ++j) {
      double p = std::max(0.0, c[j] - floor_level);
      mass += p;
      moment += p * static_cast<double>(j);
    }
    if (!(mass > 0.0)) continue;
    double lag = std::clamp(moment / mass, static_cast<double>(k) - 1.0,
                            static_cast<double>(k) + 1.0);
    cands.push_back({lag, mass});
  }

  // Even with phase-invariant masses, a beat falling exactly between two
  // frames keeps losing to its integer-aligned even multiples. Scoring each
  // candidate by the weighted mean of the masses at its multiples averages
  // the quantization phases out, and the 1/m weights keep a subdivision
  // comb (weak peaks interleaved with strong beat-coincident ones) below
  // the pure beat comb. The odd-multiple restriction of the same score
  // separates further: a subdivision lag has only weak odd multiples while
  // a true beat's odd multiples stay strong.
  // Multiples beyond kmax - 1 cannot have a measured candidate, so counting
  // them (as zero mass) would dilute a genuine comb; m = 1 always counts
  // because a candidate is its own evidence.
  auto comb = [&](double lag, bool odd_only) {
    double num = 0.0, den = 0.0;
    for (std::size_t m = 1; m == 1 || lag * static_cast<double>(m) <=
                                          static_cast<double>(kmax) - 1.0;
         ++m) {
      if (odd_only && m % 2 == 0) continue;
      const double target = lag * static_cast<double>(m);
      const double w = 1.0 / static_cast<double>(m);
      den += w;
      double mass = 0.0;
      for (const Candidate& cd : cands) {
        if (std::abs(cd.lag - target) <= 1.25) mass = std::max(mass, cd.mass);
      }
      num += w * mass;
    }
    return den > 0.0 ? num / den : 0.0;
  };

  struct Scored {
    double lag;
    double score;
  };
  std::vector<Scored> tie;
  double best = 0.0;
  for (const Candidate& cd : cands) {
    if (in_range(60.0 / (cd.lag * hop_seconds))) {
      best = std::max(best, comb(cd.lag, false));
    }
  }
  if (!(best > 0.0)) {
    // No usable interior peak: take the plain argmax over the scan range.
    std::size_t best_k = kmin;
    for (std::size_t k = kmin; k <= kmax; ++k) {
      if (c[k] > c[best_k]) best_k = k;
    }
    return 60.0 / (static_cast<double>(best_k) * hop_seconds);
  }
  for (const Candidate& cd : cands) {
    double score = comb(cd.lag, false);
    if (score >= 0.85 * best && in_range(60.0 / (cd.lag * hop_seconds))) {
      tie.push_back({cd.lag, score});
    }
  }
  std::sort(tie.begin(), tie.end(),
            [](const Scored& a, const Scored& b) { return a.lag < b.lag; });

  // Combs rooted at multiples of the beat lag score nearly equally, so the
  // tie resolves toward the smallest lag, i.e. the fastest metrical level.
  // A subdivision comb sneaking into the tie is caught by the halving
  // guard: if a tie mate sits at twice the lag and the odd multiples alone
  // are weak relative to it, the candidate is a subdivision artifact.
  for (const Scored& s : tie) {
    const Scored* doubled = nullptr;
    for (const Scored& t : tie) {
      if (std::abs(t.lag - 2.0 * s.lag) <= 1.6) doubled = &t;
    }
    if (doubled != nullptr && comb(s.lag, true) < 0.78 * doubled->score) {
      continue;
    }
    return 60.0 / (s.lag * hop_seconds);
  }
  return 60.0 / (tie.front().lag * hop_seconds);
}

}  // namespace tempogauge
