#include "tempogauge/synthgen.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "tempogauge/dsp.hpp"
#include "tempogauge/errors.hpp"

namespace tempogauge {

namespace {

// splitmix64; decorrelates per-track seeds derived from one corpus seed.
std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t k) {
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (k + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

}  // namespace

GeneratedTrack gen_click_track(const ClickProfile& p) {
  if (!(p.bpm >= kBpmMin && p.bpm <= kBpmMax)) {
    throw DomainError("gen_click_track: bpm " + std::to_string(p.bpm) +
                      " outside [" + std::to_string(kBpmMin) + ", " +
                      std::to_string(kBpmMax) + "]");
  }
  if (!(p.duration_seconds >= 12.0)) {
    throw DomainError("gen_click_track: duration must be >= 12 s");
  }
  if (p.subdivision < 1 || p.subdivision > 3) {
    throw DomainError("gen_click_track: subdivision must be 1, 2 or 3");
  }
  if (p.accent_period != 3 && p.accent_period != 4 && p.accent_period != 6) {
    throw DomainError("gen_click_track: accent period must be 3, 4 or 6");
  }
  if (!(p.click_decay_ms > 0.0)) {
    throw DomainError("gen_click_track: click decay must be positive");
  }
  if (p.noise_snr_db && !(*p.noise_snr_db > 0.0)) {
    throw DomainError("gen_click_track: noise SNR must be positive dB");
  }

  const int rate = kModelSampleRate;
  const auto n = static_cast<std::size_t>(
      std::llround(p.duration_seconds * rate));
  std::vector<float> x(n, 0.0f);

  std::mt19937_64 rng(p.seed);
  std::uniform_real_distribution<double> burst_noise(-1.0, 1.0);

  const double hit_interval = 60.0 / (p.bpm * p.subdivision);
  const double tau = p.click_decay_ms * 1e-3 * rate;  // decay in samples
  const auto burst_len = static_cast<std::size_t>(std::ceil(6.0 * tau));

  for (std::size_t h = 0;; ++h) {
    auto start = static_cast<std::size_t>(
        std::llround(static_cast<double>(h) * hit_interval * rate));
    if (start >= n) break;
    double amp;
    if (h % static_cast<std::size_t>(p.subdivision) == 0) {
      std::size_t beat = h / static_cast<std::size_t>(p.subdivision);
      amp = (beat % static_cast<std::size_t>(p.accent_period) == 0) ? 2.0 : 1.0;
    } else {
      amp = 0.5;
    }
    std::size_t len = std::min(burst_len, n - start);
    for (std::size_t i = 0; i < len; ++i) {
      x[start + i] += static_cast<float>(
          amp * burst_noise(rng) * std::exp(-static_cast<double>(i) / tau));
    }
  }

  if (p.noise_snr_db) {
    double signal_power = 0.0;
    for (float v : x) signal_power += static_cast<double>(v) * v;
    signal_power /= static_cast<double>(n);
    double noise_power = signal_power / std::pow(10.0, *p.noise_snr_db / 10.0);
    std::normal_distribution<double> bg(0.0, std::sqrt(noise_power));
    for (float& v : x) v += static_cast<float>(bg(rng));
  }

  float peak = 0.0f;
  for (float v : x) peak = std::max(peak, std::abs(v));
  if (peak > 0.0f) {
    float gain = 0.9f / peak;
    for (float& v : x) v *= gain;
  }

  GeneratedTrack out;
  out.clip.samples = std::move(x);
  out.clip.sample_rate = rate;
  out.bpm = p.bpm;
  return out;
}

DatasetManifest gen_corpus(std::size_t n, double bpm_lo, double bpm_hi,
                           const std::filesystem::path& out_dir,
                           std::uint64_t seed,
                           const std::string& dataset_name) {
  if (!(bpm_lo >= kBpmMin && bpm_hi <= kBpmMax && bpm_lo < bpm_hi)) {
    throw DomainError("gen_corpus: bpm range must satisfy " +
                      std::to_string(kBpmMin) + " <= lo < hi <= " +
                      std::to_string(kBpmMax));
  }
  std::error_code ec;
  std::filesystem::create_directories(out_dir, ec);
  if (ec) throw IoError("gen_corpus: cannot create " + out_dir.string());

  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u_bpm(bpm_lo, bpm_hi);
  std::uniform_real_distribution<double> u_dur(20.0, 32.0);
  std::uniform_real_distribution<double> u_decay(3.0, 8.0);
  std::uniform_real_distribution<double> u_snr(25.0, 40.0);
  std::uniform_real_distribution<double> u01(0.0, 1.0);

  DatasetManifest m;
  m.base_dir = out_dir;
  for (std::size_t i = 0; i < n; ++i) {
    ClickProfile p;
    p.bpm = u_bpm(rng);
    p.duration_seconds = u_dur(rng);
    double sub_draw = u01(rng);
    p.subdivision = sub_draw < 0.5 ? 1 : (sub_draw < 0.8 ? 2 : 3);
    // Keep bpm / accent_period below the 30-bpm scan floor (with margin).
    if (p.bpm <= 29.5 * 3.0) {
      int choices[3] = {3, 4, 6};
      p.accent_period = choices[static_cast<std::size_t>(u01(rng) * 3.0) % 3];
    } else if (p.bpm <= 29.5 * 4.0) {
      p.accent_period = u01(rng) < 0.5 ? 4 : 6;
    } else {
      p.accent_period = 6;
    }
    p.click_decay_ms = u_decay(rng);
    if (u01(rng) < 0.5) p.noise_snr_db = u_snr(rng);
    p.seed = mix_seed(seed, i);

    GeneratedTrack track = gen_click_track(p);
    char name[32];
    std::snprintf(name, sizeof name, "synth_%04zu.wav", i);
    write_wav16(out_dir / name, track.clip);

    ManifestEntry e;
    e.path = name;
    e.bpm = track.bpm;
    e.dataset = dataset_name;
    m.entries.push_back(std::move(e));
  }
  save_manifest(m, out_dir / "manifest.jsonl");
  return m;
}

}  // namespace tempogauge
