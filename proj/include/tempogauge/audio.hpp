#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace tempogauge {

// Mono audio, samples in [-1, 1].
struct AudioClip {
  std::vector<float> samples;
  int sample_rate = 0;

  std::size_t size() const { return samples.size(); }
  double duration_seconds() const {
    return sample_rate > 0 ? static_cast<double>(samples.size()) / sample_rate
                           : 0.0;
  }
};

// Decodes RIFF/WAVE from memory. Accepts PCM 8/16/24-bit integer and 32-bit
// IEEE float, 1 or 2 channels; stereo is averaged to mono. Throws FormatError
// on malformed containers (including any chunk whose declared size overruns
// the byte stream) and UnsupportedFormatError on valid-but-unreadable
// encodings (compressed codecs, WAVE_FORMAT_EXTENSIBLE, >2 channels).
AudioClip decode_wav(const std::uint8_t* bytes, std::size_t size);
AudioClip decode_wav(const std::vector<std::uint8_t>& bytes);

AudioClip read_wav(const std::filesystem::path& path);

// 16-bit PCM mono. Samples are clamped to [-1, 1) before quantization, so a
// clip decoded from 16-bit PCM re-encodes to the identical byte stream.
std::vector<std::uint8_t> encode_wav16(const AudioClip& clip);
void write_wav16(const std::filesystem::path& path, const AudioClip& clip);

// Linear interpolation; output length = round(n * target / source).
// target_rate < 1 is a DomainError.
AudioClip resample(const AudioClip& clip, int target_rate);

}  // namespace tempogauge
