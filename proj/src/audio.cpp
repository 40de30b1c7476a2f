#include "tempogauge/audio.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>

#include "tempogauge/errors.hpp"

namespace tempogauge {

namespace {

std::uint16_t read_u16(const std::uint8_t* p) {
  return static_cast<std::uint16_t>(p[0] | (p[1] << 8));
}

std::uint32_t read_u32(const std::uint8_t* p) {
  return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) |
         (static_cast<std::uint32_t>(p[3]) << 24);
}

void write_u16(std::vector<std::uint8_t>& out, std::uint16_t v) {
  out.push_back(static_cast<std::uint8_t>(v & 0xff));
  out.push_back(static_cast<std::uint8_t>((v >> 8) & 0xff));
}

void write_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  out.push_back(static_cast<std::uint8_t>(v & 0xff));
  out.push_back(static_cast<std::uint8_t>((v >> 8) & 0xff));
  out.push_back(static_cast<std::uint8_t>((v >> 16) & 0xff));
  out.push_back(static_cast<std::uint8_t>((v >> 24) & 0xff));
}

constexpr std::uint16_t kFormatPcm = 0x0001;
constexpr std::uint16_t kFormatIeeeFloat = 0x0003;
constexpr std::uint16_t kFormatExtensible = 0xfffe;

float decode_sample(const std::uint8_t* p, std::uint16_t format,
                    std::uint16_t bits) {
  switch (bits) {
    case 8:  // unsigned
      return (static_cast<int>(p[0]) - 128) / 128.0f;
    case 16: {
      std::int16_t v = static_cast<std::int16_t>(read_u16(p));
      return v / 32768.0f;
    }
    case 24: {
      std::int32_t v = static_cast<std::int32_t>(
          (static_cast<std::uint32_t>(p[0]) << 8) |
          (static_cast<std::uint32_t>(p[1]) << 16) |
          (static_cast<std::uint32_t>(p[2]) << 24));
      v >>= 8;  // sign-extend from 24 bits
      return v / 8388608.0f;
    }
    case 32: {
      if (format == kFormatIeeeFloat) {
        std::uint32_t u = read_u32(p);
        float f;
        std::memcpy(&f, &u, sizeof f);
        return std::clamp(f, -1.0f, 1.0f);
      }
      std::int32_t v = static_cast<std::int32_t>(read_u32(p));
      return static_cast<float>(v / 2147483648.0);
    }
    default:
      return 0.0f;
  }
}

}  // namespace

AudioClip decode_wav(const std::uint8_t* bytes, std::size_t size) {
  if (size < 12) throw FormatError("wav: file shorter than the RIFF header");
  if (std::memcmp(bytes, "RIFF", 4) != 0 || std::memcmp(bytes + 8, "WAVE", 4) != 0) {
    throw FormatError("wav: missing RIFF/WAVE signature");
  }

  bool have_fmt = false;
  std::uint16_t format = 0, channels = 0, bits = 0;
  std::uint32_t rate = 0;
  const std::uint8_t* data = nullptr;
  std::uint32_t data_size = 0;

  std::size_t pos = 12;
  while (pos + 8 <= size) {
    const std::uint8_t* hdr = bytes + pos;
    std::uint32_t chunk_size = read_u32(hdr + 4);
    std::size_t body = pos + 8;
    if (chunk_size > size - body) {
      throw FormatError("wav: chunk size overruns the byte stream");
    }
    if (std::memcmp(hdr, "fmt ", 4) == 0) {
      if (chunk_size < 16) throw FormatError("wav: fmt chunk too small");
      const std::uint8_t* f = bytes + body;
      format = read_u16(f);
      channels = read_u16(f + 2);
      rate = read_u32(f + 4);
      bits = read_u16(f + 14);
      have_fmt = true;
    } else if (std::memcmp(hdr, "data", 4) == 0) {
      data = bytes + body;
      data_size = chunk_size;
    }
    pos = body + chunk_size + (chunk_size & 1);  // chunks are word-aligned
  }

  if (!have_fmt) throw FormatError("wav: no fmt chunk");
  if (data == nullptr) throw FormatError("wav: no data chunk");
  if (format == kFormatExtensible) {
    throw UnsupportedFormatError("wav: WAVE_FORMAT_EXTENSIBLE is not supported");
  }
  if (format != kFormatPcm && format != kFormatIeeeFloat) {
    throw UnsupportedFormatError("wav: unsupported format tag " +
                                 std::to_string(format));
  }
  if (channels < 1 || channels > 2) {
    throw UnsupportedFormatError("wav: " + std::to_string(channels) +
                                 " channels (only mono and stereo)");
  }
  bool bits_ok = (format == kFormatPcm && (bits == 8 || bits == 16 || bits == 24 || bits == 32)) ||
                 (format == kFormatIeeeFloat && bits == 32);
  if (!bits_ok) {
    throw UnsupportedFormatError("wav: unsupported sample width " +
                                 std::to_string(bits) + " for format tag " +
                                 std::to_string(format));
  }
  if (rate < 1) throw FormatError("wav: zero sample rate");

  std::size_t bytes_per_sample = bits / 8;
  std::size_t frame_size = bytes_per_sample * channels;
  if (data_size % frame_size != 0) {
    throw FormatError("wav: data chunk is not a whole number of frames");
  }
  std::size_t frames = data_size / frame_size;

  AudioClip clip;
  clip.sample_rate = static_cast<int>(rate);
  clip.samples.resize(frames);
  for (std::size_t i = 0; i < frames; ++i) {
    const std::uint8_t* p = data + i * frame_size;
    float s = decode_sample(p, format, bits);
    if (channels == 2) {
      s = 0.5f * (s + decode_sample(p + bytes_per_sample, format, bits));
    }
    clip.samples[i] = s;
  }
  return clip;
}

AudioClip decode_wav(const std::vector<std::uint8_t>& bytes) {
  return decode_wav(bytes.data(), bytes.size());
}

AudioClip read_wav(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                  std::istreambuf_iterator<char>());
  if (in.bad()) throw IoError("read failed on " + path.string());
  return decode_wav(bytes);
}

std::vector<std::uint8_t> encode_wav16(const AudioClip& clip) {
  if (clip.sample_rate < 1) throw DomainError("encode_wav16: sample rate < 1");
  std::uint32_t data_size = static_cast<std::uint32_t>(clip.samples.size() * 2);
  std::vector<std::uint8_t> out;
  out.reserve(44 + data_size);
  out.insert(out.end(), {'R', 'I', 'F', 'F'});
  write_u32(out, 36 + data_size);
  out.insert(out.end(), {'W', 'A', 'V', 'E'});
  out.insert(out.end(), {'f', 'm', 't', ' '});
  write_u32(out, 16);
  write_u16(out, kFormatPcm);
  write_u16(out, 1);
  write_u32(out, static_cast<std::uint32_t>(clip.sample_rate));
  write_u32(out, static_cast<std::uint32_t>(clip.sample_rate) * 2);
  write_u16(out, 2);
  write_u16(out, 16);
  out.insert(out.end(), {'d', 'a', 't', 'a'});
  write_u32(out, data_size);
  for (float s : clip.samples) {
    double v = std::floor(static_cast<double>(s) * 32768.0);
    v = std::clamp(v, -32768.0, 32767.0);
    write_u16(out, static_cast<std::uint16_t>(static_cast<std::int16_t>(v)));
  }
  return out;
}

void write_wav16(const std::filesystem::path& path, const AudioClip& clip) {
  std::vector<std::uint8_t> bytes = encode_wav16(clip);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("write failed on " + path.string());
}

AudioClip resample(const AudioClip& clip, int target_rate) {
  if (target_rate < 1) throw DomainError("resample: target rate < 1");
  if (clip.sample_rate < 1) throw DomainError("resample: source rate < 1");
  if (clip.sample_rate == target_rate) return clip;

  AudioClip out;
  out.sample_rate = target_rate;
  if (clip.samples.empty()) return out;

  std::size_t n = clip.samples.size();
  std::size_t out_n = static_cast<std::size_t>(std::llround(
      static_cast<double>(n) * target_rate / clip.sample_rate));
  if (out_n == 0) out_n = 1;
  out.samples.resize(out_n);
  double step = static_cast<double>(clip.sample_rate) / target_rate;
  for (std::size_t i = 0; i < out_n; ++i) {
    double pos = static_cast<double>(i) * step;
    std::size_t i0 = static_cast<std::size_t>(pos);
    if (i0 >= n - 1) {
      out.samples[i] = clip.samples[n - 1];
      continue;
    }
    double frac = pos - static_cast<double>(i0);
    out.samples[i] = static_cast<float>((1.0 - frac) * clip.samples[i0] +
                                        frac * clip.samples[i0 + 1]);
  }
  return out;
}

}  // namespace tempogauge
