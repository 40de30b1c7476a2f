#include <cmath>
#include <cstring>
#include <string>
#include <vector>

#include "doctest.h"
#include "tempogauge/audio.hpp"
#include "tempogauge/errors.hpp"
#include "test_util.hpp"

using namespace tempogauge;
using testutil::make_wav;
using testutil::push_tag;
using testutil::push_u16;
using testutil::push_u32;

TEST_CASE("16-bit wav round-trips bit-exactly through encode and decode") {
  AudioClip clip;
  clip.sample_rate = 8000;
  for (int i = -4; i <= 4; ++i) clip.samples.push_back(i / 8.0f);

  auto bytes = encode_wav16(clip);
  AudioClip back = decode_wav(bytes);
  CHECK(back.sample_rate == 8000);
  REQUIRE(back.samples.size() == clip.samples.size());

  auto again = encode_wav16(back);
  CHECK(again == bytes);
}

TEST_CASE("encode_wav16 clamps out-of-range samples") {
  AudioClip clip;
  clip.sample_rate = 8000;
  clip.samples = {2.0f, -2.0f, 1.0f};
  AudioClip back = decode_wav(encode_wav16(clip));
  CHECK(back.samples[0] == doctest::Approx(32767.0f / 32768.0f));
  CHECK(back.samples[1] == doctest::Approx(-1.0f));
  CHECK(back.samples[2] == doctest::Approx(32767.0f / 32768.0f));
}

TEST_CASE("8-bit samples decode as unsigned offset bytes") {
  auto bytes = make_wav(1, 1, 8000, 8, {128, 255, 0, 192});
  AudioClip clip = decode_wav(bytes);
  REQUIRE(clip.samples.size() == 4);
  CHECK(clip.samples[0] == doctest::Approx(0.0f));
  CHECK(clip.samples[1] == doctest::Approx(127.0f / 128.0f));
  CHECK(clip.samples[2] == doctest::Approx(-1.0f));
  CHECK(clip.samples[3] == doctest::Approx(64.0f / 128.0f));
}

TEST_CASE("24-bit samples sign-extend and scale") {
  std::vector<std::uint8_t> data;
  // 0x400000 = 4194304 -> 0.5; 0xc00000 sign-extends to -4194304 -> -0.5.
  data.insert(data.end(), {0x00, 0x00, 0x40});
  data.insert(data.end(), {0x00, 0x00, 0xc0});
  AudioClip clip = decode_wav(make_wav(1, 1, 44100, 24, data));
  REQUIRE(clip.samples.size() == 2);
  CHECK(clip.samples[0] == doctest::Approx(0.5f));
  CHECK(clip.samples[1] == doctest::Approx(-0.5f));
}

TEST_CASE("float32 samples decode with clamping") {
  std::vector<std::uint8_t> data;
  auto push_f32 = [&](float f) {
    std::uint32_t u;
    std::memcpy(&u, &f, sizeof u);
    push_u32(data, u);
  };
  push_f32(0.25f);
  push_f32(1.5f);
  push_f32(-3.0f);
  AudioClip clip = decode_wav(make_wav(3, 1, 48000, 32, data));
  REQUIRE(clip.samples.size() == 3);
  CHECK(clip.samples[0] == doctest::Approx(0.25f));
  CHECK(clip.samples[1] == doctest::Approx(1.0f));
  CHECK(clip.samples[2] == doctest::Approx(-1.0f));
}

TEST_CASE("stereo decodes to the channel mean") {
  std::vector<std::uint8_t> data;
  push_u16(data, static_cast<std::uint16_t>(std::int16_t(16384)));   // L 0.5
  push_u16(data, static_cast<std::uint16_t>(std::int16_t(-16384)));  // R -0.5
  push_u16(data, static_cast<std::uint16_t>(std::int16_t(8192)));
  push_u16(data, static_cast<std::uint16_t>(std::int16_t(8192)));
  AudioClip clip = decode_wav(make_wav(1, 2, 44100, 16, data));
  REQUIRE(clip.samples.size() == 2);
  CHECK(clip.samples[0] == doctest::Approx(0.0f));
  CHECK(clip.samples[1] == doctest::Approx(0.25f));
}

TEST_CASE("unknown chunks are skipped, word-aligned") {
  std::vector<std::uint8_t> v;
  push_tag(v, "RIFF");
  push_u32(v, 0);  // size field is not trusted anyway
  push_tag(v, "WAVE");
  push_tag(v, "junk");
  push_u32(v, 3);  // odd size: one padding byte follows
  v.insert(v.end(), {1, 2, 3, 0});
  push_tag(v, "fmt ");
  push_u32(v, 16);
  push_u16(v, 1);
  push_u16(v, 1);
  push_u32(v, 8000);
  push_u32(v, 16000);
  push_u16(v, 2);
  push_u16(v, 16);
  push_tag(v, "data");
  push_u32(v, 2);
  push_u16(v, static_cast<std::uint16_t>(std::int16_t(-32768)));
  AudioClip clip = decode_wav(v);
  REQUIRE(clip.samples.size() == 1);
  CHECK(clip.samples[0] == doctest::Approx(-1.0f));
}

TEST_CASE("malformed containers raise FormatError") {
  CHECK_THROWS_AS(decode_wav(std::vector<std::uint8_t>{1, 2, 3}), FormatError);

  std::vector<std::uint8_t> not_riff(64, 0);
  CHECK_THROWS_AS(decode_wav(not_riff), FormatError);

  // Chunk whose declared size overruns the stream.
  auto good = make_wav(1, 1, 8000, 16, {0, 0});
  auto overrun = good;
  overrun[40] = 0xff;  // data chunk size low byte
  CHECK_THROWS_AS(decode_wav(overrun), FormatError);

  // fmt only, no data.
  std::vector<std::uint8_t> no_data(good.begin(), good.begin() + 36);
  no_data[4] = 28;  // unused, keeps the header plausible
  CHECK_THROWS_AS(decode_wav(no_data), FormatError);

  // Data that is not a whole number of frames.
  auto ragged = make_wav(1, 1, 8000, 16, {0, 0, 0});
  CHECK_THROWS_AS(decode_wav(ragged), FormatError);
}

TEST_CASE("unreadable encodings raise UnsupportedFormatError") {
  CHECK_THROWS_AS(decode_wav(make_wav(0xfffe, 1, 8000, 16, {0, 0})),
                  UnsupportedFormatError);
  CHECK_THROWS_AS(decode_wav(make_wav(2, 1, 8000, 16, {0, 0})),
                  UnsupportedFormatError);
  CHECK_THROWS_AS(decode_wav(make_wav(1, 3, 8000, 16, {0, 0, 0, 0, 0, 0})),
                  UnsupportedFormatError);
  CHECK_THROWS_AS(decode_wav(make_wav(3, 1, 8000, 16, {0, 0})),
                  UnsupportedFormatError);
}

TEST_CASE("wav file round trip through the filesystem") {
  testutil::TempDir dir;
  AudioClip clip;
  clip.sample_rate = 11025;
  for (int i = 0; i < 100; ++i) {
    clip.samples.push_back(std::sin(0.1f * static_cast<float>(i)));
  }
  auto path = dir / "clip.wav";
  write_wav16(path, clip);
  AudioClip back = read_wav(path);
  CHECK(back.sample_rate == clip.sample_rate);
  REQUIRE(back.samples.size() == clip.samples.size());
  for (std::size_t i = 0; i < back.samples.size(); ++i) {
    CHECK(back.samples[i] == doctest::Approx(clip.samples[i]).epsilon(1e-4));
  }
}

TEST_CASE("read_wav on a missing path raises IoError") {
  CHECK_THROWS_AS(read_wav("/nonexistent/nowhere.wav"), IoError);
}

TEST_CASE("resample length and endpoints") {
  AudioClip clip;
  clip.sample_rate = 4;
  clip.samples = {0.0f, 1.0f, 2.0f, 3.0f};  // a ramp

  AudioClip up = resample(clip, 8);
  CHECK(up.sample_rate == 8);
  CHECK(up.samples.size() == 8);  // round(4 * 8 / 4)
  // Linear interpolation keeps a ramp linear with slope halved.
  for (std::size_t i = 0; i + 1 < up.samples.size() - 1; ++i) {
    CHECK(up.samples[i + 1] - up.samples[i] == doctest::Approx(0.5f));
  }
  // Positions past the last source sample clamp to it.
  CHECK(up.samples.back() == doctest::Approx(3.0f));

  AudioClip same = resample(clip, 4);
  CHECK(same.samples == clip.samples);

  AudioClip down = resample(up, 4);
  CHECK(down.samples.size() == 4);

  CHECK_THROWS_AS(resample(clip, 0), DomainError);
}
