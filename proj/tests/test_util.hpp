#pragma once

#include <cstdint>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

namespace testutil {

// Unique scratch directory, removed on destruction.
class TempDir {
 public:
  TempDir() {
    auto base = std::filesystem::temp_directory_path();
    std::random_device rd;
    path_ = base / ("tempogauge_test_" + std::to_string(rd()) + "_" +
                    std::to_string(rd()));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const {
    return path_ / name;
  }

 private:
  std::filesystem::path path_;
};

inline void push_u16(std::vector<std::uint8_t>& v, std::uint16_t x) {
  v.push_back(static_cast<std::uint8_t>(x & 0xff));
  v.push_back(static_cast<std::uint8_t>(x >> 8));
}

inline void push_u32(std::vector<std::uint8_t>& v, std::uint32_t x) {
  v.push_back(static_cast<std::uint8_t>(x & 0xff));
  v.push_back(static_cast<std::uint8_t>((x >> 8) & 0xff));
  v.push_back(static_cast<std::uint8_t>((x >> 16) & 0xff));
  v.push_back(static_cast<std::uint8_t>((x >> 24) & 0xff));
}

inline void push_tag(std::vector<std::uint8_t>& v, const char* tag) {
  v.insert(v.end(), tag, tag + 4);
}

// Minimal RIFF/WAVE container around raw sample bytes.
inline std::vector<std::uint8_t> make_wav(std::uint16_t format,
                                          std::uint16_t channels,
                                          std::uint32_t rate,
                                          std::uint16_t bits,
                                          const std::vector<std::uint8_t>& data) {
  std::vector<std::uint8_t> v;
  push_tag(v, "RIFF");
  push_u32(v, 36 + static_cast<std::uint32_t>(data.size()));
  push_tag(v, "WAVE");
  push_tag(v, "fmt ");
  push_u32(v, 16);
  push_u16(v, format);
  push_u16(v, channels);
  push_u32(v, rate);
  push_u32(v, rate * channels * bits / 8);
  push_u16(v, static_cast<std::uint16_t>(channels * bits / 8));
  push_u16(v, bits);
  push_tag(v, "data");
  push_u32(v, static_cast<std::uint32_t>(data.size()));
  v.insert(v.end(), data.begin(), data.end());
  return v;
}

}  // namespace testutil
