#include <zlib.h>

#include <cstring>
#include <fstream>

#include "json.hpp"
#include "tempogauge/errors.hpp"
#include "tempogauge/model.hpp"

namespace tempogauge {

namespace {

using nlohmann::json;

constexpr char kMagic[3] = {'T', 'G', 'W'};
constexpr char kVersion = '1';
constexpr const char* kNormScheme = "per_window_standardize";

json config_to_json(const ModelConfig& c) {
  return json{{"n_mels", c.n_mels},
              {"window_frames", c.window_frames},
              {"rnn_layers", c.rnn_layers},
              {"rnn_units", c.rnn_units},
              {"pool_k", c.pool_k},
              {"dense_widths", c.dense_widths},
              {"n_classes", c.n_classes},
              {"dropout_p", c.dropout_p}};
}

ModelConfig config_from_json(const json& j) {
  ModelConfig c;
  try {
    c.n_mels = j.at("n_mels").get<std::size_t>();
    c.window_frames = j.at("window_frames").get<std::size_t>();
    c.rnn_layers = j.at("rnn_layers").get<std::size_t>();
    c.rnn_units = j.at("rnn_units").get<std::size_t>();
    c.pool_k = j.at("pool_k").get<std::size_t>();
    c.dense_widths = j.at("dense_widths").get<std::vector<std::size_t>>();
    c.n_classes = j.at("n_classes").get<std::size_t>();
    c.dropout_p = j.at("dropout_p").get<double>();
  } catch (const json::exception& e) {
    throw ValidationError(std::string("weights header: bad config: ") +
                          e.what());
  }
  return c;
}

void append_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  out.push_back(static_cast<std::uint8_t>(v & 0xff));
  out.push_back(static_cast<std::uint8_t>((v >> 8) & 0xff));
  out.push_back(static_cast<std::uint8_t>((v >> 16) & 0xff));
  out.push_back(static_cast<std::uint8_t>((v >> 24) & 0xff));
}

std::uint32_t read_u32(const std::uint8_t* p) {
  return static_cast<std::uint32_t>(p[0]) |
         (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) |
         (static_cast<std::uint32_t>(p[3]) << 24);
}

}  // namespace

void save_weights(TempoModel& model, const std::filesystem::path& path) {
  std::vector<nn::TensorRef<float>> refs = model.net.params();
  for (const auto& b : model.net.buffers()) refs.push_back(b);

  json header;
  header["format_version"] = 1;
  header["config"] = config_to_json(model.cfg);
  header["seed"] = model.seed;
  header["normalization"] = {{"scheme", kNormScheme},
                             {"eps", static_cast<double>(kNormEps)}};
  header["bn_stats_ready"] = {model.net.bn_in.stats_ready,
                              model.net.bn_mid.stats_ready};
  json tensors = json::array();
  for (const auto& r : refs) {
    tensors.push_back({{"name", r.name},
                       {"shape", r.value->shape()},
                       {"kind", r.grad ? "param" : "buffer"}});
  }
  header["tensors"] = std::move(tensors);
  std::string header_str = header.dump();

  std::vector<std::uint8_t> bytes;
  bytes.reserve(12 + header_str.size());
  bytes.insert(bytes.end(), kMagic, kMagic + 3);
  bytes.push_back(static_cast<std::uint8_t>(kVersion));
  append_u32(bytes, static_cast<std::uint32_t>(header_str.size()));
  bytes.insert(bytes.end(), header_str.begin(), header_str.end());
  for (const auto& r : refs) {
    // float32 little-endian; this writer targets little-endian hosts.
    const auto* p = reinterpret_cast<const std::uint8_t*>(r.value->data());
    bytes.insert(bytes.end(), p, p + r.value->numel() * sizeof(float));
  }
  std::uint32_t crc = static_cast<std::uint32_t>(
      ::crc32(0, bytes.data(), static_cast<uInt>(bytes.size())));
  append_u32(bytes, crc);

  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open " + tmp.string() + " for writing");
    out.write(reinterpret_cast<const char*>(bytes.data()),
              static_cast<std::streamsize>(bytes.size()));
    out.flush();
    if (!out) throw IoError("write failed on " + tmp.string());
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) {
    std::filesystem::remove(tmp, ec);
    throw IoError("cannot move weights into place at " + path.string());
  }
}

TempoModel load_weights(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                  std::istreambuf_iterator<char>());
  if (in.bad()) throw IoError("read failed on " + path.string());

  if (bytes.size() < 12) throw CorruptionError("weights: file truncated");
  if (std::memcmp(bytes.data(), kMagic, 3) != 0) {
    throw FormatError("weights: bad magic, not a weights file");
  }
  char version = static_cast<char>(bytes[3]);
  if (version != kVersion) {
    throw VersionError(std::string("weights: file is format version '") +
                       version + "', this build reads version '" + kVersion +
                       "'");
  }
  std::uint32_t crc_stored = read_u32(bytes.data() + bytes.size() - 4);
  std::uint32_t crc_actual = static_cast<std::uint32_t>(
      ::crc32(0, bytes.data(), static_cast<uInt>(bytes.size() - 4)));
  if (crc_stored != crc_actual) {
    throw CorruptionError("weights: checksum mismatch");
  }

  std::uint32_t header_len = read_u32(bytes.data() + 4);
  if (8 + static_cast<std::size_t>(header_len) + 4 > bytes.size()) {
    throw CorruptionError("weights: header overruns the file");
  }
  json header = json::parse(bytes.begin() + 8, bytes.begin() + 8 + header_len,
                            nullptr, false);
  if (header.is_discarded() || !header.is_object()) {
    throw ValidationError("weights: header is not a JSON object");
  }
  if (!header.contains("normalization") ||
      header["normalization"].value("scheme", "") != kNormScheme) {
    throw ValidationError("weights: unknown input normalization scheme");
  }

  ModelConfig cfg = config_from_json(header.at("config"));
  TempoModel model(cfg);
  model.seed = header.value("seed", std::uint64_t{0});

  std::vector<nn::TensorRef<float>> refs = model.net.params();
  for (const auto& b : model.net.buffers()) refs.push_back(b);
  std::size_t expect_bytes = 0;
  for (const auto& r : refs) expect_bytes += r.value->numel() * sizeof(float);
  std::size_t have_bytes = bytes.size() - 12 - header_len;
  if (have_bytes != expect_bytes) {
    throw CorruptionError("weights: tensor data is " +
                          std::to_string(have_bytes) + " bytes, expected " +
                          std::to_string(expect_bytes));
  }

  if (!header.contains("tensors") || !header["tensors"].is_array() ||
      header["tensors"].size() != refs.size()) {
    throw ValidationError("weights: tensor table does not match the config");
  }
  const std::uint8_t* cursor = bytes.data() + 8 + header_len;
  for (std::size_t i = 0; i < refs.size(); ++i) {
    const json& t = header["tensors"][i];
    std::string name = t.value("name", "");
    if (name != refs[i].name) {
      throw ValidationError("weights: tensor " + std::to_string(i) + " is \"" +
                            name + "\", expected \"" + refs[i].name + "\"");
    }
    std::vector<std::size_t> shape =
        t.value("shape", std::vector<std::size_t>{});
    if (shape != refs[i].value->shape()) {
      throw ValidationError("weights: tensor \"" + name + "\" has shape " +
                            nn::shape_str(shape) + ", model expects " +
                            nn::shape_str(refs[i].value->shape()));
    }
    std::memcpy(refs[i].value->data(), cursor,
                refs[i].value->numel() * sizeof(float));
    cursor += refs[i].value->numel() * sizeof(float);
  }

  auto ready = header.value("bn_stats_ready", std::vector<bool>{true, true});
  model.net.bn_in.stats_ready = ready.size() > 0 ? static_cast<bool>(ready[0]) : true;
  model.net.bn_mid.stats_ready = ready.size() > 1 ? static_cast<bool>(ready[1]) : true;
  return model;
}

}  // namespace tempogauge
