#include "tempogauge/manifest.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include "json.hpp"
#include "tempogauge/errors.hpp"

namespace tempogauge {

namespace {
using nlohmann::json;

const std::set<std::string> kSplits = {"train", "val", "test", "unassigned"};
}  // namespace

DatasetManifest load_manifest(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open manifest " + path.string());

  DatasetManifest m;
  m.base_dir = path.has_parent_path() ? path.parent_path()
                                      : std::filesystem::path(".");
  std::set<std::string> seen;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    std::string where = path.filename().string() + ":" + std::to_string(line_no);

    json obj = json::parse(line, nullptr, false);
    if (obj.is_discarded() || !obj.is_object()) {
      throw FormatError("manifest " + where + ": line is not a JSON object");
    }

    ManifestEntry e;
    if (!obj.contains("path") || !obj["path"].is_string() ||
        obj["path"].get<std::string>().empty()) {
      throw ValidationError("manifest " + where + ": missing or empty \"path\"");
    }
    e.path = obj["path"].get<std::string>();
    if (!obj.contains("bpm") || !obj["bpm"].is_number()) {
      throw ValidationError("manifest " + where + ": missing numeric \"bpm\"");
    }
    e.bpm = obj["bpm"].get<double>();
    if (!(e.bpm > 0.0)) {
      throw ValidationError("manifest " + where + ": bpm must be positive");
    }
    if (!obj.contains("dataset") || !obj["dataset"].is_string() ||
        obj["dataset"].get<std::string>().empty()) {
      throw ValidationError("manifest " + where +
                            ": missing or empty \"dataset\"");
    }
    e.dataset = obj["dataset"].get<std::string>();
    if (obj.contains("split")) {
      if (!obj["split"].is_string() || !kSplits.count(obj["split"].get<std::string>())) {
        throw ValidationError("manifest " + where +
                              ": split must be one of train/val/test/unassigned");
      }
      e.split = obj["split"].get<std::string>();
    }
    if (!seen.insert(e.path).second) {
      throw ValidationError("manifest " + where + ": duplicate path \"" +
                            e.path + "\"");
    }
    m.entries.push_back(std::move(e));
  }
  if (in.bad()) throw IoError("read failed on " + path.string());
  return m;
}

void save_manifest(const DatasetManifest& m, const std::filesystem::path& path) {
  std::ostringstream out;
  for (const ManifestEntry& e : m.entries) {
    json obj;
    obj["path"] = e.path;
    obj["bpm"] = e.bpm;
    obj["dataset"] = e.dataset;
    obj["split"] = e.split;
    out << obj.dump() << "\n";
  }
  std::ofstream f(path, std::ios::trunc);
  if (!f) throw IoError("cannot open " + path.string() + " for writing");
  f << out.str();
  if (!f) throw IoError("write failed on " + path.string());
}

}  // namespace tempogauge
