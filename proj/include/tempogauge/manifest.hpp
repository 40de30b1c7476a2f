#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace tempogauge {

// One annotated track. `path` is kept exactly as written in the manifest;
// resolve against the manifest's directory via DatasetManifest::resolve.
struct ManifestEntry {
  std::string path;
  double bpm = 0.0;
  std::string dataset;
  std::string split = "unassigned";
};

struct DatasetManifest {
  std::vector<ManifestEntry> entries;
  std::filesystem::path base_dir;  // directory the manifest was loaded from

  std::filesystem::path resolve(const ManifestEntry& e) const {
    std::filesystem::path p(e.path);
    return p.is_absolute() ? p : base_dir / p;
  }
};

// JSON-lines, one object per track: {"path", "bpm", "dataset", "split"?}.
// Unknown keys are ignored; a missing split loads as "unassigned".
// ValidationError (naming the offending line) on: missing/empty path or
// dataset, non-positive or non-numeric bpm, split outside
// {train, val, test, unassigned}, duplicate path. FormatError on lines that
// are not JSON objects. Blank lines are skipped.
DatasetManifest load_manifest(const std::filesystem::path& path);

// Writes one compact JSON object per line, entries in order. A split of
// "unassigned" is written out explicitly so save/load round-trips exactly.
void save_manifest(const DatasetManifest& m, const std::filesystem::path& path);

}  // namespace tempogauge
