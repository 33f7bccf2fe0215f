#pragma once

// Dataset manifest (`manifest.json`): one object per synthesized image.
// Paths are stored relative to the manifest's directory.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

namespace abair::tensorio {

struct ManifestEntry {
  std::string clean_path;
  std::string degraded_path;
  std::optional<std::string> map_path;
  std::vector<std::string> degradations;
  std::uint64_t seed = 0;
  nlohmann::json params;  // serialized degradation parameters

  bool operator==(const ManifestEntry&) const = default;
};

struct Rejection {
  std::string path;
  std::string reason;

  bool operator==(const Rejection&) const = default;
};

struct Manifest {
  std::vector<ManifestEntry> entries;
  std::vector<Rejection> rejected;

  bool operator==(const Manifest&) const = default;
};

nlohmann::json entry_to_json(const ManifestEntry& e);
ManifestEntry entry_from_json(const nlohmann::json& j);

// Sorted keys, one entry object per line inside the arrays.
std::string manifest_to_string(const Manifest& m);
Manifest manifest_from_string(const std::string& text);

// Throws std::runtime_error if an entry references a file that does not
// exist relative to the manifest's directory.
void write_manifest(const std::filesystem::path& path, const Manifest& m);
Manifest read_manifest(const std::filesystem::path& path);

}  // namespace abair::tensorio
