#include "abair/manifest.hpp"

#include <fstream>
#include <sstream>
#include <stdexcept>

namespace abair::tensorio {

using nlohmann::json;

json entry_to_json(const ManifestEntry& e) {
  json j;
  j["clean_path"] = e.clean_path;
  j["degraded_path"] = e.degraded_path;
  if (e.map_path) j["map_path"] = *e.map_path;
  j["degradations"] = e.degradations;
  j["seed"] = e.seed;
  j["params"] = e.params;
  return j;
}

ManifestEntry entry_from_json(const json& j) {
  ManifestEntry e;
  e.clean_path = j.at("clean_path").get<std::string>();
  e.degraded_path = j.at("degraded_path").get<std::string>();
  if (j.contains("map_path") && !j["map_path"].is_null()) {
    e.map_path = j["map_path"].get<std::string>();
  }
  e.degradations = j.at("degradations").get<std::vector<std::string>>();
  e.seed = j.at("seed").get<std::uint64_t>();
  e.params = j.at("params");
  return e;
}

namespace {

template <typename T, typename F>
void write_array(std::ostream& os, const std::vector<T>& items, F&& to_json) {
  os << '[';
  for (std::size_t i = 0; i < items.size(); ++i) {
    os << (i ? ",\n" : "\n") << to_json(items[i]).dump();
  }
  os << (items.empty() ? "]" : "\n]");
}

}  // namespace

std::string manifest_to_string(const Manifest& m) {
  std::ostringstream os;
  os << "{\"entries\":";
  write_array(os, m.entries, entry_to_json);
  os << ",\"rejected\":";
  write_array(os, m.rejected, [](const Rejection& r) {
    return json{{"path", r.path}, {"reason", r.reason}};
  });
  os << "}\n";
  return os.str();
}

Manifest manifest_from_string(const std::string& text) {
  const auto j = json::parse(text);
  Manifest m;
  for (const auto& e : j.at("entries")) m.entries.push_back(entry_from_json(e));
  if (j.contains("rejected")) {
    for (const auto& r : j["rejected"]) {
      m.rejected.push_back({r.at("path").get<std::string>(), r.at("reason").get<std::string>()});
    }
  }
  return m;
}

void write_manifest(const std::filesystem::path& path, const Manifest& m) {
  const auto base = path.parent_path();
  for (const auto& e : m.entries) {
    for (const auto* p : {&e.clean_path, &e.degraded_path}) {
      if (!std::filesystem::exists(base / *p)) {
        throw std::runtime_error("manifest references missing file: " + *p);
      }
    }
    if (e.map_path && !std::filesystem::exists(base / *e.map_path)) {
      throw std::runtime_error("manifest references missing file: " + *e.map_path);
    }
  }
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw std::runtime_error("cannot open for writing: " + path.string());
  f << manifest_to_string(m);
  if (!f) throw std::runtime_error("write failed: " + path.string());
}

Manifest read_manifest(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open for reading: " + path.string());
  std::stringstream ss;
  ss << f.rdbuf();
  return manifest_from_string(ss.str());
}

}  // namespace abair::tensorio
