#include "coforge/workspace.hpp"

#include <filesystem>
#include <fstream>
#include <sstream>

#include "coforge/design_space.hpp"
#include "coforge/util.hpp"

namespace coforge {

namespace fs = std::filesystem;

uint64_t file_fnv64(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw StalenessError("cannot read artifact file: " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  const std::string bytes = buf.str();
  return fnv1a64(bytes.data(), bytes.size());
}

Workspace Workspace::open(const std::string& root) {
  Workspace ws;
  ws.root_ = root;
  fs::create_directories(root);
  const fs::path manifest_path = fs::path(root) / "manifest.json";
  if (fs::exists(manifest_path)) {
    std::ifstream in(manifest_path);
    in >> ws.manifest_;
  } else {
    ws.manifest_ = {{"artifacts", nlohmann::json::object()}};
  }
  return ws;
}

void Workspace::save() const {
  std::ofstream out(fs::path(root_) / "manifest.json");
  if (!out) throw ConfigError("cannot write manifest in " + root_);
  out << manifest_.dump(2) << "\n";
}

std::string Workspace::resolve(const std::string& rel_path) const {
  return (fs::path(root_) / rel_path).string();
}

bool Workspace::has(const std::string& name) const {
  return manifest_.at("artifacts").contains(name);
}

std::string Workspace::require(const std::string& name) const {
  const auto& artifacts = manifest_.at("artifacts");
  if (!artifacts.contains(name))
    throw StalenessError("artifact not in manifest: " + name);
  const auto& entry = artifacts.at(name);
  const std::string path = resolve(entry.at("path").get<std::string>());
  if (!fs::exists(path))
    throw StalenessError("stale artifact '" + name + "': file missing: " + path);
  const uint64_t hash = file_fnv64(path);
  const uint64_t expected =
      std::stoull(entry.at("fnv64").get<std::string>(), nullptr, 16);
  if (hash != expected)
    throw StalenessError("stale artifact '" + name +
                         "': content hash changed for " + path);
  return path;
}

void Workspace::record(const std::string& name, const std::string& rel_path) {
  char hex[17];
  std::snprintf(hex, sizeof hex, "%016llx",
                static_cast<unsigned long long>(file_fnv64(resolve(rel_path))));
  manifest_["artifacts"][name] = {{"path", rel_path}, {"fnv64", hex}};
}

}  // namespace coforge
