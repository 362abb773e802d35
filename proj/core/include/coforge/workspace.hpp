#pragma once

#include <stdexcept>
#include <string>

#include <json.hpp>

namespace coforge {

/// Raised when a manifest-tracked artifact is missing or its content hash no
/// longer matches; commands refuse to run rather than silently recompute.
class StalenessError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

uint64_t file_fnv64(const std::string& path);

/// Directory-backed artifact ledger (manifest.json): each named artifact maps
/// to a relative path plus the FNV-1a hash of its bytes at record time.
class Workspace {
 public:
  /// Loads root/manifest.json, creating an empty manifest if absent.
  static Workspace open(const std::string& root);
  void save() const;

  bool has(const std::string& name) const;
  /// Resolved path after verifying the stored hash; throws StalenessError
  /// naming the artifact when missing or changed.
  std::string require(const std::string& name) const;
  /// Registers (or refreshes) an artifact that was just written.
  void record(const std::string& name, const std::string& rel_path);

  const std::string& root() const { return root_; }
  std::string resolve(const std::string& rel_path) const;
  const nlohmann::json& manifest() const { return manifest_; }

 private:
  std::string root_;
  nlohmann::json manifest_;
};

}  // namespace coforge
