#pragma once

#include <filesystem>
#include <optional>
#include <string>

#include <nlohmann/json.hpp>

namespace rolab::cache {

/// Stable content hash of a canonical config fragment, salted with the code
/// version: "sha256:<hex>". Identical fragments collide, any field change
/// does not, and the value is platform-independent.
std::string cache_key(const nlohmann::json& fragment);

/// Content-addressed file store. Safe under concurrent writers: entries are
/// written to a temp file and atomically renamed into place.
class Store {
 public:
  /// Location: explicit dir > ROLAB_CACHE_DIR > <fallback>. `read_enabled`
  /// false bypasses lookups but still records results.
  Store(std::optional<std::filesystem::path> dir, const std::filesystem::path& fallback,
        bool read_enabled);

  std::optional<nlohmann::json> load(const std::string& key) const;
  void save(const std::string& key, const nlohmann::json& payload) const;
  const std::filesystem::path& directory() const { return dir_; }

 private:
  std::filesystem::path dir_;
  bool read_enabled_;
};

}  // namespace rolab::cache
