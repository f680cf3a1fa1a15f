#include "rolab/cache.hpp"

#include <openssl/evp.h>
#include <unistd.h>

#include <atomic>
#include <cstdlib>
#include <fstream>

#include "rolab/errors.hpp"
#include "rolab/version.hpp"

namespace rolab::cache {

namespace fs = std::filesystem;

std::string cache_key(const nlohmann::json& fragment) {
  std::string text = std::string(kVersion) + "|" + fragment.dump();
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(text.data(), text.size(), digest, &len, EVP_sha256(), nullptr) != 1)
    throw Error("sha256 digest failed");
  static const char* hex = "0123456789abcdef";
  std::string out = "sha256:";
  for (unsigned int i = 0; i < len; ++i) {
    out += hex[digest[i] >> 4];
    out += hex[digest[i] & 0xf];
  }
  return out;
}

Store::Store(std::optional<fs::path> dir, const fs::path& fallback, bool read_enabled)
    : read_enabled_(read_enabled) {
  if (dir) {
    dir_ = *dir;
  } else if (const char* env = std::getenv("ROLAB_CACHE_DIR")) {
    dir_ = env;
  } else {
    dir_ = fallback;
  }
  fs::create_directories(dir_);
}

std::optional<nlohmann::json> Store::load(const std::string& key) const {
  if (!read_enabled_) return std::nullopt;
  fs::path file = dir_ / (key + ".json");
  std::ifstream in(file);
  if (!in) return std::nullopt;
  try {
    nlohmann::json payload;
    in >> payload;
    return payload;
  } catch (const nlohmann::json::exception&) {
    return std::nullopt;  // corrupt entry: treat as a miss
  }
}

void Store::save(const std::string& key, const nlohmann::json& payload) const {
  fs::path file = dir_ / (key + ".json");
  static std::atomic<unsigned> counter{0};
  fs::path tmp = dir_ / (key + ".tmp." + std::to_string(::getpid()) + "." +
                         std::to_string(counter.fetch_add(1)));
  {
    std::ofstream out(tmp);
    if (!out) throw Error("cannot write cache entry " + tmp.string());
    out << payload.dump(2) << "\n";
  }
  std::error_code ec;
  fs::rename(tmp, file, ec);
  if (ec) fs::remove(tmp, ec);
}

}  // namespace rolab::cache
