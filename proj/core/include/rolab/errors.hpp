#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace rolab {

struct Error : std::runtime_error {
  explicit Error(const std::string& what) : std::runtime_error(what) {}
};

struct InvalidSpec : Error {
  using Error::Error;
};

/// Spacer mass would drive the residual reservoir negative while building
/// stage `stage + 1`.
struct ReservoirExhausted : Error {
  std::int64_t stage;
  ReservoirExhausted(std::int64_t n, const std::string& what) : Error(what), stage(n) {}
};

struct OutOfRange : Error {
  using Error::Error;
};

struct StageBudgetExceeded : Error {
  using Error::Error;
};

struct MismatchedConstruction : Error {
  using Error::Error;
};

struct DegenerateOrder : Error {
  using Error::Error;
};

struct BadParameter : Error {
  using Error::Error;
};

struct EmptyFamily : Error {
  using Error::Error;
};

struct DegenerateFit : Error {
  using Error::Error;
};

struct WindowTooLarge : Error {
  using Error::Error;
};

struct ResolutionExceedsData : Error {
  using Error::Error;
};

struct BadPower : Error {
  using Error::Error;
};

struct RangeMismatch : Error {
  using Error::Error;
};

struct GridMismatch : Error {
  using Error::Error;
};

struct UnboundBase : Error {
  using Error::Error;
};

/// Configuration schema violation; `path` points at the offending key.
struct ConfigError : Error {
  std::string path;
  ConfigError(const std::string& key_path, const std::string& what)
      : Error(key_path + ": " + what), path(key_path) {}
};

}  // namespace rolab
