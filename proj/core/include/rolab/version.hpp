#pragma once

namespace rolab {

// Participates in cache keys: any release invalidates cached results.
inline constexpr const char* kVersion = "0.1.0";

}  // namespace rolab
