#pragma once

#include <string_view>

namespace deer {

inline constexpr std::string_view kVersion = "0.1.0";
inline constexpr std::string_view kToolName = "deer";

/// "deer 0.1.0", embedded into every output artifact.
inline std::string version_string() {
  return std::string(kToolName) + " " + std::string(kVersion);
}

}  // namespace deer
