#pragma once

#include <string>
#include <string_view>

namespace gridwatch {

inline constexpr std::string_view kVersion = "0.1.0";
inline constexpr std::string_view kArtifactFormat = "gridwatch-model/1";

// 16-hex-digit FNV-1a digest used to stamp report files with the config
// that produced them.
std::string config_hash(std::string_view canonical_config);

}  // namespace gridwatch
