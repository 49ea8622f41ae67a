#include "gridwatch/version.hpp"

#include <cstdio>

#include "gridwatch/seeding.hpp"

namespace gridwatch {

std::string config_hash(std::string_view canonical_config) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx",
                static_cast<unsigned long long>(fnv1a64(canonical_config)));
  return buf;
}

}  // namespace gridwatch
