#include "hdeid/registry.hpp"

namespace hdeid {

std::uint64_t option_u64(const ProviderOptions& options, const std::string& key, std::uint64_t fallback) {
  auto it = options.find(key);
  if (it == options.end()) return fallback;
  try {
    std::size_t used = 0;
    const std::uint64_t v = std::stoull(it->second, &used);
    if (used == it->second.size()) return v;
  } catch (const std::exception&) {
  }
  throw ConfigError("option '" + key + "' expects an unsigned integer, got '" + it->second + "'");
}

double option_double(const ProviderOptions& options, const std::string& key, double fallback) {
  auto it = options.find(key);
  if (it == options.end()) return fallback;
  try {
    std::size_t used = 0;
    const double v = std::stod(it->second, &used);
    if (used == it->second.size()) return v;
  } catch (const std::exception&) {
  }
  throw ConfigError("option '" + key + "' expects a number, got '" + it->second + "'");
}

bool option_bool(const ProviderOptions& options, const std::string& key, bool fallback) {
  auto it = options.find(key);
  if (it == options.end()) return fallback;
  if (it->second == "true" || it->second == "1") return true;
  if (it->second == "false" || it->second == "0") return false;
  throw ConfigError("option '" + key + "' expects true or false, got '" + it->second + "'");
}

}  // namespace hdeid
