#pragma once

#include <map>
#include <string>

#include "hdeid/optimizer.hpp"
#include "hdeid/registry.hpp"

namespace hdeid {

// Flat "key = value" settings with dotted keys. '#' starts a comment line.
using ConfigMap = std::map<std::string, std::string>;

ConfigMap parse_config_text(const std::string& text, const std::string& origin = "<config>");
ConfigMap load_config_file(const std::string& path);
std::string format_config(const ConfigMap& config);

struct ProviderSelection {
  std::string backend = "toy";
  std::string embedder = "toy";
  std::string attributes = "toy";
  std::string parser = "toy";
  std::string eval = "toy";
  // Per-role factory options, e.g. key "backend.h_scale" -> options["backend"]["h_scale"].
  std::map<std::string, ProviderOptions> options;

  const ProviderOptions& options_for(const std::string& role) const;
};

struct RunConfig {
  OptimizationConfig opt;
  ProviderSelection providers;
  std::string output = "hdeid_out";
  int workers = 1;
  int pca_k = 3;
};

// Overlays `values` onto `config`. Unknown keys and malformed values throw
// ConfigError naming the key.
void apply_config(const ConfigMap& values, RunConfig& config);
// Every setting of `config`, such that apply_config on defaults reproduces it.
ConfigMap to_config_map(const RunConfig& config);

// Environment variable naming the default config file.
inline constexpr const char* kConfigEnvVar = "HDEID_CONFIG";

/// defaults <- file (explicit path, else $HDEID_CONFIG if set) <- flag overrides.
RunConfig resolve_config(const std::string& file, const ConfigMap& overrides);

bool operator==(const RunConfig& a, const RunConfig& b);

}  // namespace hdeid
