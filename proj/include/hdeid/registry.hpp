#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <vector>

#include "hdeid/errors.hpp"

namespace hdeid {

// Flat key/value options handed to a factory (keys without the provider prefix).
using ProviderOptions = std::map<std::string, std::string>;

template <class Interface, class... Args>
class AdapterRegistry {
 public:
  using Factory = std::function<std::unique_ptr<Interface>(const ProviderOptions&, Args...)>;

  explicit AdapterRegistry(std::string kind) : kind_(std::move(kind)) {}

  void register_adapter(const std::string& name, Factory factory) {
    std::lock_guard lock(mutex_);
    if (factories_.count(name)) throw ConfigError(kind_ + " adapter '" + name + "' is already registered");
    factories_.emplace(name, std::move(factory));
  }

  std::unique_ptr<Interface> create(const std::string& name, const ProviderOptions& options, Args... args) const {
    Factory factory;
    {
      std::lock_guard lock(mutex_);
      auto it = factories_.find(name);
      if (it == factories_.end()) {
        std::string known;
        for (const auto& [k, _] : factories_) known += (known.empty() ? "" : ", ") + k;
        throw ConfigError("unknown " + kind_ + " '" + name + "'; registered: " + known);
      }
      factory = it->second;
    }
    return factory(options, args...);
  }

  std::vector<std::string> names() const {
    std::lock_guard lock(mutex_);
    std::vector<std::string> out;
    for (const auto& [k, _] : factories_) out.push_back(k);
    return out;
  }

 private:
  std::string kind_;
  mutable std::mutex mutex_;
  std::map<std::string, Factory> factories_;
};

// Typed lookups into ProviderOptions; missing keys yield the fallback.
std::uint64_t option_u64(const ProviderOptions& options, const std::string& key, std::uint64_t fallback);
double option_double(const ProviderOptions& options, const std::string& key, double fallback);
bool option_bool(const ProviderOptions& options, const std::string& key, bool fallback);

}  // namespace hdeid
