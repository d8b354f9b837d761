#pragma once

#include <stdexcept>
#include <string>
#include <utility>

namespace hdeid {

class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Zero-norm latent or direction handed to a geometric operation.
class DegenerateInputError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Edit direction (numerically) parallel to the latent it edits.
class DegenerateDirectionError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class NumericalError : public std::runtime_error {
 public:
  NumericalError(const std::string& what, int step_index = -1)
      : std::runtime_error(what), step_index_(step_index) {}
  int step_index() const { return step_index_; }

 private:
  int step_index_;
};

class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Failure inside a face-analysis provider; carries the provider's name.
class ProviderError : public std::runtime_error {
 public:
  ProviderError(std::string provider, const std::string& what)
      : std::runtime_error(provider + ": " + what), provider_(std::move(provider)) {}
  const std::string& provider() const { return provider_; }

 private:
  std::string provider_;
};

}  // namespace hdeid
