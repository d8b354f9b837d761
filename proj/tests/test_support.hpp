#pragma once

#include <cmath>
#include <cstdint>
#include <random>

#include "hdeid/tensor.hpp"

namespace hdeid::testing {

// Smooth synthetic face-sized image in roughly [-0.7, 0.7]: a few seeded
// low-frequency waves plus a little pixel noise.
inline ImageTensor synthetic_image(std::size_t size, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  ImageTensor img(size, size);
  double fx[3], fy[3], ph[3], amp[3];
  for (int c = 0; c < 3; ++c) {
    fx[c] = 1.0 + 2.0 * u(rng);
    fy[c] = 1.0 + 2.0 * u(rng);
    ph[c] = 6.283185307179586 * u(rng);
    amp[c] = 0.3 + 0.2 * u(rng);
  }
  for (std::size_t y = 0; y < size; ++y) {
    for (std::size_t x = 0; x < size; ++x) {
      const double yy = static_cast<double>(y) / size, xx = static_cast<double>(x) / size;
      for (std::size_t c = 0; c < 3; ++c) {
        img.at(y, x, c) = amp[c] * std::sin(6.283185307179586 * (fx[c] * xx + fy[c] * yy) + ph[c]) +
                          0.1 * (u(rng) - 0.5);
      }
    }
  }
  return img;
}

}  // namespace hdeid::testing

#include "hdeid/backend.hpp"
#include "hdeid/losses.hpp"
#include "hdeid/providers.hpp"

namespace hdeid::testing {

// Toy backend plus toy providers at the scaled-down test settings.
struct ToyPipeline {
  NoiseSchedule schedule = NoiseSchedule::linear();
  ToyDenoiser backend;
  ToyIdentityEmbedder embedder;
  ToyAttributePredictor attributes;
  ToyFaceParser parser;
  EditWindow window;

  explicit ToyPipeline(ToyDenoiserConfig config = {}, int steps = 8) : backend(schedule, config) {
    window.n_denoise = steps;
  }
  OptimizationProviders providers() const { return {&embedder, &attributes, &parser}; }
};

inline Tensor random_like(const Shape& shape, std::uint64_t seed, double scale = 1.0) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, scale);
  Tensor t(shape);
  for (double& v : t.flat()) v = normal(rng);
  return t;
}

}  // namespace hdeid::testing
