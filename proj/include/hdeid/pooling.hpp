#pragma once

#include <cstddef>
#include <vector>

#include "hdeid/tensor.hpp"

namespace hdeid {

// Area-averages an HxWx3 tensor onto a grid x grid x 3 feature vector.
// Bins are [floor(i*H/grid), floor((i+1)*H/grid)) along each axis.
std::vector<double> block_pool(const Tensor& image, std::size_t grid);

// Adjoint of block_pool: scatters grad/bin_size back to every pixel of its bin.
Tensor block_pool_adjoint(const std::vector<double>& grad, const Shape& image_shape, std::size_t grid);

// Nearest-neighbour upsampling: every pixel takes its bin's value.
Tensor block_broadcast(const std::vector<double>& features, const Shape& image_shape, std::size_t grid);

// Adjoint of block_broadcast: sums each bin.
std::vector<double> block_broadcast_adjoint(const Tensor& grad, std::size_t grid);

// Dense row-major matrix with a seeded N(0, scale^2) fill; enough for the
// analytic stand-in models.
struct DenseMatrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> data;

  static DenseMatrix gaussian(std::size_t rows, std::size_t cols, double scale, unsigned long long seed);
  std::vector<double> apply(const std::vector<double>& x) const;
  std::vector<double> apply_transposed(const std::vector<double>& y) const;
};

}  // namespace hdeid
