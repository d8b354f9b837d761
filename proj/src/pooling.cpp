#include "hdeid/pooling.hpp"

#include <random>
#include <string>

#include "hdeid/errors.hpp"

namespace hdeid {
namespace {

struct Bins {
  std::size_t height, width, grid;
  Bins(const Shape& shape, std::size_t g) : grid(g) {
    if (shape.size() != 3 || shape[2] != 3) throw ShapeError("expected HxWx3 tensor, got " + shape_string(shape));
    height = shape[0];
    width = shape[1];
    if (height < grid || width < grid) {
      throw ShapeError("image " + shape_string(shape) + " smaller than pooling grid " + std::to_string(grid));
    }
  }
  std::size_t row_bin(std::size_t y) const { return bin_of(y, height); }
  std::size_t col_bin(std::size_t x) const { return bin_of(x, width); }
  std::size_t count(std::size_t by, std::size_t bx) const {
    return (end(by, height) - start(by, height)) * (end(bx, width) - start(bx, width));
  }
  std::size_t start(std::size_t b, std::size_t n) const { return b * n / grid; }
  std::size_t end(std::size_t b, std::size_t n) const { return (b + 1) * n / grid; }

 private:
  std::size_t bin_of(std::size_t p, std::size_t n) const {
    std::size_t b = p * grid / n;
    while (start(b, n) > p) --b;
    while (end(b, n) <= p) ++b;
    return b;
  }
};

}  // namespace

std::vector<double> block_pool(const Tensor& image, std::size_t grid) {
  const Bins bins(image.shape(), grid);
  std::vector<double> out(grid * grid * 3, 0.0);
  for (std::size_t y = 0; y < bins.height; ++y) {
    const std::size_t by = bins.row_bin(y);
    for (std::size_t x = 0; x < bins.width; ++x) {
      const std::size_t bx = bins.col_bin(x);
      for (std::size_t c = 0; c < 3; ++c) out[(by * grid + bx) * 3 + c] += image[(y * bins.width + x) * 3 + c];
    }
  }
  for (std::size_t by = 0; by < grid; ++by) {
    for (std::size_t bx = 0; bx < grid; ++bx) {
      const double inv = 1.0 / static_cast<double>(bins.count(by, bx));
      for (std::size_t c = 0; c < 3; ++c) out[(by * grid + bx) * 3 + c] *= inv;
    }
  }
  return out;
}

Tensor block_pool_adjoint(const std::vector<double>& grad, const Shape& image_shape, std::size_t grid) {
  const Bins bins(image_shape, grid);
  Tensor out(image_shape);
  for (std::size_t y = 0; y < bins.height; ++y) {
    const std::size_t by = bins.row_bin(y);
    for (std::size_t x = 0; x < bins.width; ++x) {
      const std::size_t bx = bins.col_bin(x);
      const double inv = 1.0 / static_cast<double>(bins.count(by, bx));
      for (std::size_t c = 0; c < 3; ++c) out[(y * bins.width + x) * 3 + c] = grad[(by * grid + bx) * 3 + c] * inv;
    }
  }
  return out;
}

Tensor block_broadcast(const std::vector<double>& features, const Shape& image_shape, std::size_t grid) {
  const Bins bins(image_shape, grid);
  Tensor out(image_shape);
  for (std::size_t y = 0; y < bins.height; ++y) {
    const std::size_t by = bins.row_bin(y);
    for (std::size_t x = 0; x < bins.width; ++x) {
      const std::size_t bx = bins.col_bin(x);
      for (std::size_t c = 0; c < 3; ++c) out[(y * bins.width + x) * 3 + c] = features[(by * grid + bx) * 3 + c];
    }
  }
  return out;
}

std::vector<double> block_broadcast_adjoint(const Tensor& grad, std::size_t grid) {
  const Bins bins(grad.shape(), grid);
  std::vector<double> out(grid * grid * 3, 0.0);
  for (std::size_t y = 0; y < bins.height; ++y) {
    const std::size_t by = bins.row_bin(y);
    for (std::size_t x = 0; x < bins.width; ++x) {
      const std::size_t bx = bins.col_bin(x);
      for (std::size_t c = 0; c < 3; ++c) out[(by * grid + bx) * 3 + c] += grad[(y * bins.width + x) * 3 + c];
    }
  }
  return out;
}

DenseMatrix DenseMatrix::gaussian(std::size_t rows, std::size_t cols, double scale, unsigned long long seed) {
  DenseMatrix m{rows, cols, std::vector<double>(rows * cols)};
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, scale);
  for (double& v : m.data) v = normal(rng);
  return m;
}

std::vector<double> DenseMatrix::apply(const std::vector<double>& x) const {
  if (x.size() != cols) throw ShapeError("matrix-vector product: length mismatch");
  std::vector<double> y(rows, 0.0);
  for (std::size_t r = 0; r < rows; ++r) {
    const double* row = &data[r * cols];
    double acc = 0.0;
    for (std::size_t c = 0; c < cols; ++c) acc += row[c] * x[c];
    y[r] = acc;
  }
  return y;
}

std::vector<double> DenseMatrix::apply_transposed(const std::vector<double>& y) const {
  if (y.size() != rows) throw ShapeError("transposed matrix-vector product: length mismatch");
  std::vector<double> x(cols, 0.0);
  for (std::size_t r = 0; r < rows; ++r) {
    const double* row = &data[r * cols];
    for (std::size_t c = 0; c < cols; ++c) x[c] += row[c] * y[r];
  }
  return x;
}

}  // namespace hdeid
