#pragma once

#include <cstddef>
#include <initializer_list>
#include <span>
#include <string>
#include <vector>

namespace hdeid {

using Shape = std::vector<std::size_t>;

std::size_t shape_size(const Shape& shape);
std::string shape_string(const Shape& shape);

/// Dense row-major real tensor. Every norm and inner product in the library
/// is taken over the flattened view.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(Shape shape, double fill = 0.0);
  Tensor(Shape shape, std::vector<double> data);
  static Tensor from_values(std::initializer_list<double> values);

  const Shape& shape() const { return shape_; }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  // Views into storage; not available on temporaries, whose storage would
  // not outlive the span.
  std::span<double> flat() & { return data_; }
  std::span<const double> flat() const& { return data_; }
  std::span<const double> flat() && = delete;
  const std::vector<double>& values() const { return data_; }

  double& operator[](std::size_t i) { return data_[i]; }
  double operator[](std::size_t i) const { return data_[i]; }

  // Same element count, new shape.
  Tensor reshaped(Shape shape) const;

  bool all_finite() const;
  bool same_shape(const Tensor& other) const { return shape_ == other.shape_; }

  Tensor& operator+=(const Tensor& other);
  Tensor& operator-=(const Tensor& other);
  Tensor& operator*=(double s);

  friend bool operator==(const Tensor&, const Tensor&) = default;

 private:
  Shape shape_;
  std::vector<double> data_;
};

Tensor operator+(Tensor a, const Tensor& b);
Tensor operator-(Tensor a, const Tensor& b);
Tensor operator*(double s, Tensor a);

double dot(std::span<const double> a, std::span<const double> b);
double norm(std::span<const double> a);
inline double dot(const Tensor& a, const Tensor& b) { return dot(a.flat(), b.flat()); }
inline double norm(const Tensor& a) { return norm(a.flat()); }
double max_abs_diff(const Tensor& a, const Tensor& b);

// a += s * b
void axpy(double s, const Tensor& b, Tensor& a);

void require_same_shape(const Tensor& a, const Tensor& b, const char* what);

/// h-space activation (U-Net bottleneck) or the latent z being edited.
class LatentTensor : public Tensor {
 public:
  LatentTensor() = default;
  explicit LatentTensor(Tensor t) : Tensor(std::move(t)) {}
};

/// Trainable identity-editing direction; lives in the same space as the latent.
class EditDirection : public Tensor {
 public:
  EditDirection() = default;
  explicit EditDirection(Tensor t) : Tensor(std::move(t)) {}
};

/// H x W x 3 image, values in [-1, 1].
class ImageTensor : public Tensor {
 public:
  ImageTensor() = default;
  ImageTensor(std::size_t height, std::size_t width, double fill = 0.0)
      : Tensor(Shape{height, width, 3}, fill) {}
  explicit ImageTensor(Tensor t);

  std::size_t height() const { return shape()[0]; }
  std::size_t width() const { return shape()[1]; }
  double at(std::size_t y, std::size_t x, std::size_t c) const {
    return (*this)[(y * width() + x) * 3 + c];
  }
  double& at(std::size_t y, std::size_t x, std::size_t c) {
    return (*this)[(y * width() + x) * 3 + c];
  }

  void clamp_range();
};

}  // namespace hdeid
