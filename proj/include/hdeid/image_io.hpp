#pragma once

#include <string>

#include "hdeid/tensor.hpp"

namespace hdeid {

// 8-bit RGB(A) PNG to an H x W x 3 image in [-1, 1] (v / 127.5 - 1). Alpha is
// dropped, grayscale is expanded.
ImageTensor read_png(const std::string& path);
// Inverse mapping, rounded to nearest and clamped.
void write_png(const std::string& path, const ImageTensor& image);

}  // namespace hdeid
