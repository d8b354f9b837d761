#include "hdeid/image_io.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <cstring>
#include <vector>

#include "hdeid/errors.hpp"

namespace hdeid {

ImageTensor read_png(const std::string& path) {
  png_image img;
  std::memset(&img, 0, sizeof img);
  img.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_file(&img, path.c_str())) {
    throw ConfigError("cannot read PNG " + path + ": " + img.message);
  }
  img.format = PNG_FORMAT_RGB;
  std::vector<png_byte> buf(PNG_IMAGE_SIZE(img));
  if (!png_image_finish_read(&img, nullptr, buf.data(), 0, nullptr)) {
    std::string msg = img.message;
    png_image_free(&img);
    throw ConfigError("cannot decode PNG " + path + ": " + msg);
  }
  ImageTensor out(img.height, img.width);
  for (std::size_t i = 0; i < buf.size(); ++i) out[i] = buf[i] / 127.5 - 1.0;
  return out;
}

void write_png(const std::string& path, const ImageTensor& image) {
  if (!image.all_finite()) throw NumericalError("refusing to write non-finite image " + path);
  png_image img;
  std::memset(&img, 0, sizeof img);
  img.version = PNG_IMAGE_VERSION;
  img.width = static_cast<png_uint_32>(image.width());
  img.height = static_cast<png_uint_32>(image.height());
  img.format = PNG_FORMAT_RGB;
  std::vector<png_byte> buf(image.size());
  for (std::size_t i = 0; i < buf.size(); ++i) {
    buf[i] = static_cast<png_byte>(std::clamp(std::lround((image[i] + 1.0) * 127.5), 0L, 255L));
  }
  if (!png_image_write_to_file(&img, path.c_str(), 0, buf.data(), 0, nullptr)) {
    throw ConfigError("cannot write PNG " + path + ": " + img.message);
  }
}

}  // namespace hdeid
