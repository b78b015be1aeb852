#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace iafm {

// 8-bit RGB image buffer, row-major.
struct Image {
  int height = 0;
  int width = 0;
  std::vector<uint8_t> rgb;  // height * width * 3
};

std::vector<uint8_t> encode_png(const Image& img);
Image decode_png(const std::vector<uint8_t>& bytes);
void write_png(const Image& img, const std::string& path);
Image read_png(const std::string& path);

// float [0,1] <-> 8-bit, round-to-nearest
template <class T>
Image to_image(const std::vector<T>& pixels, int height, int width) {
  Image img;
  img.height = height;
  img.width = width;
  img.rgb.resize(pixels.size());
  for (size_t i = 0; i < pixels.size(); ++i) {
    double v = static_cast<double>(pixels[i]);
    v = v < 0 ? 0 : (v > 1 ? 1 : v);
    img.rgb[i] = static_cast<uint8_t>(v * 255.0 + 0.5);
  }
  return img;
}

template <class T>
std::vector<T> from_image(const Image& img) {
  std::vector<T> px(img.rgb.size());
  for (size_t i = 0; i < px.size(); ++i) px[i] = static_cast<T>(img.rgb[i] / 255.0);
  return px;
}

}  // namespace iafm
