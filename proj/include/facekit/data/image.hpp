#pragma once

#include <string>
#include <vector>

namespace facekit::data {

// Interleaved H x W x 3 image. Pixel values are doubles in the source range
// (0..255 as decoded from disk); the preprocessing pipeline owns rescaling.
struct Image {
  int height = 0;
  int width = 0;
  std::vector<double> data;  // row-major, RGB interleaved

  Image() = default;
  Image(int h, int w) : height(h), width(w), data(static_cast<std::size_t>(h) * w * 3, 0.0) {}

  double& at(int y, int x, int c) {
    return data[(static_cast<std::size_t>(y) * width + x) * 3 + c];
  }
  double at(int y, int x, int c) const {
    return data[(static_cast<std::size_t>(y) * width + x) * 3 + c];
  }
  std::size_t size() const { return data.size(); }
  bool empty() const { return data.empty(); }
};

// Binary PPM (P6, 8-bit) codec. The one image format the toolkit reads and
// writes; values round-trip exactly through the 0..255 double representation.
Image read_ppm(const std::string& path);
void write_ppm(const std::string& path, const Image& img);

}  // namespace facekit::data
