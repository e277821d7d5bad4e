#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

namespace fourierf {

using Rgb = std::array<double, 3>;

/// Row-major RGB image with channel values in [0,1].
struct Image {
  int width = 0;
  int height = 0;
  std::vector<double> data;  // width*height*3

  Image() = default;
  Image(int w, int h) : width(w), height(h), data(static_cast<size_t>(w) * h * 3, 0.0) {}

  static Image constant(int w, int h, const Rgb& rgb);

  double& at(int x, int y, int c) { return data[(static_cast<size_t>(y) * width + x) * 3 + c]; }
  double at(int x, int y, int c) const { return data[(static_cast<size_t>(y) * width + x) * 3 + c]; }
  size_t pixel_count() const { return static_cast<size_t>(width) * height; }
};

/// Reads an 8-bit PNG; RGBA inputs are alpha-composited onto `background`.
/// Values are dequantized to [0,1]. Throws std::runtime_error on I/O or
/// decode failure.
Image read_png_rgb(const std::string& path, const Rgb& background);

/// Writes an 8-bit RGB PNG. Values are clamped to [0,1] and rounded.
void write_png_rgb(const std::string& path, const Image& img);

/// Writes a 16-bit grayscale PNG. Pixel p maps to round(values[p]/scale * 65535),
/// clamped to [0, 65535]. `values` is row-major width*height.
void write_png_gray16(const std::string& path, const std::vector<double>& values, int width,
                      int height, double scale);

}  // namespace fourierf
