#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

namespace ifsd {

/// Interleaved RGB image with channel values in [0, 1].
struct RgbImage {
  int width = 0;
  int height = 0;
  std::vector<float> pixels;  // row-major, 3 floats per pixel

  RgbImage() = default;
  RgbImage(int w, int h, float fill = 0.0f)
      : width(w), height(h), pixels(static_cast<size_t>(w) * h * 3, fill) {}

  bool empty() const { return width <= 0 || height <= 0; }
  float& at(int x, int y, int c) { return pixels[(static_cast<size_t>(y) * width + x) * 3 + c]; }
  float at(int x, int y, int c) const {
    return pixels[(static_cast<size_t>(y) * width + x) * 3 + c];
  }

  friend bool operator==(const RgbImage&, const RgbImage&) = default;
};

/// Binary PPM (P6, maxval 255).
void write_ppm(const std::filesystem::path& path, const RgbImage& image);
RgbImage read_ppm(const std::filesystem::path& path);

RgbImage flip_horizontal(const RgbImage& image);

}  // namespace ifsd
