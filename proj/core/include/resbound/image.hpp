#pragma once

#include <cstddef>
#include <vector>

namespace resbound {

// A single 2D plane of float32 intensities, row-major.
struct Image {
  int height = 0;
  int width = 0;
  std::vector<float> pix;

  Image() = default;
  Image(int h, int w, float fill = 0.0f)
      : height(h), width(w), pix(size_t(h) * size_t(w), fill) {}

  float& at(int y, int x) { return pix[size_t(y) * width + x]; }
  const float& at(int y, int x) const { return pix[size_t(y) * width + x]; }
  size_t size() const { return pix.size(); }
  float* data() { return pix.data(); }
  const float* data() const { return pix.data(); }
};

inline bool same_shape(const Image& a, const Image& b) {
  return a.height == b.height && a.width == b.width;
}

// Clamps every pixel to [0, 1] in place; returns how many were clamped.
size_t clamp01(Image& img);

}  // namespace resbound
