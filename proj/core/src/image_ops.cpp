#include "resbound/image_ops.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>

#include "resbound/errors.hpp"

namespace resbound::ops {

int reflect_index(int i, int n) {
  if (n == 1) return 0;
  const int period = 2 * (n - 1);
  i = i % period;
  if (i < 0) i += period;
  return (i < n) ? i : period - i;
}

std::vector<float> gaussian_kernel(double sigma) {
  if (sigma < kBlurIdentitySigma) return {};
  const int radius = std::max(1, int(std::ceil(3.0 * sigma)));
  std::vector<float> k(size_t(2 * radius + 1));
  double sum = 0.0;
  for (int i = -radius; i <= radius; ++i) {
    const double w = std::exp(-0.5 * (double(i) * i) / (sigma * sigma));
    k[size_t(i + radius)] = float(w);
    sum += w;
  }
  for (float& w : k) w = float(w / sum);
  return k;
}

Image gaussian_blur(const Image& img, double sigma) {
  const std::vector<float> k = gaussian_kernel(sigma);
  if (k.empty()) return img;
  const int radius = int(k.size() / 2);
  const int h = img.height, w = img.width;

  Image tmp(h, w);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      double acc = 0.0;
      for (int i = -radius; i <= radius; ++i) {
        acc += double(k[size_t(i + radius)]) * img.at(y, reflect_index(x + i, w));
      }
      tmp.at(y, x) = float(acc);
    }
  }
  Image out(h, w);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      double acc = 0.0;
      for (int i = -radius; i <= radius; ++i) {
        acc += double(k[size_t(i + radius)]) * tmp.at(reflect_index(y + i, h), x);
      }
      out.at(y, x) = float(acc);
    }
  }
  return out;
}

Image conv2_reflect(const Image& img, const Image& kernel) {
  if (kernel.height % 2 == 0 || kernel.width % 2 == 0) {
    throw DataError("conv2_reflect requires an odd-sized kernel");
  }
  const int rh = kernel.height / 2, rw = kernel.width / 2;
  Image out(img.height, img.width);
  for (int y = 0; y < img.height; ++y) {
    for (int x = 0; x < img.width; ++x) {
      double acc = 0.0;
      for (int ky = -rh; ky <= rh; ++ky) {
        const int sy = reflect_index(y + ky, img.height);
        for (int kx = -rw; kx <= rw; ++kx) {
          acc += double(kernel.at(ky + rh, kx + rw)) *
                 img.at(sy, reflect_index(x + kx, img.width));
        }
      }
      out.at(y, x) = float(acc);
    }
  }
  return out;
}

Image line_kernel(int length, double angle) {
  if (length < 1 || length % 2 == 0) {
    throw DataError("line kernel length must be odd and >= 1");
  }
  Image k(length, length, 0.0f);
  const double cx = (length - 1) / 2.0;
  const double dx = std::cos(angle), dy = std::sin(angle);
  for (int i = 0; i < length; ++i) {
    const double t = i - cx;
    const double px = cx + t * dx;
    const double py = cx + t * dy;
    const int x0 = int(std::floor(px)), y0 = int(std::floor(py));
    const double fx = px - x0, fy = py - y0;
    // Bilinear splat; endpoints always land inside the kernel grid.
    for (int oy = 0; oy <= 1; ++oy) {
      for (int ox = 0; ox <= 1; ++ox) {
        const int xi = x0 + ox, yi = y0 + oy;
        if (xi < 0 || xi >= length || yi < 0 || yi >= length) continue;
        const double wgt = (ox ? fx : 1.0 - fx) * (oy ? fy : 1.0 - fy);
        k.at(yi, xi) += float(wgt);
      }
    }
  }
  double sum = 0.0;
  for (float v : k.pix) sum += v;
  for (float& v : k.pix) v = float(v / sum);
  return k;
}

Image sobel_magnitude(const Image& img) {
  static const float gx[9] = {-1, 0, 1, -2, 0, 2, -1, 0, 1};
  static const float gy[9] = {-1, -2, -1, 0, 0, 0, 1, 2, 1};
  Image out(img.height, img.width);
  for (int y = 0; y < img.height; ++y) {
    for (int x = 0; x < img.width; ++x) {
      double sx = 0.0, sy = 0.0;
      int tap = 0;
      for (int ky = -1; ky <= 1; ++ky) {
        const int iy = reflect_index(y + ky, img.height);
        for (int kx = -1; kx <= 1; ++kx, ++tap) {
          const double v = img.at(iy, reflect_index(x + kx, img.width));
          sx += gx[tap] * v;
          sy += gy[tap] * v;
        }
      }
      out.at(y, x) = float(std::sqrt(sx * sx + sy * sy));
    }
  }
  return out;
}

float percentile(std::vector<float> values, double q) {
  if (values.empty()) throw DataError("percentile of empty range");
  std::sort(values.begin(), values.end());
  const size_t rank = size_t(std::floor(q * double(values.size() - 1)));
  return values[std::min(rank, values.size() - 1)];
}

Image box_mean_reflect(const Image& img, int radius) {
  const int n = 2 * radius + 1;
  Image out(img.height, img.width);
  for (int y = 0; y < img.height; ++y) {
    for (int x = 0; x < img.width; ++x) {
      double acc = 0.0;
      for (int ky = -radius; ky <= radius; ++ky) {
        const int iy = reflect_index(y + ky, img.height);
        for (int kx = -radius; kx <= radius; ++kx) {
          acc += img.at(iy, reflect_index(x + kx, img.width));
        }
      }
      out.at(y, x) = float(acc / (double(n) * n));
    }
  }
  return out;
}

void dilate_disc(const uint8_t* in, uint8_t* out, int h, int w, int radius) {
  if (radius < 0) throw DataError("dilation radius must be >= 0");
  std::memset(out, 0, size_t(h) * w);
  const int r2 = radius * radius;
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      if (!in[size_t(y) * w + x]) continue;
      for (int dy = -radius; dy <= radius; ++dy) {
        const int yy = y + dy;
        if (yy < 0 || yy >= h) continue;
        for (int dx = -radius; dx <= radius; ++dx) {
          if (dx * dx + dy * dy > r2) continue;
          const int xx = x + dx;
          if (xx < 0 || xx >= w) continue;
          out[size_t(yy) * w + xx] = 1;
        }
      }
    }
  }
}

}  // namespace resbound::ops
