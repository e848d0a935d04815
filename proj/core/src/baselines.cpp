#include "resbound/baselines.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

#include "resbound/errors.hpp"
#include "resbound/image_ops.hpp"
#include "resbound/parallel.hpp"

namespace resbound {

void BaselineParams::validate() const {
  if (gaussian_sigma <= 0.0) throw DataError("gaussian sigma must be > 0");
  if (nlm_patch < 1 || nlm_patch % 2 == 0) throw DataError("NLM patch must be odd");
  if (nlm_search < nlm_patch || nlm_search % 2 == 0) {
    throw DataError("NLM search must be odd and >= patch");
  }
  if (nlm_h <= 0.0) throw DataError("NLM h must be > 0");
}

Image gaussian_baseline(const Image& slice, double sigma) {
  if (sigma <= 0.0) throw DataError("gaussian sigma must be > 0");
  return ops::gaussian_blur(slice, sigma);
}

Image nlm_baseline(const Image& slice, const BaselineParams& p) {
  p.validate();
  const int h = slice.height, w = slice.width;
  const int pr = p.nlm_patch / 2;
  const int sr = p.nlm_search / 2;
  const double inv_h2 = 1.0 / (p.nlm_h * p.nlm_h);
  const double patch_n = double(p.nlm_patch) * p.nlm_patch;

  Image out(h, w);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      double weight_sum = 0.0;
      double value_sum = 0.0;
      double max_weight = 0.0;
      for (int dy = -sr; dy <= sr; ++dy) {
        for (int dx = -sr; dx <= sr; ++dx) {
          if (dy == 0 && dx == 0) continue;
          double d2 = 0.0;
          for (int py = -pr; py <= pr; ++py) {
            const int ay = ops::reflect_index(y + py, h);
            const int by = ops::reflect_index(y + dy + py, h);
            for (int px = -pr; px <= pr; ++px) {
              const int ax = ops::reflect_index(x + px, w);
              const int bx = ops::reflect_index(x + dx + px, w);
              const double diff = double(slice.at(ay, ax)) - slice.at(by, bx);
              d2 += diff * diff;
            }
          }
          const double wgt = std::exp(-(d2 / patch_n) * inv_h2);
          max_weight = std::max(max_weight, wgt);
          weight_sum += wgt;
          value_sum += wgt *
              slice.at(ops::reflect_index(y + dy, h), ops::reflect_index(x + dx, w));
        }
      }
      // the pixel itself weighs as much as its best neighbor
      weight_sum += max_weight;
      value_sum += max_weight * slice.at(y, x);
      out.at(y, x) = weight_sum > 0.0 ? float(value_sum / weight_sum)
                                      : slice.at(y, x);
    }
  }
  return out;
}

Volume gaussian_baseline_volume(const Volume& v, double sigma) {
  Volume out(v.depth, v.height, v.width);
  out.spacing = v.spacing;
  parallel_for(size_t(v.depth), [&](size_t z) {
    out.set_slice(int(z), gaussian_baseline(v.slice(int(z)), sigma));
  });
  return out;
}

Volume nlm_baseline_volume(const Volume& v, const BaselineParams& p) {
  Volume out(v.depth, v.height, v.width);
  out.spacing = v.spacing;
  parallel_for(size_t(v.depth), [&](size_t z) {
    out.set_slice(int(z), nlm_baseline(v.slice(int(z)), p));
  });
  return out;
}

}  // namespace resbound
