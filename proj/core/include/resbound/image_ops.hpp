#pragma once

#include <cstdint>
#include <vector>

#include "resbound/image.hpp"

namespace resbound::ops {

// Sigmas below this are treated as the identity blur.
inline constexpr double kBlurIdentitySigma = 0.05;

// Mirror indexing without edge duplication: -1 -> 1, n -> n-2. Handles any
// out-of-range i for n >= 2.
int reflect_index(int i, int n);

// Gaussian taps truncated at 3*sigma, normalized to sum 1. Empty when sigma
// is below the identity threshold.
std::vector<float> gaussian_kernel(double sigma);

// Separable Gaussian convolution with reflect padding.
Image gaussian_blur(const Image& img, double sigma);

// Dense 2D convolution with an odd-sized kernel, reflect padding.
Image conv2_reflect(const Image& img, const Image& kernel);

// 1-px-wide line of the given length rasterized at `angle` with linear
// interpolation, normalized to sum 1. Length must be odd and >= 1.
Image line_kernel(int length, double angle);

// Sobel gradient magnitude, reflect padding.
Image sobel_magnitude(const Image& img);

// Value at rank floor(q * (n - 1)) of the sorted copy.
float percentile(std::vector<float> values, double q);

// Box mean over a (2r+1)^2 window with reflect padding.
Image box_mean_reflect(const Image& img, int radius);

// Binary disc dilation: out pixel is set when any input pixel within
// euclidean distance `radius` is set.
void dilate_disc(const uint8_t* in, uint8_t* out, int h, int w, int radius);

}  // namespace resbound::ops
