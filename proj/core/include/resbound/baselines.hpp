#pragma once

#include "resbound/image.hpp"
#include "resbound/volume.hpp"

namespace resbound {

struct BaselineParams {
  double gaussian_sigma = 1.0;
  int nlm_patch = 5;    // odd
  int nlm_search = 11;  // odd, >= patch
  double nlm_h = 0.08;  // intensity scale of the similarity kernel

  void validate() const;  // throws DataError
};

// Same Gaussian kernel code as the degradation pipeline.
Image gaussian_baseline(const Image& slice, double sigma);

// Classic non-local means: similarity-weighted mean over the search window,
// weights exp(-d2/h^2) with d2 the mean squared patch difference, self weight
// set to the max of the others, reflect padding.
Image nlm_baseline(const Image& slice, const BaselineParams& p);

// Slice-parallel volume versions.
Volume gaussian_baseline_volume(const Volume& v, double sigma);
Volume nlm_baseline_volume(const Volume& v, const BaselineParams& p);

}  // namespace resbound
