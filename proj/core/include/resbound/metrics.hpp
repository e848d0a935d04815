#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "resbound/image.hpp"
#include "resbound/volume.hpp"

namespace resbound {

// Thresholds and window constants shared by all evaluation measures.
struct MetricThresholds {
  double tau_edit = 0.02;  // |restored - input| above this counts as an edit
  double tau_iat = 0.01;   // target gain below -tau_iat flags a case
  double psnr_cap = 100.0;
  int ssim_window = 7;
  double ssim_c1 = 1e-4;  // (0.01)^2, peak 1
  double ssim_c2 = 9e-4;  // (0.03)^2

  void validate() const;  // throws DataError
};

// 10*log10(1/MSE) against peak 1, capped. Shapes must match.
double psnr_db(const Image& a, const Image& b, double cap = 100.0);
double psnr_db(const Volume& a, const Volume& b, double cap = 100.0);

// Mean of the local structural-similarity map over pixels where mask is
// non-zero. Box window with reflect padding, population statistics, computed
// in double. mask points at a.size() bytes. Throws DataError when shapes
// differ, the mask has no pixel set, or the image cannot hold the window's
// reflect padding.
double ssim_masked(const Image& a, const Image& b, const uint8_t* mask,
                   int window = 7, double c1 = 1e-4, double c2 = 9e-4);

// ssim(restored vs clean) - ssim(degraded vs clean), both inside the target.
double target_gain(const Image& restored, const Image& degraded,
                   const Image& clean, const uint8_t* target, int window = 7,
                   double c1 = 1e-4, double c2 = 9e-4);

// 0/1 per pixel: |restored - input| strictly above tau_edit.
std::vector<uint8_t> meaningful_edit_mask(const Image& restored,
                                          const Image& input, double tau_edit);

struct Footprint {
  double max_abs = 0.0;
  double fraction = 0.0;
  uint64_t count = 0;  // pixels strictly above tau_edit
};
Footprint modification_footprint(const Image& restored, const Image& input,
                                 double tau_edit);

// |edits AND region| / image_pixels.
double segmentation_share(const std::vector<uint8_t>& edits,
                          const std::vector<uint8_t>& region,
                          size_t image_pixels);

// Edit pixels per region code for one slice; the counts partition the edit
// mask exactly, so shares derived from them sum to the edit fraction.
std::array<uint64_t, kRegionCount> edit_counts_by_region(
    const std::vector<uint8_t>& edits, const uint8_t* labels);

// One evaluation row. Scalars are means over evaluated slices (slices whose
// target mask is non-empty); footprint_max is the max over evaluated slices
// and meaningful_edit_count the total across them.
struct CaseMetrics {
  std::string case_id;
  uint64_t seed = 0;
  std::string method;
  double psnr_db = 0.0;
  double target_gain = 0.0;
  double footprint_max = 0.0;
  double footprint_fraction = 0.0;
  uint64_t meaningful_edit_count = 0;
  bool iatrogenic = false;
};

// Aggregates restored-vs-clean quality and restored-vs-input conservatism
// over the evaluated slices of one case. Throws DataError when shapes differ
// or no slice has target pixels.
CaseMetrics case_metrics_for_volume(const Volume& restored,
                                    const Volume& degraded, const Volume& clean,
                                    const MaskVolume& target,
                                    const MetricThresholds& th);

// Fixed column order; booleans as 0/1; doubles via shortest round-trip form.
std::string metrics_csv(const std::vector<CaseMetrics>& rows);

}  // namespace resbound
