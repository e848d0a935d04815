#pragma once

#include <cstdint>
#include <string>

#include "resbound/volume.hpp"

namespace resbound {

// Head-like phantom: skull annulus, textured brain, vessel tubes, optional
// aneurysm bulge. Everything is a pure function of the spec.
struct PhantomSpec {
  int height = 64;
  int width = 64;
  int depth = 16;
  int n_vessels = 3;
  double aneurysm_probability = 0.7;
  double texture_amplitude = 0.02;
  uint64_t seed = 0;

  void validate() const;  // throws DataError
  std::string to_json_text() const;
  static PhantomSpec from_json_text(std::string_view text);
};

struct PhantomCase {
  Volume clean;
  LabelMap labels;
  MaskVolume target;  // vessel+aneurysm dilated by kTargetDilationRadius
  std::string case_id;
  uint64_t seed = 0;
  bool has_aneurysm = false;
};

// Default disc radius for the evaluation target region around vessels.
inline constexpr int kTargetDilationRadius = 2;

std::string case_id_from_seed(uint64_t seed);

PhantomCase generate_phantom(const PhantomSpec& spec);

// Per-slice disc dilation of the vessel+aneurysm labels.
MaskVolume target_mask(const PhantomCase& c, int dilation_radius);

}  // namespace resbound
