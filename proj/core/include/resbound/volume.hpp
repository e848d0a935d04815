#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "resbound/image.hpp"

namespace resbound {

// Region codes used by label maps.
inline constexpr uint8_t kRegionBackground = 0;
inline constexpr uint8_t kRegionSkull = 1;
inline constexpr uint8_t kRegionBrain = 2;
inline constexpr uint8_t kRegionVessel = 3;
inline constexpr uint8_t kRegionAneurysm = 4;
inline constexpr uint8_t kRegionCount = 5;
const char* region_name(uint8_t code);

// A stack of axial slices, all intensities normalized to [0, 1].
// Immutable by convention once built; shared freely across workers.
struct Volume {
  int depth = 0;
  int height = 0;
  int width = 0;
  std::vector<float> voxels;  // z-major, then y, then x
  std::optional<std::array<double, 3>> spacing;  // (z, y, x); informational

  Volume() = default;
  Volume(int d, int h, int w, float fill = 0.0f)
      : depth(d), height(h), width(w),
        voxels(size_t(d) * size_t(h) * size_t(w), fill) {}

  size_t voxel_count() const { return voxels.size(); }
  size_t slice_pixels() const { return size_t(height) * size_t(width); }
  float& at(int z, int y, int x) {
    return voxels[(size_t(z) * height + y) * width + x];
  }
  const float& at(int z, int y, int x) const {
    return voxels[(size_t(z) * height + y) * width + x];
  }
  const float* slice_data(int z) const {
    return voxels.data() + size_t(z) * slice_pixels();
  }
  float* slice_data(int z) {
    return voxels.data() + size_t(z) * slice_pixels();
  }
  Image slice(int z) const;
  void set_slice(int z, const Image& img);
};

// Per-voxel region codes paired with a Volume of the same shape.
struct LabelMap {
  int depth = 0;
  int height = 0;
  int width = 0;
  std::vector<uint8_t> labels;

  LabelMap() = default;
  LabelMap(int d, int h, int w, uint8_t fill = 0)
      : depth(d), height(h), width(w),
        labels(size_t(d) * size_t(h) * size_t(w), fill) {}

  size_t slice_pixels() const { return size_t(height) * size_t(width); }
  uint8_t& at(int z, int y, int x) {
    return labels[(size_t(z) * height + y) * width + x];
  }
  uint8_t at(int z, int y, int x) const {
    return labels[(size_t(z) * height + y) * width + x];
  }
  const uint8_t* slice_data(int z) const {
    return labels.data() + size_t(z) * slice_pixels();
  }
};

// Boolean per-voxel mask stored as 0/1 bytes.
struct MaskVolume {
  int depth = 0;
  int height = 0;
  int width = 0;
  std::vector<uint8_t> on;

  MaskVolume() = default;
  MaskVolume(int d, int h, int w, uint8_t fill = 0)
      : depth(d), height(h), width(w),
        on(size_t(d) * size_t(h) * size_t(w), fill) {}

  size_t slice_pixels() const { return size_t(height) * size_t(width); }
  uint8_t& at(int z, int y, int x) {
    return on[(size_t(z) * height + y) * width + x];
  }
  uint8_t at(int z, int y, int x) const {
    return on[(size_t(z) * height + y) * width + x];
  }
  const uint8_t* slice_data(int z) const {
    return on.data() + size_t(z) * slice_pixels();
  }
  size_t slice_count_on(int z) const;
};

// The 2.5D input window: previous, center, next axial slice.
struct SliceTriplet {
  Image prev;
  Image center;
  Image next;
  int center_index = 0;
};

// Throws DataError unless dimensions, finiteness and [0,1] range all hold.
void validate_volume(const Volume& v);

// Center slice plus neighbors; at volume ends the missing neighbor is a copy
// of the center slice. Throws DataError when index is out of range.
SliceTriplet slice_triplet(const Volume& v, int index);

// File format: "<base>.json" header plus "<base>.raw" of little-endian f32
// (u8 for labels and masks). The path may be given with or without the
// .json/.raw suffix. Out-of-range intensities are clamped on load and
// counted; non-finite values are rejected.
Volume load_volume(const std::string& path, uint64_t* clamp_count = nullptr);
void save_volume(const Volume& v, const std::string& path,
                 std::optional<uint64_t> clamp_count = std::nullopt);

// Same container for diagnostic maps (residuals, uncertainty): finiteness
// and shape are still enforced, but values may lie outside [0, 1] and are
// never clamped on load.
void save_map_volume(const Volume& v, const std::string& path);
Volume load_map_volume(const std::string& path);

LabelMap load_labels(const std::string& path);
void save_labels(const LabelMap& m, const std::string& path);

MaskVolume load_mask(const std::string& path);
void save_mask(const MaskVolume& m, const std::string& path);

}  // namespace resbound
