#pragma once

#include <string>
#include <vector>

#include "resbound/image.hpp"
#include "resbound/net.hpp"
#include "resbound/volume.hpp"

namespace resbound {

// Hard cap on the residual magnitude: r = kResidualBound * tanh(head_r), so
// no parameter setting can move a pixel further than this.
inline constexpr double kResidualBound = 0.2;

using ModelParams = NetT<float>;

struct RestorationOutput {
  Image residual;      // r, in [-kResidualBound, kResidualBound]
  Image edit_map;      // m, in [0, 1]
  Image uncertainty;   // u, >= 0
  Image applied_edit;  // m * r, elementwise
  Image restored;      // clamp(x_c + m * r, 0, 1)
};

// Restored center slice from the 2.5D window. Pure in (t, p).
RestorationOutput forward(const SliceTriplet& t, const ModelParams& p);

// clamp(x_c + m * r, 0, 1). Throws DataError on shape mismatch.
Image compose(const Image& x_c, const Image& r, const Image& m);

struct RestorationMaps {
  Volume residual;
  Volume edit_map;
  Volume uncertainty;
  Volume applied_edit;
};

// Slice-parallel forward over a whole volume; optionally keeps the per-pixel
// diagnostic maps.
Volume restore_volume(const Volume& v, const ModelParams& p,
                      RestorationMaps* maps = nullptr);

struct CheckpointMeta {
  std::string tool_version;
  std::string rng_name;
  std::vector<std::string> train_case_ids;  // corpus the model was fitted on
  std::string train_config_text;            // JSON, empty for untrained params
};

struct Checkpoint {
  ModelParams params;
  CheckpointMeta meta;
};

// "<base>.json" descriptor plus "<base>.raw" little-endian f32 blob with
// per-tensor offsets. Path accepted with or without either suffix.
void save_checkpoint(const ModelParams& p, const CheckpointMeta& meta,
                     const std::string& path);
Checkpoint load_checkpoint(const std::string& path);

}  // namespace resbound
