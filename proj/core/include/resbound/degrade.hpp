#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "resbound/image.hpp"
#include "resbound/volume.hpp"

namespace resbound {

// Degradation stages, listed in canonical application order: optical blur
// first, detector noise after, reconstruction artifacts last.
struct GaussianBlurStage {
  double sigma = 1.0;
};
struct MotionBlurStage {
  int length = 5;  // odd
  double angle = 0.0;
};
struct PoissonGaussianStage {
  double photons = 800.0;
  double read_sigma = 0.01;
};
struct RingBandStage {
  double amplitude = 0.03;
  double radial_freq = 0.1;  // cycles per px, ring mode only
  bool band = false;         // false: radial ring, true: per-row band offsets
};
struct EdgeStreakStage {
  double amplitude = 0.02;
  int streak_len = 5;  // odd
  double angle = 0.0;
};

using DegradeStage = std::variant<GaussianBlurStage, MotionBlurStage,
                                  PoissonGaussianStage, RingBandStage,
                                  EdgeStreakStage>;

// Canonical stage-type index; also the random-stream domain offset, so every
// stage type draws from its own voxel-keyed stream family.
int stage_type_index(const DegradeStage& s);
const char* stage_type_name(const DegradeStage& s);

struct DegradationRecipe {
  std::vector<DegradeStage> stages;  // canonical order, at most one per type
  uint64_t seed = 0;
  std::optional<int> blur_level;

  void validate() const;  // throws DataError
  std::string to_json_text() const;
  static DegradationRecipe from_json_text(std::string_view text);
};

struct StageRange {
  double lo = 0.0;
  double hi = 0.0;
};

struct DegradeConfig {
  double p_gaussian = 0.9;
  double p_motion = 0.3;
  double p_noise = 0.9;
  double p_ringband = 0.4;
  double p_streak = 0.3;

  StageRange sigma{0.5, 2.5};
  int motion_len_min = 3, motion_len_max = 9;  // odd bounds inclusive
  StageRange photons{200.0, 2000.0};
  StageRange read_sigma{0.005, 0.02};
  StageRange ring_amplitude{0.01, 0.06};
  StageRange radial_freq{0.05, 0.3};
  double p_band = 0.5;  // band-vs-ring coin inside an included RingBand stage
  StageRange streak_amplitude{0.01, 0.05};
  int streak_len_min = 3, streak_len_max = 9;

  void validate() const;  // throws DataError
  std::string to_json_text() const;
  static DegradeConfig from_json_text(std::string_view text);

  // Noise-dominated profile for externally supplied degraded/reference pairs.
  static DegradeConfig external_noise_defaults();
};

// Per-stage clamp bookkeeping for one apply_recipe call.
struct StageStats {
  std::vector<uint64_t> clamped;  // one entry per recipe stage
};

// sigma = 0.25 * level. Throws DataError outside [0, 10].
double blur_level_to_sigma(int level);

// Deterministic in (cfg, seed): inclusion coins and parameter draws come from
// one recipe-sampling stream.
DegradationRecipe sample_recipe(const DegradeConfig& cfg, uint64_t seed);

// Stage primitives. Every stage clamps its own output to [0,1] and reports
// how many pixels that touched. Noise-free stages are pure; the stochastic
// ones key their streams by (seed, stage type, global voxel/row index), so a
// slice degrades identically whether processed alone or as part of the volume.
Image apply_gaussian_blur(const Image& slice, double sigma,
                          uint64_t* clamped = nullptr);
Image apply_motion_blur(const Image& slice, int length, double angle,
                        uint64_t* clamped = nullptr);
Image apply_poisson_gaussian(const Image& slice, const PoissonGaussianStage& st,
                             uint64_t seed, int stage_index, int slice_index,
                             uint64_t* clamped = nullptr);
Image apply_ring_band(const Image& slice, const RingBandStage& st,
                      uint64_t seed, int stage_index, int slice_index,
                      uint64_t* clamped = nullptr);
Image apply_edge_streak(const Image& slice, const EdgeStreakStage& st,
                        uint64_t* clamped = nullptr);

// All stages in order on one slice; appends per-stage clamp counts to stats
// when given. slice_index keys the stochastic streams.
Image apply_recipe_slice(const Image& slice, const DegradationRecipe& recipe,
                         int slice_index, StageStats* stats = nullptr);

// Slice-parallel application over the whole volume. Clamp counts are summed
// across slices in slice order.
Volume apply_recipe(const Volume& v, const DegradationRecipe& recipe,
                    StageStats* stats = nullptr);

}  // namespace resbound
