#pragma once

#include <array>
#include <cstdint>
#include <string_view>

namespace resbound::rng {

// The one generator used everywhere. Its name goes into every run manifest.
inline constexpr std::string_view kGeneratorName = "philox4x32-10";

uint64_t splitmix64(uint64_t x);
uint64_t fnv1a64(std::string_view bytes);

// Stable sub-seed for (base seed, textual tag, salt), e.g. per-case recipe
// seeds keyed by case id and Monte Carlo seed index.
uint64_t derive_seed(uint64_t base, std::string_view tag, uint64_t salt);

// Philox 4x32, 10 rounds.
std::array<uint32_t, 4> philox4x32(std::array<uint32_t, 2> key,
                                   std::array<uint32_t, 4> counter);

// Stream domains. Part of the reproducibility contract; never renumber.
namespace domain {
inline constexpr uint32_t phantom_geometry = 0x01;
inline constexpr uint32_t phantom_texture = 0x02;
inline constexpr uint32_t recipe_sampling = 0x10;
inline constexpr uint32_t degrade_stage = 0x20;  // + stage index
inline constexpr uint32_t model_init = 0x40;
inline constexpr uint32_t train_batch = 0x41;
inline constexpr uint32_t train_recipe = 0x42;
inline constexpr uint32_t train_validation = 0x43;
}  // namespace domain

// One logical random stream keyed by (seed, domain, element). Draws are
// counter-indexed, so streams for distinct elements may be consumed in any
// order or in parallel without affecting each other's values.
class Stream {
public:
  Stream(uint64_t seed, uint32_t domain, uint64_t element = 0);

  uint32_t next_u32();
  uint64_t next_u64();
  double next_double();  // [0, 1), 53-bit mantissa
  float next_float();    // [0, 1), 24-bit mantissa
  double uniform(double lo, double hi);
  int uniform_int(int lo, int hi);  // inclusive bounds
  double normal(double mean = 0.0, double sigma = 1.0);
  long long poisson(double lambda);

private:
  void refill();

  std::array<uint32_t, 2> key_;
  std::array<uint32_t, 3> prefix_;  // domain, element lo, element hi
  uint32_t block_ = 0;
  std::array<uint32_t, 4> buf_{};
  int buf_pos_ = 4;
  bool have_spare_normal_ = false;
  double spare_normal_ = 0.0;
};

}  // namespace resbound::rng
