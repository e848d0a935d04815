#include "resbound/rng.hpp"

#include <cmath>

namespace resbound::rng {

uint64_t splitmix64(uint64_t x) {
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

uint64_t fnv1a64(std::string_view bytes) {
  uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  return h;
}

uint64_t derive_seed(uint64_t base, std::string_view tag, uint64_t salt) {
  return splitmix64(splitmix64(base ^ fnv1a64(tag)) ^ salt);
}

namespace {

constexpr uint32_t kPhiloxM0 = 0xD2511F53u;
constexpr uint32_t kPhiloxM1 = 0xCD9E8D57u;
constexpr uint32_t kPhiloxW0 = 0x9E3779B9u;
constexpr uint32_t kPhiloxW1 = 0xBB67AE85u;

inline void philox_round(std::array<uint32_t, 4>& ctr,
                         const std::array<uint32_t, 2>& key) {
  const uint64_t p0 = uint64_t(kPhiloxM0) * ctr[0];
  const uint64_t p1 = uint64_t(kPhiloxM1) * ctr[2];
  const uint32_t hi0 = uint32_t(p0 >> 32), lo0 = uint32_t(p0);
  const uint32_t hi1 = uint32_t(p1 >> 32), lo1 = uint32_t(p1);
  ctr = {hi1 ^ ctr[1] ^ key[0], lo1, hi0 ^ ctr[3] ^ key[1], lo0};
}

}  // namespace

std::array<uint32_t, 4> philox4x32(std::array<uint32_t, 2> key,
                                   std::array<uint32_t, 4> counter) {
  for (int round = 0; round < 10; ++round) {
    philox_round(counter, key);
    key[0] += kPhiloxW0;
    key[1] += kPhiloxW1;
  }
  return counter;
}

Stream::Stream(uint64_t seed, uint32_t domain, uint64_t element)
    : key_{uint32_t(seed), uint32_t(seed >> 32)},
      prefix_{domain, uint32_t(element), uint32_t(element >> 32)} {}

void Stream::refill() {
  buf_ = philox4x32(key_, {prefix_[0], prefix_[1], prefix_[2], block_});
  ++block_;
  buf_pos_ = 0;
}

uint32_t Stream::next_u32() {
  if (buf_pos_ >= 4) refill();
  return buf_[buf_pos_++];
}

uint64_t Stream::next_u64() {
  const uint64_t lo = next_u32();
  const uint64_t hi = next_u32();
  return (hi << 32) | lo;
}

double Stream::next_double() {
  return double(next_u64() >> 11) * 0x1.0p-53;
}

float Stream::next_float() {
  return float(next_u32() >> 8) * 0x1.0p-24f;
}

double Stream::uniform(double lo, double hi) {
  return lo + (hi - lo) * next_double();
}

int Stream::uniform_int(int lo, int hi) {
  const int n = hi - lo + 1;
  int k = int(next_double() * n);
  if (k >= n) k = n - 1;
  return lo + k;
}

double Stream::normal(double mean, double sigma) {
  if (have_spare_normal_) {
    have_spare_normal_ = false;
    return mean + sigma * spare_normal_;
  }
  const double u1 = 1.0 - next_double();  // (0, 1]
  const double u2 = next_double();
  const double radius = std::sqrt(-2.0 * std::log(u1));
  const double angle = 2.0 * M_PI * u2;
  spare_normal_ = radius * std::sin(angle);
  have_spare_normal_ = true;
  return mean + sigma * radius * std::cos(angle);
}

long long Stream::poisson(double lambda) {
  if (!(lambda > 0.0)) return 0;
  if (lambda < 10.0) {
    // Inversion by multiplication of uniforms.
    const double threshold = std::exp(-lambda);
    long long count = 0;
    double prod = 1.0;
    for (;;) {
      prod *= next_double();
      if (prod <= threshold) return count;
      ++count;
    }
  }
  // Hoermann's transformed rejection (PTRS), valid for lambda >= 10.
  const double slam = std::sqrt(lambda);
  const double loglam = std::log(lambda);
  const double b = 0.931 + 2.53 * slam;
  const double a = -0.059 + 0.02483 * b;
  const double inv_alpha = 1.1239 + 1.1328 / (b - 3.4);
  const double v_r = 0.9277 - 3.6224 / (b - 2.0);
  for (;;) {
    const double u = next_double() - 0.5;
    const double v = next_double();
    const double us = 0.5 - std::fabs(u);
    const long long k = (long long)std::floor((2.0 * a / us + b) * u + lambda + 0.43);
    if (us >= 0.07 && v <= v_r) return k;
    if (k < 0 || (us < 0.013 && v > us)) continue;
    if (std::log(v) + std::log(inv_alpha) - std::log(a / (us * us) + b) <=
        -lambda + k * loglam - std::lgamma(double(k) + 1.0)) {
      return k;
    }
  }
}

}  // namespace resbound::rng
