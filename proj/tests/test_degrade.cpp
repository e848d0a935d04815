#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <cstdlib>
#include <vector>

#include "resbound/degrade.hpp"
#include "resbound/errors.hpp"
#include "resbound/image_ops.hpp"
#include "resbound/rng.hpp"
#include "resbound/volume.hpp"

using namespace resbound;

namespace {

Image random_image(int h, int w, uint64_t seed) {
  Image img(h, w);
  rng::Stream s(seed, 0x99, 0);
  for (float& p : img.pix) p = s.next_float();
  return img;
}

DegradeConfig all_probs(double p) {
  DegradeConfig cfg;
  cfg.p_gaussian = cfg.p_motion = cfg.p_noise = cfg.p_ringband = cfg.p_streak = p;
  return cfg;
}

}  // namespace

TEST_CASE("probability-zero config samples the identity recipe") {
  const DegradationRecipe r = sample_recipe(all_probs(0.0), 7);
  CHECK(r.stages.empty());
  CHECK(r.seed == 7);
}

TEST_CASE("probability-one config samples all five stages in order") {
  for (uint64_t seed : {1ull, 2ull, 30ull}) {
    const DegradationRecipe r = sample_recipe(all_probs(1.0), seed);
    REQUIRE(r.stages.size() == 5);
    for (int i = 0; i < 5; ++i) CHECK(stage_type_index(r.stages[size_t(i)]) == i);
  }
}

TEST_CASE("sampled parameters respect the configured ranges") {
  const DegradeConfig cfg = all_probs(1.0);
  for (uint64_t seed = 0; seed < 200; ++seed) {
    const DegradationRecipe r = sample_recipe(cfg, seed);
    const auto& g = std::get<GaussianBlurStage>(r.stages[0]);
    CHECK(g.sigma >= cfg.sigma.lo);
    CHECK(g.sigma <= cfg.sigma.hi);
    const auto& m = std::get<MotionBlurStage>(r.stages[1]);
    CHECK(m.length >= cfg.motion_len_min);
    CHECK(m.length <= cfg.motion_len_max);
    CHECK(m.length % 2 == 1);
    CHECK(m.angle >= 0.0);
    CHECK(m.angle < M_PI);
    const auto& p = std::get<PoissonGaussianStage>(r.stages[2]);
    CHECK(p.photons >= cfg.photons.lo);
    CHECK(p.photons <= cfg.photons.hi);
    CHECK(p.read_sigma >= cfg.read_sigma.lo);
    CHECK(p.read_sigma <= cfg.read_sigma.hi);
    const auto& rb = std::get<RingBandStage>(r.stages[3]);
    CHECK(rb.amplitude >= cfg.ring_amplitude.lo);
    CHECK(rb.amplitude <= cfg.ring_amplitude.hi);
    const auto& e = std::get<EdgeStreakStage>(r.stages[4]);
    CHECK(e.streak_len % 2 == 1);
    CHECK(e.streak_len >= cfg.streak_len_min);
    CHECK(e.streak_len <= cfg.streak_len_max);
  }
}

TEST_CASE("recipe sampling is deterministic and serialization lossless") {
  const DegradeConfig cfg;
  const DegradationRecipe a = sample_recipe(cfg, 12345);
  const DegradationRecipe b = sample_recipe(cfg, 12345);
  CHECK(a.to_json_text() == b.to_json_text());

  const DegradationRecipe c = DegradationRecipe::from_json_text(a.to_json_text());
  CHECK(c.to_json_text() == a.to_json_text());
  CHECK(c.seed == a.seed);
  CHECK(c.stages.size() == a.stages.size());

  // distinct seeds give distinct textual recipes almost surely
  CHECK(sample_recipe(all_probs(1.0), 1).to_json_text() !=
        sample_recipe(all_probs(1.0), 2).to_json_text());
}

TEST_CASE("recipe validation enforces order and parameter bounds") {
  DegradationRecipe r;
  r.stages.push_back(EdgeStreakStage{0.02, 5, 0.0});
  r.stages.push_back(GaussianBlurStage{1.0});  // out of canonical order
  CHECK_THROWS_AS(r.validate(), DataError);

  DegradationRecipe dup;
  dup.stages.push_back(GaussianBlurStage{1.0});
  dup.stages.push_back(GaussianBlurStage{1.0});  // repeated type
  CHECK_THROWS_AS(dup.validate(), DataError);

  DegradationRecipe even;
  even.stages.push_back(MotionBlurStage{4, 0.0});
  CHECK_THROWS_AS(even.validate(), DataError);

  CHECK_THROWS_AS(DegradationRecipe::from_json_text("{\"stages\": [{\"type\": \"warp\"}]}"),
                  DataError);
  CHECK_THROWS_AS(DegradationRecipe::from_json_text("nope"), DataError);
}

TEST_CASE("empty recipe is the bitwise identity") {
  Volume v(3, 16, 16);
  rng::Stream s(5, 0x99, 0);
  for (float& x : v.voxels) x = s.next_float();
  DegradationRecipe r;
  StageStats stats;
  Volume out = apply_recipe(v, r, &stats);
  CHECK(out.voxels == v.voxels);
  CHECK(stats.clamped.empty());
}

TEST_CASE("sub-threshold blur leaves the volume unchanged") {
  Volume v(2, 16, 16);
  rng::Stream s(6, 0x99, 0);
  for (float& x : v.voxels) x = s.next_float();
  DegradationRecipe r;
  r.stages.push_back(GaussianBlurStage{0.01});
  CHECK(apply_recipe(v, r).voxels == v.voxels);
}

TEST_CASE("poisson-gaussian preserves the mean of a constant volume") {
  // ~1e5 voxels, one draw each; independent draws make this the Monte Carlo
  // mean of the photon-counting model at lambda = 0.5 * 500.
  Volume v(25, 64, 64, 0.5f);
  DegradationRecipe r;
  r.seed = 2024;
  r.stages.push_back(PoissonGaussianStage{500.0, 0.0});
  Volume out = apply_recipe(v, r);
  double sum = 0.0;
  for (float x : out.voxels) sum += x;
  const double mean = sum / double(out.voxel_count());
  CHECK(std::fabs(mean - 0.5) < 0.005);

  // variance should be near lambda/photons^2 = 0.001
  double var = 0.0;
  for (float x : out.voxels) var += (x - mean) * (x - mean);
  var /= double(out.voxel_count());
  CHECK(var == doctest::Approx(0.001).epsilon(0.05));
}

TEST_CASE("blur level maps linearly to sigma") {
  CHECK(blur_level_to_sigma(0) == 0.0);
  CHECK(blur_level_to_sigma(3) == doctest::Approx(0.75));
  CHECK(blur_level_to_sigma(8) == doctest::Approx(2.0));
  CHECK_THROWS_AS(blur_level_to_sigma(11), DataError);
  CHECK_THROWS_AS(blur_level_to_sigma(-1), DataError);
}

TEST_CASE("ring mode evaluates the radial sine in closed form") {
  Image zero(65, 65, 0.0f);
  RingBandStage st{0.05, 0.0625, false};
  uint64_t clamped = 9;
  Image out = apply_ring_band(zero, st, 0, 3, 0, &clamped);
  // center is (32, 32); at distance 4 the phase is 2*pi*0.0625*4 = pi/2
  CHECK(out.at(32, 36) == doctest::Approx(0.05).epsilon(1e-6));
  CHECK(out.at(36, 32) == doctest::Approx(0.05).epsilon(1e-6));
  CHECK(out.at(32, 32) == doctest::Approx(0.0).epsilon(1e-9));
  // negative lobe at 3/4 period clamps to zero on a zero image
  CHECK(out.at(32, 44) == 0.0f);
  CHECK(clamped > 0);

  RingBandStage off{0.0, 0.1, false};
  Image same = apply_ring_band(zero, off, 0, 3, 0);
  CHECK(same.pix == zero.pix);
}

TEST_CASE("band mode adds one constant offset per row") {
  Image base(32, 48, 0.5f);
  RingBandStage st{0.04, 0.0, true};
  Image out = apply_ring_band(base, st, 77, 3, 2);
  bool any_nonzero = false;
  std::vector<float> offsets;
  for (int y = 0; y < base.height; ++y) {
    const float offset = out.at(y, 0) - 0.5f;
    offsets.push_back(offset);
    CHECK(std::fabs(offset) <= 0.04f + 1e-6f);
    for (int x = 1; x < base.width; ++x) {
      REQUIRE(out.at(y, x) == out.at(y, 0));  // constant along the row
    }
    any_nonzero = any_nonzero || offset != 0.0f;
  }
  CHECK(any_nonzero);
  // rows differ from each other somewhere
  bool rows_differ = false;
  for (size_t i = 1; i < offsets.size(); ++i) {
    rows_differ = rows_differ || offsets[i] != offsets[0];
  }
  CHECK(rows_differ);

  // keyed by slice index: another slice gets different offsets
  Image other = apply_ring_band(base, st, 77, 3, 3);
  CHECK(other.pix != out.pix);
  // re-application is deterministic
  CHECK(apply_ring_band(base, st, 77, 3, 2).pix == out.pix);
}

TEST_CASE("edge streak: zero amplitude and flat images are untouched") {
  Image img = random_image(16, 16, 8);
  EdgeStreakStage off{0.0, 5, 0.0};
  CHECK(apply_edge_streak(img, off).pix == img.pix);

  Image flat(16, 16, 0.6f);
  EdgeStreakStage on{0.05, 5, 0.0};
  CHECK(apply_edge_streak(flat, on).pix == flat.pix);
}

TEST_CASE("edge streak matches a brute-force convolution oracle") {
  // vertical step edge: left half 0.2, right half 0.8
  const int n = 24;
  Image img(n, n);
  for (int y = 0; y < n; ++y) {
    for (int x = 0; x < n; ++x) img.at(y, x) = x < n / 2 ? 0.2f : 0.8f;
  }
  EdgeStreakStage st{0.04, 5, 0.0};
  Image out = apply_edge_streak(img, st);

  // oracle: recompute the additive field with independent naive loops
  auto reflect = [](int i, int m) {
    while (i < 0 || i >= m) i = i < 0 ? -i : 2 * m - 2 - i;
    return i;
  };
  // sobel magnitude
  std::vector<double> mag(size_t(n) * n, 0.0);
  const int gx[3][3] = {{-1, 0, 1}, {-2, 0, 2}, {-1, 0, 1}};
  const int gy[3][3] = {{-1, -2, -1}, {0, 0, 0}, {1, 2, 1}};
  for (int y = 0; y < n; ++y) {
    for (int x = 0; x < n; ++x) {
      double sx = 0.0, sy = 0.0;
      for (int ky = 0; ky < 3; ++ky) {
        for (int kx = 0; kx < 3; ++kx) {
          const double v = img.at(reflect(y + ky - 1, n), reflect(x + kx - 1, n));
          sx += gx[ky][kx] * v;
          sy += gy[ky][kx] * v;
        }
      }
      mag[size_t(y) * n + x] = std::sqrt(sx * sx + sy * sy);
    }
  }
  // 95th percentile, rank floor(q*(n-1)) of the sorted copy
  std::vector<double> sorted = mag;
  std::sort(sorted.begin(), sorted.end());
  const double cutoff = sorted[size_t(0.95 * double(sorted.size() - 1))];
  // threshold, convolve with a horizontal length-5 line kernel (taps 0.2)
  std::vector<double> field(size_t(n) * n, 0.0);
  double peak = 0.0;
  for (int y = 0; y < n; ++y) {
    for (int x = 0; x < n; ++x) {
      double acc = 0.0;
      for (int k = -2; k <= 2; ++k) {
        const size_t idx = size_t(y) * n + reflect(x + k, n);
        acc += 0.2 * (mag[idx] >= cutoff && mag[idx] > 0.0 ? 1.0 : 0.0);
      }
      field[size_t(y) * n + x] = acc;
      peak = std::max(peak, acc);
    }
  }
  REQUIRE(peak > 0.0);
  for (int y = 0; y < n; ++y) {
    for (int x = 0; x < n; ++x) {
      const double expect =
          std::clamp(double(img.at(y, x)) +
                         0.04 / peak * field[size_t(y) * n + x],
                     0.0, 1.0);
      REQUIRE(out.at(y, x) == doctest::Approx(expect).epsilon(1e-6));
    }
  }

  // the streak field reaches at least streak_len/2 px from the edge column
  bool spread = false;
  for (int y = 0; y < n; ++y) {
    spread = spread || out.at(y, n / 2 + 2) > img.at(y, n / 2 + 2) + 1e-6f;
  }
  CHECK(spread);
}

TEST_CASE("motion blur: length one is identity, constants are preserved") {
  Image img = random_image(12, 12, 9);
  CHECK(apply_motion_blur(img, 1, 1.3).pix == img.pix);
  CHECK_THROWS_AS(apply_motion_blur(img, 4, 0.0), DataError);

  Image flat(12, 12, 0.33f);
  for (double angle : {0.0, 0.7, 1.9}) {
    Image out = apply_motion_blur(flat, 5, angle);
    for (float v : out.pix) CHECK(v == doctest::Approx(0.33).epsilon(1e-6));
  }
}

TEST_CASE("clamp counts are reported per stage and summed over slices") {
  Volume v(4, 16, 16, 0.0f);
  DegradationRecipe r;
  r.seed = 5;
  r.stages.push_back(PoissonGaussianStage{500.0, 0.2});  // heavy read noise
  StageStats stats;
  apply_recipe(v, r, &stats);
  REQUIRE(stats.clamped.size() == 1);
  CHECK(stats.clamped[0] > 0);  // about half the draws go negative

  uint64_t manual = 0;
  for (int z = 0; z < v.depth; ++z) {
    StageStats per;
    apply_recipe_slice(v.slice(z), r, z, &per);
    manual += per.clamped.at(0);
  }
  CHECK(manual == stats.clamped[0]);
}

TEST_CASE("degrading one slice matches degrading the whole volume") {
  Volume v(5, 24, 24);
  rng::Stream s(31, 0x99, 0);
  for (float& x : v.voxels) x = s.next_float();
  const DegradationRecipe r = sample_recipe(all_probs(1.0), 99);
  const Volume whole = apply_recipe(v, r);
  for (int z = 0; z < v.depth; ++z) {
    const Image alone = apply_recipe_slice(v.slice(z), r, z);
    REQUIRE(alone.pix == whole.slice(z).pix);
  }
}

TEST_CASE("parallel and serial degradation agree byte for byte") {
  Volume v(8, 32, 32);
  rng::Stream s(41, 0x99, 0);
  for (float& x : v.voxels) x = s.next_float();
  const DegradationRecipe r = sample_recipe(all_probs(1.0), 7);

  setenv("RESBOUND_THREADS", "1", 1);
  const Volume serial = apply_recipe(v, r);
  setenv("RESBOUND_THREADS", "4", 1);
  const Volume parallel = apply_recipe(v, r);
  unsetenv("RESBOUND_THREADS");
  CHECK(serial.voxels == parallel.voxels);
}

TEST_CASE("config serialization round-trips and validates") {
  DegradeConfig cfg;
  cfg.p_motion = 0.5;
  cfg.photons = {300.0, 1200.0};
  const std::string text = cfg.to_json_text();
  DegradeConfig back = DegradeConfig::from_json_text(text);
  CHECK(back.to_json_text() == text);

  DegradeConfig bad;
  bad.p_noise = 1.5;
  CHECK_THROWS_AS(bad.validate(), DataError);
  DegradeConfig rev;
  rev.sigma = {2.0, 1.0};
  CHECK_THROWS_AS(rev.validate(), DataError);
  DegradeConfig even;
  even.motion_len_min = 4;
  CHECK_THROWS_AS(even.validate(), DataError);

  const DegradeConfig ext = DegradeConfig::external_noise_defaults();
  ext.validate();
  CHECK(ext.p_noise == 1.0);
  // noisier than the training profile: fewer photons, more read noise
  CHECK(ext.photons.lo < DegradeConfig().photons.lo);
  CHECK(ext.read_sigma.hi > DegradeConfig().read_sigma.hi);
}
