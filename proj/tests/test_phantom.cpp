#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <array>
#include <cmath>
#include <cstdint>

#include "resbound/errors.hpp"
#include "resbound/phantom.hpp"
#include "resbound/volume.hpp"

using namespace resbound;

namespace {

PhantomSpec small_spec(uint64_t seed) {
  PhantomSpec s;
  s.height = 32;
  s.width = 32;
  s.depth = 6;
  s.n_vessels = 2;
  s.texture_amplitude = 0.0;
  s.seed = seed;
  return s;
}

}  // namespace

TEST_CASE("same spec generates bitwise-identical cases") {
  PhantomSpec s;
  s.seed = 123;
  PhantomCase a = generate_phantom(s);
  PhantomCase b = generate_phantom(s);
  CHECK(a.clean.voxels == b.clean.voxels);
  CHECK(a.labels.labels == b.labels.labels);
  CHECK(a.target.on == b.target.on);
  CHECK(a.case_id == b.case_id);
  CHECK(a.has_aneurysm == b.has_aneurysm);
}

TEST_CASE("case ids are stable, distinct, and well-formed") {
  const std::string id = case_id_from_seed(123);
  CHECK(id == case_id_from_seed(123));
  CHECK(id != case_id_from_seed(124));
  REQUIRE(id.size() == 5 + 16);
  CHECK(id.substr(0, 5) == "case_");
  for (char c : id.substr(5)) {
    CHECK(((c >= '0' && c <= '9') || (c >= 'a' && c <= 'f')));
  }
}

TEST_CASE("aneurysm probability zero means no aneurysm label") {
  for (uint64_t seed = 0; seed < 20; ++seed) {
    PhantomSpec s = small_spec(seed);
    s.aneurysm_probability = 0.0;
    PhantomCase c = generate_phantom(s);
    CHECK_FALSE(c.has_aneurysm);
    for (uint8_t lab : c.labels.labels) REQUIRE(lab != kRegionAneurysm);
  }
}

TEST_CASE("aneurysm probability one always produces the label") {
  int with = 0;
  const int n = 1000;
  for (uint64_t seed = 0; seed < uint64_t(n); ++seed) {
    PhantomSpec s = small_spec(seed);
    s.aneurysm_probability = 1.0;
    PhantomCase c = generate_phantom(s);
    bool any = false;
    for (uint8_t lab : c.labels.labels) any = any || (lab == kRegionAneurysm);
    CHECK(c.has_aneurysm == any);
    with += any ? 1 : 0;
  }
  CHECK(with == n);
}

TEST_CASE("intermediate probability is deterministic per seed") {
  PhantomSpec s = small_spec(5);
  s.aneurysm_probability = 0.5;
  CHECK(generate_phantom(s).has_aneurysm == generate_phantom(s).has_aneurysm);
}

TEST_CASE("every structural label is populated") {
  for (uint64_t seed : {1ull, 77ull, 901ull}) {
    PhantomSpec s;
    s.seed = seed;
    s.aneurysm_probability = 1.0;
    PhantomCase c = generate_phantom(s);
    std::array<size_t, kRegionCount> counts{};
    for (uint8_t lab : c.labels.labels) ++counts[lab];
    for (size_t i = 0; i < counts.size(); ++i) {
      INFO("region ", region_name(uint8_t(i)));
      CHECK(counts[i] > 0);
    }
  }
}

TEST_CASE("region intensities sit at their nominal levels") {
  PhantomSpec s;
  s.seed = 42;
  s.aneurysm_probability = 1.0;
  s.texture_amplitude = 0.02;
  PhantomCase c = generate_phantom(s);
  std::array<double, kRegionCount> sums{};
  std::array<size_t, kRegionCount> counts{};
  for (size_t i = 0; i < c.labels.labels.size(); ++i) {
    sums[c.labels.labels[i]] += c.clean.voxels[i];
    ++counts[c.labels.labels[i]];
  }
  CHECK(sums[kRegionBackground] / double(counts[kRegionBackground]) ==
        doctest::Approx(0.05).epsilon(1e-6));
  CHECK(sums[kRegionSkull] / double(counts[kRegionSkull]) ==
        doctest::Approx(0.9).epsilon(1e-6));
  CHECK(sums[kRegionVessel] / double(counts[kRegionVessel]) ==
        doctest::Approx(0.7).epsilon(1e-6));
  CHECK(sums[kRegionAneurysm] / double(counts[kRegionAneurysm]) ==
        doctest::Approx(0.75).epsilon(1e-6));
  // Brain carries texture but stays centered near its level.
  CHECK(sums[kRegionBrain] / double(counts[kRegionBrain]) ==
        doctest::Approx(0.35).epsilon(0.05));
  double max_dev = 0.0;
  for (size_t i = 0; i < c.labels.labels.size(); ++i) {
    if (c.labels.labels[i] != kRegionBrain) continue;
    max_dev = std::max(max_dev, std::fabs(double(c.clean.voxels[i]) - 0.35));
  }
  CHECK(max_dev > 0.0);            // texture actually applied
  CHECK(max_dev <= 0.02 + 1e-6);   // bounded by the configured amplitude
}

TEST_CASE("clean volumes are valid with no out-of-range voxels") {
  PhantomSpec s;
  s.seed = 7;
  PhantomCase c = generate_phantom(s);
  validate_volume(c.clean);  // throws on violation
  CHECK(c.labels.depth == c.clean.depth);
  CHECK(c.labels.height == c.clean.height);
  CHECK(c.labels.width == c.clean.width);
  CHECK(c.target.depth == c.clean.depth);
}

TEST_CASE("target mask covers the vessels and respects the dilation bound") {
  PhantomSpec s;
  s.seed = 11;
  s.aneurysm_probability = 1.0;
  PhantomCase c = generate_phantom(s);

  MaskVolume r0 = target_mask(c, 0);
  MaskVolume r2 = target_mask(c, 2);
  MaskVolume r3 = target_mask(c, 3);
  size_t n0 = 0, n2 = 0, n3 = 0;
  for (size_t i = 0; i < c.labels.labels.size(); ++i) {
    const bool seed_px = c.labels.labels[i] == kRegionVessel ||
                         c.labels.labels[i] == kRegionAneurysm;
    // radius 0 is the identity dilation
    REQUIRE(int(r0.on[i]) == int(seed_px));
    // monotonicity in the radius
    if (r0.on[i]) REQUIRE(r2.on[i] == 1);
    if (r2.on[i]) REQUIRE(r3.on[i] == 1);
    n0 += r0.on[i];
    n2 += r2.on[i];
    n3 += r3.on[i];
  }
  CHECK(n0 > 0);
  CHECK(n0 < n2);
  CHECK(n2 < n3);
  CHECK(c.target.on == r2.on);  // default radius is 2

  CHECK_THROWS_AS(target_mask(c, -1), DataError);
}

TEST_CASE("single-pixel vessel dilates to the 13-pixel disc") {
  PhantomCase c;
  c.labels = LabelMap(1, 11, 11, kRegionBrain);
  c.labels.at(0, 5, 5) = kRegionVessel;
  MaskVolume m = target_mask(c, 2);
  size_t on = 0;
  for (int y = 0; y < 11; ++y) {
    for (int x = 0; x < 11; ++x) {
      const int dy = y - 5, dx = x - 5;
      CHECK(int(m.at(0, y, x)) == int(dy * dy + dx * dx <= 4));
      on += m.at(0, y, x);
    }
  }
  CHECK(on == 13);
}

TEST_CASE("empty vessel labels give an empty target") {
  PhantomCase c;
  c.labels = LabelMap(2, 11, 11, kRegionBrain);
  MaskVolume m = target_mask(c, 2);
  for (uint8_t b : m.on) REQUIRE(b == 0);
}

TEST_CASE("degenerate geometry is rejected") {
  PhantomSpec s;
  s.height = 16;
  s.width = 16;
  CHECK_THROWS_AS(generate_phantom(s), DataError);
  PhantomSpec flat;
  flat.depth = 2;
  CHECK_THROWS_AS(generate_phantom(flat), DataError);
}

TEST_CASE("spec validation and JSON round-trip") {
  PhantomSpec s;
  s.n_vessels = 0;
  CHECK_THROWS_AS(s.validate(), DataError);
  s.n_vessels = 2;
  s.aneurysm_probability = 1.5;
  CHECK_THROWS_AS(s.validate(), DataError);
  s.aneurysm_probability = 0.5;
  s.texture_amplitude = 0.5;
  CHECK_THROWS_AS(s.validate(), DataError);
  s.texture_amplitude = 0.03;
  s.seed = 987654321;
  const std::string text = s.to_json_text();
  PhantomSpec r = PhantomSpec::from_json_text(text);
  CHECK(r.height == s.height);
  CHECK(r.width == s.width);
  CHECK(r.depth == s.depth);
  CHECK(r.n_vessels == 2);
  CHECK(r.aneurysm_probability == 0.5);
  CHECK(r.texture_amplitude == 0.03);
  CHECK(r.seed == 987654321);

  CHECK_THROWS_AS(PhantomSpec::from_json_text("not json"), DataError);
  // defaults fill unspecified fields
  PhantomSpec d = PhantomSpec::from_json_text("{\"seed\": 5}");
  CHECK(d.height == 64);
  CHECK(d.seed == 5);
}

TEST_CASE("texture amplitude zero leaves the brain perfectly flat") {
  PhantomSpec s = small_spec(3);
  PhantomCase c = generate_phantom(s);
  for (size_t i = 0; i < c.labels.labels.size(); ++i) {
    if (c.labels.labels[i] == kRegionBrain) {
      REQUIRE(c.clean.voxels[i] == 0.35f);
    }
  }
}
