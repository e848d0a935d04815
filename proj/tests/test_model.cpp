#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <cstdlib>
#include <vector>

#include "resbound/baselines.hpp"
#include "resbound/errors.hpp"
#include "resbound/image_ops.hpp"
#include "resbound/model.hpp"
#include "resbound/rng.hpp"
#include "resbound/volume.hpp"
#include "test_util.hpp"

using namespace resbound;

namespace {

Image random_image(int h, int w, rng::Stream& s) {
  Image img(h, w);
  for (float& p : img.pix) p = s.next_float();
  return img;
}

SliceTriplet random_triplet(int h, int w, rng::Stream& s) {
  SliceTriplet t;
  t.prev = random_image(h, w, s);
  t.center = random_image(h, w, s);
  t.next = random_image(h, w, s);
  return t;
}

ModelParams random_params(uint64_t seed, double scale = 0.3) {
  ModelParams p = ModelParams::make();
  rng::Stream s(seed, 0x98, 0);
  p.for_each_layer([&](const std::string&, ConvLayerT<float>& l) {
    for (float& x : l.w) x = float(s.normal(0.0, scale));
    for (float& x : l.b) x = float(s.normal(0.0, scale / 4));
  });
  return p;
}

void zero_layer(ConvLayerT<float>& l) {
  std::fill(l.w.begin(), l.w.end(), 0.0f);
  std::fill(l.b.begin(), l.b.end(), 0.0f);
}

}  // namespace

TEST_CASE("the architecture has the documented parameter count") {
  CHECK(ModelParams::make().param_count() == 19395);
}

TEST_CASE("zero heads force the exact identity restorer") {
  ModelParams p = random_params(1);
  zero_layer(p.head_r);
  zero_layer(p.head_m);
  zero_layer(p.head_u);
  rng::Stream s(2, 0x99, 0);
  const SliceTriplet t = random_triplet(16, 16, s);
  const RestorationOutput out = forward(t, p);
  for (size_t i = 0; i < out.restored.size(); ++i) {
    REQUIRE(out.residual.pix[i] == 0.0f);
    REQUIRE(out.edit_map.pix[i] == 0.5f);
    REQUIRE(out.uncertainty.pix[i] == doctest::Approx(std::log(2.0)).epsilon(1e-6));
    REQUIRE(out.applied_edit.pix[i] == 0.0f);
    REQUIRE(out.restored.pix[i] == t.center.pix[i]);
  }
}

TEST_CASE("zeroing only the residual head still gives identity output") {
  ModelParams p = random_params(3);
  zero_layer(p.head_r);
  rng::Stream s(4, 0x99, 0);
  const SliceTriplet t = random_triplet(12, 12, s);
  const RestorationOutput out = forward(t, p);
  for (size_t i = 0; i < out.restored.size(); ++i) {
    REQUIRE(out.restored.pix[i] == t.center.pix[i]);
    REQUIRE(out.applied_edit.pix[i] == 0.0f);
  }
}

TEST_CASE("the residual bound holds for arbitrary parameters and inputs") {
  rng::Stream s(5, 0x99, 0);
  for (int trial = 0; trial < 300; ++trial) {
    const ModelParams p = random_params(1000 + uint64_t(trial), 0.6);
    const SliceTriplet t = random_triplet(12, 12, s);
    const RestorationOutput out = forward(t, p);
    for (size_t i = 0; i < out.restored.size(); ++i) {
      REQUIRE(std::fabs(out.restored.pix[i] - t.center.pix[i]) <= 0.2f + 1e-6f);
      REQUIRE(std::fabs(out.residual.pix[i]) <= 0.2f + 1e-7f);
      REQUIRE(std::fabs(out.applied_edit.pix[i]) <= 0.2f + 1e-7f);
      REQUIRE(out.edit_map.pix[i] >= 0.0f);
      REQUIRE(out.edit_map.pix[i] <= 1.0f);
      REQUIRE(out.uncertainty.pix[i] >= 0.0f);
      REQUIRE(out.restored.pix[i] >= 0.0f);
      REQUIRE(out.restored.pix[i] <= 1.0f);
    }
  }
}

TEST_CASE("forward is bitwise deterministic") {
  const ModelParams p = random_params(7);
  rng::Stream s(8, 0x99, 0);
  const SliceTriplet t = random_triplet(20, 20, s);
  const RestorationOutput a = forward(t, p);
  const RestorationOutput b = forward(t, p);
  CHECK(a.restored.pix == b.restored.pix);
  CHECK(a.residual.pix == b.residual.pix);
  CHECK(a.edit_map.pix == b.edit_map.pix);
  CHECK(a.uncertainty.pix == b.uncertainty.pix);
}

TEST_CASE("forward rejects mismatched triplet planes") {
  ModelParams p = ModelParams::make();
  SliceTriplet t;
  t.prev = Image(8, 8, 0.5f);
  t.center = Image(8, 8, 0.5f);
  t.next = Image(8, 9, 0.5f);
  CHECK_THROWS_AS(forward(t, p), DataError);
}

TEST_CASE("compose arithmetic, clamps, and locality") {
  Image x(1, 3, 0.5f);
  Image r(1, 3, 0.0f);
  Image m(1, 3, 0.0f);

  // zero edit map: identity
  x.at(0, 0) = 0.31f;
  CHECK(compose(x, r, m).pix == x.pix);

  // direct arithmetic: 0.5 + 0.5 * 0.1 = 0.55
  x.at(0, 1) = 0.5f;
  r.at(0, 1) = 0.1f;
  m.at(0, 1) = 0.5f;
  CHECK(compose(x, r, m).at(0, 1) == doctest::Approx(0.55).epsilon(1e-7));

  // clamp at the top
  x.at(0, 2) = 0.95f;
  r.at(0, 2) = 0.2f;
  m.at(0, 2) = 1.0f;
  CHECK(compose(x, r, m).at(0, 2) == 1.0f);

  // pixels with m*r = 0 never move
  rng::Stream s(9, 0x99, 0);
  Image xc = random_image(8, 8, s);
  Image rr = random_image(8, 8, s);
  Image mm = random_image(8, 8, s);
  for (int i = 0; i < 32; ++i) mm.pix[size_t(i)] = 0.0f;
  Image out = compose(xc, rr, mm);
  for (int i = 0; i < 32; ++i) REQUIRE(out.pix[size_t(i)] == xc.pix[size_t(i)]);

  Image bad(7, 8, 0.0f);
  CHECK_THROWS_AS(compose(xc, rr, bad), DataError);
}

TEST_CASE("gaussian baseline shares the degradation kernel behavior") {
  CHECK_THROWS_AS(gaussian_baseline(Image(8, 8, 0.5f), 0.0), DataError);

  Image flat(9, 9, 0.62f);
  Image out = gaussian_baseline(flat, 1.0);
  for (float v : out.pix) CHECK(v == doctest::Approx(0.62).epsilon(1e-6));

  const int n = 15;
  Image impulse(n, n, 0.0f);
  impulse.at(n / 2, n / 2) = 1.0f;
  const auto k = ops::gaussian_kernel(1.0);
  const int radius = int(k.size() / 2);
  Image blurred = gaussian_baseline(impulse, 1.0);
  for (int y = 0; y < n; ++y) {
    for (int x = 0; x < n; ++x) {
      const int dy = y - n / 2, dx = x - n / 2;
      double expect = 0.0;
      if (std::abs(dy) <= radius && std::abs(dx) <= radius) {
        expect = double(k[size_t(dy + radius)]) * double(k[size_t(dx + radius)]);
      }
      REQUIRE(blurred.at(y, x) == doctest::Approx(expect).epsilon(1e-6));
    }
  }

  // step edge: output strictly between the two plateau values at the edge
  Image step(12, 12);
  for (int y = 0; y < 12; ++y) {
    for (int x = 0; x < 12; ++x) step.at(y, x) = x < 6 ? 0.2f : 0.8f;
  }
  Image sb = gaussian_baseline(step, 1.0);
  for (int y = 0; y < 12; ++y) {
    CHECK(sb.at(y, 5) > 0.2f);
    CHECK(sb.at(y, 5) < 0.8f);
    CHECK(sb.at(y, 6) > 0.2f);
    CHECK(sb.at(y, 6) < 0.8f);
  }
}

TEST_CASE("NLM leaves constant images unchanged") {
  BaselineParams p;
  Image flat(16, 16, 0.44f);
  Image out = nlm_baseline(flat, p);
  for (float v : out.pix) CHECK(v == doctest::Approx(0.44).epsilon(1e-7));
}

TEST_CASE("NLM matches a brute-force reference on a random 8x8 image") {
  BaselineParams p;
  rng::Stream s(11, 0x99, 0);
  Image img = random_image(8, 8, s);
  Image out = nlm_baseline(img, p);

  auto reflect = [](int i, int n) {
    while (i < 0 || i >= n) i = i < 0 ? -i : 2 * n - 2 - i;
    return i;
  };
  const int h = 8, w = 8, pr = p.nlm_patch / 2, sr = p.nlm_search / 2;
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      double wsum = 0.0, vsum = 0.0, wmax = 0.0;
      for (int dy = -sr; dy <= sr; ++dy) {
        for (int dx = -sr; dx <= sr; ++dx) {
          if (dy == 0 && dx == 0) continue;
          double d2 = 0.0;
          for (int py = -pr; py <= pr; ++py) {
            for (int px = -pr; px <= pr; ++px) {
              const double a = img.at(reflect(y + py, h), reflect(x + px, w));
              const double b =
                  img.at(reflect(y + dy + py, h), reflect(x + dx + px, w));
              d2 += (a - b) * (a - b);
            }
          }
          d2 /= double(p.nlm_patch) * p.nlm_patch;
          const double wgt = std::exp(-d2 / (p.nlm_h * p.nlm_h));
          wmax = std::max(wmax, wgt);
          wsum += wgt;
          vsum += wgt * img.at(reflect(y + dy, h), reflect(x + dx, w));
        }
      }
      wsum += wmax;
      vsum += wmax * img.at(y, x);
      REQUIRE(out.at(y, x) == doctest::Approx(vsum / wsum).epsilon(1e-6));
    }
  }
}

TEST_CASE("NLM tends to the search-window box mean as h grows") {
  BaselineParams p;
  p.nlm_h = 1e6;
  rng::Stream s(12, 0x99, 0);
  Image img = random_image(16, 16, s);
  Image out = nlm_baseline(img, p);
  Image box = ops::box_mean_reflect(img, p.nlm_search / 2);
  for (size_t i = 0; i < out.size(); ++i) {
    REQUIRE(out.pix[i] == doctest::Approx(box.pix[i]).epsilon(1e-4));
  }
}

TEST_CASE("baselines are shift-equivariant away from borders") {
  rng::Stream s(13, 0x99, 0);
  Image base = random_image(40, 40, s);
  auto crop = [&](int oy, int ox, int size) {
    Image c(size, size);
    for (int y = 0; y < size; ++y) {
      for (int x = 0; x < size; ++x) c.at(y, x) = base.at(y + oy, x + ox);
    }
    return c;
  };
  const Image a = crop(0, 0, 30);
  const Image b = crop(2, 3, 30);

  BaselineParams p;
  const Image na = nlm_baseline(a, p);
  const Image nb = nlm_baseline(b, p);
  const int margin = p.nlm_search / 2 + p.nlm_patch / 2;  // 7
  for (int y = margin; y < 30 - margin - 2; ++y) {
    for (int x = margin; x < 30 - margin - 3; ++x) {
      REQUIRE(na.at(y + 2, x + 3) == doctest::Approx(nb.at(y, x)).epsilon(1e-6));
    }
  }

  const Image ga = gaussian_baseline(a, 1.0);
  const Image gb = gaussian_baseline(b, 1.0);
  for (int y = 4; y < 30 - 4 - 2; ++y) {
    for (int x = 4; x < 30 - 4 - 3; ++x) {
      REQUIRE(ga.at(y + 2, x + 3) == doctest::Approx(gb.at(y, x)).epsilon(1e-6));
    }
  }
}

TEST_CASE("volume restoration is parallel-deterministic and maps line up") {
  const ModelParams p = random_params(20);
  Volume v(6, 16, 16);
  rng::Stream s(21, 0x99, 0);
  for (float& x : v.voxels) x = s.next_float();

  setenv("RESBOUND_THREADS", "1", 1);
  RestorationMaps maps;
  const Volume serial = restore_volume(v, p, &maps);
  setenv("RESBOUND_THREADS", "4", 1);
  const Volume parallel = restore_volume(v, p);
  unsetenv("RESBOUND_THREADS");
  CHECK(serial.voxels == parallel.voxels);

  REQUIRE(maps.residual.voxel_count() == v.voxel_count());
  for (size_t i = 0; i < v.voxel_count(); ++i) {
    REQUIRE(maps.applied_edit.voxels[i] ==
            maps.edit_map.voxels[i] * maps.residual.voxels[i]);
    const float expect = std::clamp(v.voxels[i] + maps.applied_edit.voxels[i],
                                    0.0f, 1.0f);
    REQUIRE(serial.voxels[i] == expect);
  }
}

TEST_CASE("checkpoints round-trip parameters and metadata") {
  testutil::TempDir dir("ckpt");
  ModelParams p = random_params(30);
  CheckpointMeta meta;
  meta.train_case_ids = {"case_0000000000000001", "case_0000000000000002"};
  meta.train_config_text = "{\"steps\": 10}";
  save_checkpoint(p, meta, dir.file("model"));

  Checkpoint ck = load_checkpoint(dir.file("model"));
  bool equal = true;
  ck.params.for_each_layer([&](const std::string& name, ConvLayerT<float>& l) {
    p.for_each_layer([&](const std::string& name2, ConvLayerT<float>& l2) {
      if (name == name2) equal = equal && l.w == l2.w && l.b == l2.b;
    });
  });
  CHECK(equal);
  CHECK(ck.meta.train_case_ids == meta.train_case_ids);
  CHECK(ck.meta.tool_version == "0.1.0");
  CHECK(ck.meta.rng_name == "philox4x32-10");
  CHECK(ck.meta.train_config_text.find("steps") != std::string::npos);

  // saving twice produces identical bytes
  save_checkpoint(p, meta, dir.file("model2"));
  auto slurp = [](const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    return std::string(std::istreambuf_iterator<char>(in), {});
  };
  CHECK(slurp(dir.file("model.json")) == slurp(dir.file("model2.json")));
  CHECK(slurp(dir.file("model.raw")) == slurp(dir.file("model2.raw")));
}

TEST_CASE("checkpoint loading rejects corrupted artifacts") {
  testutil::TempDir dir("ckpt_bad");
  ModelParams p = random_params(31);
  save_checkpoint(p, CheckpointMeta{}, dir.file("model"));

  CHECK_THROWS_AS(load_checkpoint(dir.file("missing")), DataError);

  // truncated blob
  std::filesystem::resize_file(dir.file("model.raw"), 100);
  CHECK_THROWS_AS(load_checkpoint(dir.file("model")), DataError);

  // non-finite parameters refuse to save
  p.trunk[0].w[0] = std::nanf("");
  CHECK_THROWS_AS(save_checkpoint(p, CheckpointMeta{}, dir.file("nan")), DataError);
}
