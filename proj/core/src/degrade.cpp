#include "resbound/degrade.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include <nlohmann/json.hpp>

#include "resbound/errors.hpp"
#include "resbound/image_ops.hpp"
#include "resbound/parallel.hpp"
#include "resbound/rng.hpp"

using nlohmann::json;

namespace resbound {

int stage_type_index(const DegradeStage& s) { return int(s.index()); }

const char* stage_type_name(const DegradeStage& s) {
  switch (s.index()) {
    case 0: return "gaussian_blur";
    case 1: return "motion_blur";
    case 2: return "poisson_gaussian";
    case 3: return "ring_band";
    case 4: return "edge_streak";
    default: return "unknown";
  }
}

namespace {

void require(bool ok, const char* msg) {
  if (!ok) throw DataError(msg);
}

void validate_stage(const DegradeStage& s) {
  if (const auto* g = std::get_if<GaussianBlurStage>(&s)) {
    require(g->sigma >= 0.0, "gaussian blur sigma must be >= 0");
  } else if (const auto* m = std::get_if<MotionBlurStage>(&s)) {
    require(m->length >= 1 && m->length % 2 == 1,
            "motion blur length must be odd and >= 1");
  } else if (const auto* p = std::get_if<PoissonGaussianStage>(&s)) {
    require(p->photons >= 1.0, "photon count must be >= 1");
    require(p->read_sigma >= 0.0, "read noise sigma must be >= 0");
  } else if (const auto* r = std::get_if<RingBandStage>(&s)) {
    require(r->amplitude >= 0.0, "ring/band amplitude must be >= 0");
    require(r->radial_freq >= 0.0, "radial frequency must be >= 0");
  } else if (const auto* e = std::get_if<EdgeStreakStage>(&s)) {
    require(e->amplitude >= 0.0, "edge streak amplitude must be >= 0");
    require(e->streak_len >= 1 && e->streak_len % 2 == 1,
            "streak length must be odd and >= 1");
  }
}

uint64_t clamp_image(Image& img) {
  uint64_t n = 0;
  for (float& p : img.pix) {
    if (p < 0.0f) {
      p = 0.0f;
      ++n;
    } else if (p > 1.0f) {
      p = 1.0f;
      ++n;
    }
  }
  return n;
}

void record(uint64_t* out, uint64_t n) {
  if (out) *out = n;
}

}  // namespace

void DegradationRecipe::validate() const {
  int last_type = -1;
  for (const DegradeStage& s : stages) {
    const int t = stage_type_index(s);
    require(t > last_type,
            "recipe stages must follow the canonical order, one per type");
    last_type = t;
    validate_stage(s);
  }
  if (blur_level) {
    require(*blur_level >= 0 && *blur_level <= 10, "blur level out of [0, 10]");
  }
}

std::string DegradationRecipe::to_json_text() const {
  validate();
  json j;
  j["seed"] = seed;
  if (blur_level) j["blur_level"] = *blur_level;
  j["stages"] = json::array();
  for (const DegradeStage& s : stages) {
    json st;
    st["type"] = stage_type_name(s);
    if (const auto* g = std::get_if<GaussianBlurStage>(&s)) {
      st["sigma"] = g->sigma;
    } else if (const auto* m = std::get_if<MotionBlurStage>(&s)) {
      st["length"] = m->length;
      st["angle"] = m->angle;
    } else if (const auto* p = std::get_if<PoissonGaussianStage>(&s)) {
      st["photons"] = p->photons;
      st["read_sigma"] = p->read_sigma;
    } else if (const auto* r = std::get_if<RingBandStage>(&s)) {
      st["amplitude"] = r->amplitude;
      st["radial_freq"] = r->radial_freq;
      st["mode"] = r->band ? "band" : "ring";
    } else if (const auto* e = std::get_if<EdgeStreakStage>(&s)) {
      st["amplitude"] = e->amplitude;
      st["streak_len"] = e->streak_len;
      st["angle"] = e->angle;
    }
    j["stages"].push_back(st);
  }
  return j.dump(2) + "\n";
}

DegradationRecipe DegradationRecipe::from_json_text(std::string_view text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw DataError(std::string("malformed recipe: ") + e.what());
  }
  DegradationRecipe r;
  try {
    if (j.contains("seed")) r.seed = j.at("seed").get<uint64_t>();
    if (j.contains("blur_level")) r.blur_level = j.at("blur_level").get<int>();
    for (const json& st : j.value("stages", json::array())) {
      const std::string type = st.at("type").get<std::string>();
      if (type == "gaussian_blur") {
        r.stages.push_back(GaussianBlurStage{st.at("sigma").get<double>()});
      } else if (type == "motion_blur") {
        r.stages.push_back(MotionBlurStage{st.at("length").get<int>(),
                                           st.at("angle").get<double>()});
      } else if (type == "poisson_gaussian") {
        r.stages.push_back(PoissonGaussianStage{
            st.at("photons").get<double>(), st.at("read_sigma").get<double>()});
      } else if (type == "ring_band") {
        const std::string mode = st.at("mode").get<std::string>();
        require(mode == "ring" || mode == "band", "ring/band mode unknown");
        r.stages.push_back(RingBandStage{st.at("amplitude").get<double>(),
                                         st.at("radial_freq").get<double>(),
                                         mode == "band"});
      } else if (type == "edge_streak") {
        r.stages.push_back(EdgeStreakStage{st.at("amplitude").get<double>(),
                                           st.at("streak_len").get<int>(),
                                           st.at("angle").get<double>()});
      } else {
        throw DataError("unknown stage type '" + type + "'");
      }
    }
  } catch (const json::exception& e) {
    throw DataError(std::string("malformed recipe: ") + e.what());
  }
  r.validate();
  return r;
}

namespace {

void validate_range(const StageRange& r, const char* what) {
  if (!(r.lo <= r.hi)) {
    throw DataError(std::string("range for ") + what + " must be ordered");
  }
}

void validate_probability(double p, const char* what) {
  if (!(p >= 0.0 && p <= 1.0)) {
    throw DataError(std::string("probability for ") + what +
                    " must be in [0, 1]");
  }
}

void validate_odd_bounds(int lo, int hi, const char* what) {
  if (lo < 1 || lo > hi || lo % 2 == 0 || hi % 2 == 0) {
    throw DataError(std::string(what) + " bounds must be odd, >= 1, ordered");
  }
}

}  // namespace

void DegradeConfig::validate() const {
  validate_probability(p_gaussian, "gaussian blur");
  validate_probability(p_motion, "motion blur");
  validate_probability(p_noise, "poisson-gaussian noise");
  validate_probability(p_ringband, "ring/band");
  validate_probability(p_streak, "edge streak");
  validate_probability(p_band, "band-vs-ring");
  validate_range(sigma, "sigma");
  require(sigma.lo >= 0.0, "sigma range must be non-negative");
  validate_odd_bounds(motion_len_min, motion_len_max, "motion length");
  validate_range(photons, "photons");
  require(photons.lo >= 1.0, "photon range must start at >= 1");
  validate_range(read_sigma, "read sigma");
  require(read_sigma.lo >= 0.0, "read sigma range must be non-negative");
  validate_range(ring_amplitude, "ring amplitude");
  require(ring_amplitude.lo >= 0.0, "ring amplitude must be non-negative");
  validate_range(radial_freq, "radial frequency");
  require(radial_freq.lo >= 0.0, "radial frequency must be non-negative");
  validate_range(streak_amplitude, "streak amplitude");
  require(streak_amplitude.lo >= 0.0, "streak amplitude must be non-negative");
  validate_odd_bounds(streak_len_min, streak_len_max, "streak length");
}

namespace {

json range_json(const StageRange& r) { return json::array({r.lo, r.hi}); }

StageRange range_from(const json& j, const char* what) {
  if (!j.is_array() || j.size() != 2) {
    throw DataError(std::string("range for ") + what +
                    " must be a [lo, hi] pair");
  }
  return StageRange{j[0].get<double>(), j[1].get<double>()};
}

}  // namespace

std::string DegradeConfig::to_json_text() const {
  validate();
  json j;
  j["p_gaussian"] = p_gaussian;
  j["p_motion"] = p_motion;
  j["p_noise"] = p_noise;
  j["p_ringband"] = p_ringband;
  j["p_streak"] = p_streak;
  j["sigma"] = range_json(sigma);
  j["motion_len"] = json::array({motion_len_min, motion_len_max});
  j["photons"] = range_json(photons);
  j["read_sigma"] = range_json(read_sigma);
  j["ring_amplitude"] = range_json(ring_amplitude);
  j["radial_freq"] = range_json(radial_freq);
  j["p_band"] = p_band;
  j["streak_amplitude"] = range_json(streak_amplitude);
  j["streak_len"] = json::array({streak_len_min, streak_len_max});
  return j.dump(2) + "\n";
}

DegradeConfig DegradeConfig::from_json_text(std::string_view text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw DataError(std::string("malformed degrade config: ") + e.what());
  }
  DegradeConfig c;
  try {
    if (j.contains("p_gaussian")) c.p_gaussian = j.at("p_gaussian").get<double>();
    if (j.contains("p_motion")) c.p_motion = j.at("p_motion").get<double>();
    if (j.contains("p_noise")) c.p_noise = j.at("p_noise").get<double>();
    if (j.contains("p_ringband")) c.p_ringband = j.at("p_ringband").get<double>();
    if (j.contains("p_streak")) c.p_streak = j.at("p_streak").get<double>();
    if (j.contains("sigma")) c.sigma = range_from(j.at("sigma"), "sigma");
    if (j.contains("motion_len")) {
      c.motion_len_min = j.at("motion_len")[0].get<int>();
      c.motion_len_max = j.at("motion_len")[1].get<int>();
    }
    if (j.contains("photons")) c.photons = range_from(j.at("photons"), "photons");
    if (j.contains("read_sigma")) {
      c.read_sigma = range_from(j.at("read_sigma"), "read_sigma");
    }
    if (j.contains("ring_amplitude")) {
      c.ring_amplitude = range_from(j.at("ring_amplitude"), "ring_amplitude");
    }
    if (j.contains("radial_freq")) {
      c.radial_freq = range_from(j.at("radial_freq"), "radial_freq");
    }
    if (j.contains("p_band")) c.p_band = j.at("p_band").get<double>();
    if (j.contains("streak_amplitude")) {
      c.streak_amplitude = range_from(j.at("streak_amplitude"), "streak_amplitude");
    }
    if (j.contains("streak_len")) {
      c.streak_len_min = j.at("streak_len")[0].get<int>();
      c.streak_len_max = j.at("streak_len")[1].get<int>();
    }
  } catch (const json::exception& e) {
    throw DataError(std::string("malformed degrade config: ") + e.what());
  }
  c.validate();
  return c;
}

DegradeConfig DegradeConfig::external_noise_defaults() {
  DegradeConfig c;
  c.p_gaussian = 1.0;
  c.sigma = {0.5, 1.0};
  c.p_motion = 0.0;
  c.p_noise = 1.0;
  c.photons = {80.0, 300.0};
  c.read_sigma = {0.02, 0.05};
  c.p_ringband = 0.0;
  c.p_streak = 0.0;
  return c;
}

double blur_level_to_sigma(int level) {
  if (level < 0 || level > 10) {
    throw DataError("blur level " + std::to_string(level) + " out of [0, 10]");
  }
  return 0.25 * level;
}

DegradationRecipe sample_recipe(const DegradeConfig& cfg, uint64_t seed) {
  cfg.validate();
  rng::Stream s(seed, rng::domain::recipe_sampling, 0);
  DegradationRecipe r;
  r.seed = seed;

  auto odd_draw = [&s](int lo, int hi) {
    const int count = (hi - lo) / 2 + 1;
    return lo + 2 * s.uniform_int(0, count - 1);
  };

  if (s.next_double() < cfg.p_gaussian) {
    r.stages.push_back(GaussianBlurStage{s.uniform(cfg.sigma.lo, cfg.sigma.hi)});
  }
  if (s.next_double() < cfg.p_motion) {
    const int len = odd_draw(cfg.motion_len_min, cfg.motion_len_max);
    r.stages.push_back(MotionBlurStage{len, s.uniform(0.0, std::numbers::pi)});
  }
  if (s.next_double() < cfg.p_noise) {
    r.stages.push_back(
        PoissonGaussianStage{s.uniform(cfg.photons.lo, cfg.photons.hi),
                             s.uniform(cfg.read_sigma.lo, cfg.read_sigma.hi)});
  }
  if (s.next_double() < cfg.p_ringband) {
    RingBandStage rb;
    rb.amplitude = s.uniform(cfg.ring_amplitude.lo, cfg.ring_amplitude.hi);
    rb.radial_freq = s.uniform(cfg.radial_freq.lo, cfg.radial_freq.hi);
    rb.band = s.next_double() < cfg.p_band;
    r.stages.push_back(rb);
  }
  if (s.next_double() < cfg.p_streak) {
    EdgeStreakStage es;
    es.amplitude = s.uniform(cfg.streak_amplitude.lo, cfg.streak_amplitude.hi);
    es.streak_len = odd_draw(cfg.streak_len_min, cfg.streak_len_max);
    es.angle = s.uniform(0.0, std::numbers::pi);
    r.stages.push_back(es);
  }
  r.validate();
  return r;
}

Image apply_gaussian_blur(const Image& slice, double sigma, uint64_t* clamped) {
  record(clamped, 0);
  if (sigma < ops::kBlurIdentitySigma) return slice;
  Image out = ops::gaussian_blur(slice, sigma);
  record(clamped, clamp_image(out));
  return out;
}

Image apply_motion_blur(const Image& slice, int length, double angle,
                        uint64_t* clamped) {
  record(clamped, 0);
  if (length < 1 || length % 2 == 0) {
    throw DataError("motion blur length must be odd and >= 1");
  }
  if (length == 1) return slice;
  Image out = ops::conv2_reflect(slice, ops::line_kernel(length, angle));
  record(clamped, clamp_image(out));
  return out;
}

Image apply_poisson_gaussian(const Image& slice, const PoissonGaussianStage& st,
                             uint64_t seed, int stage_index, int slice_index,
                             uint64_t* clamped) {
  Image out(slice.height, slice.width);
  const uint64_t base = uint64_t(slice_index) * slice.size();
  uint64_t n_clamped = 0;
  for (size_t i = 0; i < slice.size(); ++i) {
    rng::Stream s(seed, rng::domain::degrade_stage + uint32_t(stage_index),
                  base + i);
    const double lam = double(slice.pix[i]) * st.photons;
    double val = double(s.poisson(lam)) / st.photons;
    val += s.normal(0.0, st.read_sigma);
    if (val < 0.0) {
      val = 0.0;
      ++n_clamped;
    } else if (val > 1.0) {
      val = 1.0;
      ++n_clamped;
    }
    out.pix[i] = float(val);
  }
  record(clamped, n_clamped);
  return out;
}

Image apply_ring_band(const Image& slice, const RingBandStage& st,
                      uint64_t seed, int stage_index, int slice_index,
                      uint64_t* clamped) {
  record(clamped, 0);
  if (st.amplitude <= 0.0) return slice;
  Image out = slice;
  if (st.band) {
    const uint64_t base = uint64_t(slice_index) * uint64_t(slice.height);
    for (int y = 0; y < slice.height; ++y) {
      rng::Stream s(seed, rng::domain::degrade_stage + uint32_t(stage_index),
                    base + uint64_t(y));
      const float offset = float((2.0 * s.next_double() - 1.0) * st.amplitude);
      for (int x = 0; x < slice.width; ++x) out.at(y, x) += offset;
    }
  } else {
    const double cx = (slice.width - 1) / 2.0;
    const double cy = (slice.height - 1) / 2.0;
    const double omega = 2.0 * std::numbers::pi * st.radial_freq;
    for (int y = 0; y < slice.height; ++y) {
      for (int x = 0; x < slice.width; ++x) {
        const double rho = std::hypot(x - cx, y - cy);
        out.at(y, x) += float(st.amplitude * std::sin(omega * rho));
      }
    }
  }
  record(clamped, clamp_image(out));
  return out;
}

Image apply_edge_streak(const Image& slice, const EdgeStreakStage& st,
                        uint64_t* clamped) {
  record(clamped, 0);
  if (st.amplitude <= 0.0) return slice;
  const Image grad = ops::sobel_magnitude(slice);
  const float cutoff = ops::percentile(grad.pix, 0.95);
  Image edges(slice.height, slice.width, 0.0f);
  bool any = false;
  for (size_t i = 0; i < grad.size(); ++i) {
    // ties with the cutoff count as edges, but flat regions never do
    if (grad.pix[i] >= cutoff && grad.pix[i] > 0.0f) {
      edges.pix[i] = 1.0f;
      any = true;
    }
  }
  if (!any) return slice;  // flat image: nothing to streak
  Image field =
      ops::conv2_reflect(edges, ops::line_kernel(st.streak_len, st.angle));
  float peak = 0.0f;
  for (float v : field.pix) peak = std::max(peak, v);
  if (peak <= 0.0f) return slice;
  const float gain = float(st.amplitude) / peak;
  Image out = slice;
  for (size_t i = 0; i < out.size(); ++i) out.pix[i] += gain * field.pix[i];
  record(clamped, clamp_image(out));
  return out;
}

Image apply_recipe_slice(const Image& slice, const DegradationRecipe& recipe,
                         int slice_index, StageStats* stats) {
  recipe.validate();
  Image cur = slice;
  for (const DegradeStage& stage : recipe.stages) {
    uint64_t n = 0;
    const int t = stage_type_index(stage);
    if (const auto* g = std::get_if<GaussianBlurStage>(&stage)) {
      cur = apply_gaussian_blur(cur, g->sigma, &n);
    } else if (const auto* m = std::get_if<MotionBlurStage>(&stage)) {
      cur = apply_motion_blur(cur, m->length, m->angle, &n);
    } else if (const auto* p = std::get_if<PoissonGaussianStage>(&stage)) {
      cur = apply_poisson_gaussian(cur, *p, recipe.seed, t, slice_index, &n);
    } else if (const auto* r = std::get_if<RingBandStage>(&stage)) {
      cur = apply_ring_band(cur, *r, recipe.seed, t, slice_index, &n);
    } else if (const auto* e = std::get_if<EdgeStreakStage>(&stage)) {
      cur = apply_edge_streak(cur, *e, &n);
    }
    if (stats) stats->clamped.push_back(n);
  }
  return cur;
}

Volume apply_recipe(const Volume& v, const DegradationRecipe& recipe,
                    StageStats* stats) {
  recipe.validate();
  Volume out(v.depth, v.height, v.width);
  out.spacing = v.spacing;
  std::vector<StageStats> per_slice(size_t(v.depth));
  parallel_for(size_t(v.depth), [&](size_t z) {
    Image degraded =
        apply_recipe_slice(v.slice(int(z)), recipe, int(z), &per_slice[z]);
    std::copy(degraded.pix.begin(), degraded.pix.end(), out.slice_data(int(z)));
  });
  if (stats) {
    stats->clamped.assign(recipe.stages.size(), 0);
    for (const StageStats& ps : per_slice) {
      for (size_t i = 0; i < ps.clamped.size(); ++i) {
        stats->clamped[i] += ps.clamped[i];
      }
    }
  }
  return out;
}

}  // namespace resbound
