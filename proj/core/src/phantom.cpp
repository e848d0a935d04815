#include "resbound/phantom.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numbers>
#include <vector>

#include <nlohmann/json.hpp>

#include "resbound/errors.hpp"
#include "resbound/image_ops.hpp"
#include "resbound/rng.hpp"

using nlohmann::json;

namespace resbound {

void PhantomSpec::validate() const {
  if (depth < 1 || height < 8 || width < 8) {
    throw DataError("phantom spec dimensions out of range");
  }
  if (n_vessels < 1) throw DataError("phantom spec needs n_vessels >= 1");
  if (aneurysm_probability < 0.0 || aneurysm_probability > 1.0) {
    throw DataError("aneurysm_probability must be in [0, 1]");
  }
  if (texture_amplitude < 0.0 || texture_amplitude > 0.1) {
    throw DataError("texture_amplitude must be in [0, 0.1]");
  }
}

std::string PhantomSpec::to_json_text() const {
  json j;
  j["height"] = height;
  j["width"] = width;
  j["depth"] = depth;
  j["n_vessels"] = n_vessels;
  j["aneurysm_probability"] = aneurysm_probability;
  j["texture_amplitude"] = texture_amplitude;
  j["seed"] = seed;
  return j.dump(2) + "\n";
}

PhantomSpec PhantomSpec::from_json_text(std::string_view text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw DataError(std::string("malformed phantom spec: ") + e.what());
  }
  PhantomSpec s;
  if (j.contains("height")) s.height = j.at("height").get<int>();
  if (j.contains("width")) s.width = j.at("width").get<int>();
  if (j.contains("depth")) s.depth = j.at("depth").get<int>();
  if (j.contains("n_vessels")) s.n_vessels = j.at("n_vessels").get<int>();
  if (j.contains("aneurysm_probability")) {
    s.aneurysm_probability = j.at("aneurysm_probability").get<double>();
  }
  if (j.contains("texture_amplitude")) {
    s.texture_amplitude = j.at("texture_amplitude").get<double>();
  }
  if (j.contains("seed")) s.seed = j.at("seed").get<uint64_t>();
  s.validate();
  return s;
}

std::string case_id_from_seed(uint64_t seed) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "case_%016llx",
                (unsigned long long)rng::splitmix64(seed));
  return buf;
}

namespace {

constexpr float kBackgroundLevel = 0.05f;
constexpr float kSkullLevel = 0.9f;
constexpr float kBrainLevel = 0.35f;
constexpr float kVesselLevel = 0.7f;
constexpr float kAneurysmLevel = 0.75f;

struct Vec2 {
  double x = 0.0, y = 0.0;
};

struct VesselTube {
  Vec2 p0, p1, p2;  // quadratic Bezier control points
  double radius = 1.0;
  int z0 = 0, z1 = 0;  // inclusive slice span
  Vec2 point(double t) const {
    const double a = (1.0 - t) * (1.0 - t), b = 2.0 * (1.0 - t) * t, c = t * t;
    return {a * p0.x + b * p1.x + c * p2.x, a * p0.y + b * p1.y + c * p2.y};
  }
  Vec2 tangent(double t) const {
    return {2.0 * ((1.0 - t) * (p1.x - p0.x) + t * (p2.x - p1.x)),
            2.0 * ((1.0 - t) * (p1.y - p0.y) + t * (p2.y - p1.y))};
  }
};

struct HeadGeometry {
  double cx, cy;        // head center
  double ax, ay;        // outer semi-axes at the widest slice
  double thickness;     // skull thickness in px
  double z_center;
  double z_falloff;
  double slice_scale(int z) const {
    const double u = (z - z_center) / z_falloff;
    const double s = std::sqrt(std::max(0.0, 1.0 - u * u));
    return 0.75 + 0.25 * s;
  }
};

void paint_disc(LabelMap& labels, int z, double cx, double cy, double radius,
                uint8_t code, uint8_t only_over_a, uint8_t only_over_b) {
  const int x0 = std::max(0, int(std::floor(cx - radius)));
  const int x1 = std::min(labels.width - 1, int(std::ceil(cx + radius)));
  const int y0 = std::max(0, int(std::floor(cy - radius)));
  const int y1 = std::min(labels.height - 1, int(std::ceil(cy + radius)));
  const double r2 = radius * radius;
  for (int y = y0; y <= y1; ++y) {
    for (int x = x0; x <= x1; ++x) {
      const double dx = x - cx, dy = y - cy;
      if (dx * dx + dy * dy > r2) continue;
      uint8_t& lab = labels.at(z, y, x);
      if (lab == only_over_a || lab == only_over_b) lab = code;
    }
  }
}

}  // namespace

PhantomCase generate_phantom(const PhantomSpec& spec) {
  spec.validate();
  if (std::min(spec.height, spec.width) < 24 || spec.depth < 4) {
    throw DataError("phantom geometry too small to fit a skull annulus (need >=24x24, depth >=4)");
  }

  PhantomCase out;
  out.seed = spec.seed;
  out.case_id = case_id_from_seed(spec.seed);
  out.clean = Volume(spec.depth, spec.height, spec.width, kBackgroundLevel);
  out.labels = LabelMap(spec.depth, spec.height, spec.width, kRegionBackground);

  rng::Stream geo(spec.seed, rng::domain::phantom_geometry, 0);
  HeadGeometry head;
  head.cx = spec.width / 2.0 + geo.uniform(-1.5, 1.5);
  head.cy = spec.height / 2.0 + geo.uniform(-1.5, 1.5);
  const double base_r = 0.40 * std::min(spec.height, spec.width) * geo.uniform(0.97, 1.03);
  const double ellip = geo.uniform(0.0, 0.08);
  head.ax = base_r * (1.0 + ellip);
  head.ay = base_r * (1.0 - ellip);
  head.thickness = geo.uniform(2.0, 3.5);
  head.z_center = (spec.depth - 1) / 2.0;
  head.z_falloff = 0.62 * spec.depth;

  // Skull annulus and brain interior, slice by slice.
  for (int z = 0; z < spec.depth; ++z) {
    const double s = head.slice_scale(z);
    const double ax = head.ax * s, ay = head.ay * s;
    const double brain_frac = 1.0 - head.thickness / (base_r * s);
    for (int y = 0; y < spec.height; ++y) {
      for (int x = 0; x < spec.width; ++x) {
        const double rx = (x - head.cx) / ax, ry = (y - head.cy) / ay;
        const double rho = std::sqrt(rx * rx + ry * ry);
        if (rho <= brain_frac) {
          out.labels.at(z, y, x) = kRegionBrain;
        } else if (rho <= 1.0) {
          out.labels.at(z, y, x) = kRegionSkull;
        }
      }
    }
  }

  // Vessel tubes: quadratic Bezier centerlines extruded over a slice span.
  std::vector<VesselTube> vessels;
  vessels.reserve(size_t(spec.n_vessels));
  for (int i = 0; i < spec.n_vessels; ++i) {
    rng::Stream vs(spec.seed, rng::domain::phantom_geometry, 16 + uint64_t(i));
    VesselTube tube;
    const int max_span = std::min(8, spec.depth);
    const int span = vs.uniform_int(3, max_span);
    tube.z0 = vs.uniform_int(0, spec.depth - span);
    tube.z1 = tube.z0 + span - 1;
    double s_min = 1.0;
    for (int z = tube.z0; z <= tube.z1; ++z) s_min = std::min(s_min, head.slice_scale(z));
    const double reach =
        std::max(3.0, 0.70 * (std::min(head.ax, head.ay) * s_min - head.thickness - 4.0));
    for (Vec2* p : {&tube.p0, &tube.p1, &tube.p2}) {
      const double theta = vs.uniform(0.0, 2.0 * std::numbers::pi);
      const double rr = reach * std::sqrt(vs.next_double());
      p->x = head.cx + rr * std::cos(theta);
      p->y = head.cy + rr * std::sin(theta);
    }
    tube.radius = vs.uniform(1.0, 2.0);
    vessels.push_back(tube);

    const double approx_len =
        std::hypot(tube.p1.x - tube.p0.x, tube.p1.y - tube.p0.y) +
        std::hypot(tube.p2.x - tube.p1.x, tube.p2.y - tube.p1.y);
    const int steps = std::max(8, int(3.0 * approx_len));
    for (int z = tube.z0; z <= tube.z1; ++z) {
      for (int k = 0; k <= steps; ++k) {
        const Vec2 p = tube.point(double(k) / steps);
        paint_disc(out.labels, z, p.x, p.y, tube.radius, kRegionVessel,
                   kRegionBrain, kRegionVessel);
      }
    }
  }

  // Optional aneurysm: a spherical bulge seated on one vessel wall.
  rng::Stream an(spec.seed, rng::domain::phantom_geometry, 8000);
  const bool include_aneurysm = an.next_double() < spec.aneurysm_probability;
  if (include_aneurysm) {
    const VesselTube& host = vessels[size_t(an.uniform_int(0, spec.n_vessels - 1))];
    const double ta = an.uniform(0.25, 0.75);
    const double ra = an.uniform(2.0, 3.0);
    const Vec2 p = host.point(ta);
    Vec2 tan = host.tangent(ta);
    const double norm = std::hypot(tan.x, tan.y);
    Vec2 perp{0.0, 1.0};
    if (norm > 1e-9) perp = {-tan.y / norm, tan.x / norm};
    const double bx = p.x + perp.x * host.radius;
    const double by = p.y + perp.y * host.radius;
    const int bz = (host.z0 + host.z1) / 2;
    const int dz_max = int(std::floor(ra));
    for (int dz = -dz_max; dz <= dz_max; ++dz) {
      const int z = bz + dz;
      if (z < 0 || z >= spec.depth) continue;
      const double rz = std::sqrt(std::max(0.0, ra * ra - double(dz) * dz));
      paint_disc(out.labels, z, bx, by, rz, kRegionAneurysm, kRegionBrain,
                 kRegionVessel);
    }
  }

  // Intensities from labels.
  for (size_t i = 0; i < out.labels.labels.size(); ++i) {
    switch (out.labels.labels[i]) {
      case kRegionSkull: out.clean.voxels[i] = kSkullLevel; break;
      case kRegionBrain: out.clean.voxels[i] = kBrainLevel; break;
      case kRegionVessel: out.clean.voxels[i] = kVesselLevel; break;
      case kRegionAneurysm: out.clean.voxels[i] = kAneurysmLevel; break;
      default: out.clean.voxels[i] = kBackgroundLevel; break;
    }
  }

  // Smoothed low-amplitude texture inside the brain label only.
  if (spec.texture_amplitude > 0.0) {
    for (int z = 0; z < spec.depth; ++z) {
      rng::Stream tex(spec.seed, rng::domain::phantom_texture, uint64_t(z));
      Image noise(spec.height, spec.width);
      for (float& p : noise.pix) p = float(tex.normal());
      Image smooth = ops::gaussian_blur(noise, 1.2);
      float max_abs = 0.0f;
      for (float v : smooth.pix) max_abs = std::max(max_abs, std::fabs(v));
      if (max_abs <= 0.0f) continue;
      const float gain = float(spec.texture_amplitude) / max_abs;
      for (int y = 0; y < spec.height; ++y) {
        for (int x = 0; x < spec.width; ++x) {
          if (out.labels.at(z, y, x) != kRegionBrain) continue;
          float& v = out.clean.at(z, y, x);
          v = std::clamp(v + gain * smooth.at(y, x), 0.0f, 1.0f);
        }
      }
    }
  }

  out.has_aneurysm = std::any_of(out.labels.labels.begin(), out.labels.labels.end(),
                                 [](uint8_t c) { return c == kRegionAneurysm; });
  out.target = target_mask(out, kTargetDilationRadius);
  validate_volume(out.clean);
  return out;
}

MaskVolume target_mask(const PhantomCase& c, int dilation_radius) {
  if (dilation_radius < 0) throw DataError("dilation radius must be >= 0");
  const LabelMap& labels = c.labels;
  MaskVolume mask(labels.depth, labels.height, labels.width, 0);
  std::vector<uint8_t> seed_plane(labels.slice_pixels());
  for (int z = 0; z < labels.depth; ++z) {
    const uint8_t* lab = labels.slice_data(z);
    for (size_t i = 0; i < seed_plane.size(); ++i) {
      seed_plane[i] = (lab[i] == kRegionVessel || lab[i] == kRegionAneurysm) ? 1 : 0;
    }
    ops::dilate_disc(seed_plane.data(), mask.on.data() + z * labels.slice_pixels(),
                     labels.height, labels.width, dilation_radius);
  }
  return mask;
}

}  // namespace resbound
