#include "resbound/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "resbound/errors.hpp"
#include "resbound/format.hpp"

namespace resbound {

namespace {

double mse_of(const float* a, const float* b, size_t n) {
  double acc = 0.0;
  for (size_t i = 0; i < n; ++i) {
    const double d = double(a[i]) - double(b[i]);
    acc += d * d;
  }
  return acc / double(n);
}

double psnr_from_mse(double mse, double cap) {
  if (mse <= 0.0) return cap;
  return std::min(cap, 10.0 * std::log10(1.0 / mse));
}

// reflect-101 index: -1 -> 1, n -> n-2
int reflect(int i, int n) {
  if (i < 0) i = -i;
  if (i >= n) i = 2 * n - 2 - i;
  return i;
}

// Separable box sum of a double field with reflect padding.
void box_sum(const std::vector<double>& src, int h, int w, int radius,
             std::vector<double>& tmp, std::vector<double>& dst) {
  tmp.assign(src.size(), 0.0);
  dst.assign(src.size(), 0.0);
  for (int y = 0; y < h; ++y) {
    const double* row = src.data() + size_t(y) * w;
    double* out = tmp.data() + size_t(y) * w;
    for (int x = 0; x < w; ++x) {
      double acc = 0.0;
      for (int dx = -radius; dx <= radius; ++dx) acc += row[reflect(x + dx, w)];
      out[x] = acc;
    }
  }
  for (int y = 0; y < h; ++y) {
    double* out = dst.data() + size_t(y) * w;
    for (int dy = -radius; dy <= radius; ++dy) {
      const double* row = tmp.data() + size_t(reflect(y + dy, h)) * w;
      for (int x = 0; x < w; ++x) out[x] += row[x];
    }
  }
}

}  // namespace

void MetricThresholds::validate() const {
  const auto pos = [](double v, const char* what) {
    if (!(std::isfinite(v) && v > 0.0))
      throw DataError(std::string(what) + " must be positive");
  };
  pos(tau_edit, "tau_edit");
  pos(tau_iat, "tau_iat");
  pos(psnr_cap, "psnr_cap");
  pos(ssim_c1, "ssim_c1");
  pos(ssim_c2, "ssim_c2");
  if (ssim_window < 3 || ssim_window % 2 == 0)
    throw DataError("ssim_window must be an odd size of at least 3");
}

double psnr_db(const Image& a, const Image& b, double cap) {
  if (!same_shape(a, b) || a.size() == 0)
    throw DataError("psnr needs two non-empty images of one shape");
  return psnr_from_mse(mse_of(a.data(), b.data(), a.size()), cap);
}

double psnr_db(const Volume& a, const Volume& b, double cap) {
  if (a.depth != b.depth || a.height != b.height || a.width != b.width ||
      a.voxel_count() == 0)
    throw DataError("psnr needs two non-empty volumes of one shape");
  return psnr_from_mse(mse_of(a.voxels.data(), b.voxels.data(), a.voxel_count()),
                       cap);
}

double ssim_masked(const Image& a, const Image& b, const uint8_t* mask,
                   int window, double c1, double c2) {
  if (!same_shape(a, b)) throw DataError("ssim needs images of one shape");
  if (window < 3 || window % 2 == 0)
    throw DataError("ssim window must be odd and at least 3");
  const int h = a.height, w = a.width, radius = window / 2;
  if (h <= radius || w <= radius)
    throw DataError("image too small for the ssim window");

  const size_t n = a.size();
  std::vector<double> fa(n), fb(n), faa(n), fbb(n), fab(n);
  for (size_t i = 0; i < n; ++i) {
    const double x = a.pix[i], y = b.pix[i];
    fa[i] = x;
    fb[i] = y;
    faa[i] = x * x;
    fbb[i] = y * y;
    fab[i] = x * y;
  }
  std::vector<double> tmp, sa, sb, saa, sbb, sab;
  box_sum(fa, h, w, radius, tmp, sa);
  box_sum(fb, h, w, radius, tmp, sb);
  box_sum(faa, h, w, radius, tmp, saa);
  box_sum(fbb, h, w, radius, tmp, sbb);
  box_sum(fab, h, w, radius, tmp, sab);

  const double inv_win = 1.0 / (double(window) * double(window));
  double acc = 0.0;
  uint64_t count = 0;
  for (size_t i = 0; i < n; ++i) {
    if (!mask[i]) continue;
    const double mx = sa[i] * inv_win;
    const double my = sb[i] * inv_win;
    const double vx = saa[i] * inv_win - mx * mx;
    const double vy = sbb[i] * inv_win - my * my;
    const double cv = sab[i] * inv_win - mx * my;
    const double val = ((2.0 * mx * my + c1) * (2.0 * cv + c2)) /
                       ((mx * mx + my * my + c1) * (vx + vy + c2));
    acc += val;
    ++count;
  }
  if (count == 0) throw DataError("ssim mask selects no pixels");
  return acc / double(count);
}

double target_gain(const Image& restored, const Image& degraded,
                   const Image& clean, const uint8_t* target, int window,
                   double c1, double c2) {
  return ssim_masked(restored, clean, target, window, c1, c2) -
         ssim_masked(degraded, clean, target, window, c1, c2);
}

std::vector<uint8_t> meaningful_edit_mask(const Image& restored,
                                          const Image& input,
                                          double tau_edit) {
  if (!same_shape(restored, input))
    throw DataError("edit mask needs images of one shape");
  std::vector<uint8_t> out(restored.size());
  for (size_t i = 0; i < out.size(); ++i) {
    const double d = std::abs(double(restored.pix[i]) - double(input.pix[i]));
    out[i] = d > tau_edit ? 1 : 0;
  }
  return out;
}

Footprint modification_footprint(const Image& restored, const Image& input,
                                 double tau_edit) {
  if (!same_shape(restored, input) || restored.size() == 0)
    throw DataError("footprint needs two non-empty images of one shape");
  Footprint f;
  for (size_t i = 0; i < restored.size(); ++i) {
    const double d = std::abs(double(restored.pix[i]) - double(input.pix[i]));
    f.max_abs = std::max(f.max_abs, d);
    if (d > tau_edit) ++f.count;
  }
  f.fraction = double(f.count) / double(restored.size());
  return f;
}

double segmentation_share(const std::vector<uint8_t>& edits,
                          const std::vector<uint8_t>& region,
                          size_t image_pixels) {
  if (edits.size() != region.size() || image_pixels == 0)
    throw DataError("segmentation share needs matching masks over a real image");
  uint64_t hit = 0;
  for (size_t i = 0; i < edits.size(); ++i)
    if (edits[i] && region[i]) ++hit;
  return double(hit) / double(image_pixels);
}

std::array<uint64_t, kRegionCount> edit_counts_by_region(
    const std::vector<uint8_t>& edits, const uint8_t* labels) {
  std::array<uint64_t, kRegionCount> counts{};
  for (size_t i = 0; i < edits.size(); ++i) {
    if (!edits[i]) continue;
    const uint8_t code = labels[i];
    if (code >= kRegionCount)
      throw DataError("label code out of range: " + std::to_string(code));
    ++counts[code];
  }
  return counts;
}

CaseMetrics case_metrics_for_volume(const Volume& restored,
                                    const Volume& degraded, const Volume& clean,
                                    const MaskVolume& target,
                                    const MetricThresholds& th) {
  th.validate();
  const bool shapes_ok =
      restored.depth == degraded.depth && restored.depth == clean.depth &&
      restored.depth == target.depth && restored.height == degraded.height &&
      restored.height == clean.height && restored.height == target.height &&
      restored.width == degraded.width && restored.width == clean.width &&
      restored.width == target.width;
  if (!shapes_ok || restored.voxel_count() == 0)
    throw DataError("case metrics need four aligned non-empty volumes");

  CaseMetrics out;
  int evaluated = 0;
  double psnr_acc = 0.0, gain_acc = 0.0, frac_acc = 0.0;
  for (int z = 0; z < restored.depth; ++z) {
    if (target.slice_count_on(z) == 0) continue;
    ++evaluated;
    const Image rs = restored.slice(z);
    const Image ds = degraded.slice(z);
    const Image cs = clean.slice(z);
    psnr_acc += psnr_db(rs, cs, th.psnr_cap);
    gain_acc += target_gain(rs, ds, cs, target.slice_data(z), th.ssim_window,
                            th.ssim_c1, th.ssim_c2);
    const Footprint f = modification_footprint(rs, ds, th.tau_edit);
    out.footprint_max = std::max(out.footprint_max, f.max_abs);
    frac_acc += f.fraction;
    out.meaningful_edit_count += f.count;
  }
  if (evaluated == 0)
    throw DataError("no slice carries target pixels; nothing to evaluate");
  out.psnr_db = psnr_acc / evaluated;
  out.target_gain = gain_acc / evaluated;
  out.footprint_fraction = frac_acc / evaluated;
  out.iatrogenic = out.target_gain < -th.tau_iat;
  return out;
}

std::string metrics_csv(const std::vector<CaseMetrics>& rows) {
  std::string out =
      "case_id,seed,method,psnr_db,target_gain,footprint_max,"
      "footprint_fraction,meaningful_edit_count,iatrogenic\n";
  for (const CaseMetrics& r : rows) {
    out += r.case_id;
    out += ',';
    out += std::to_string(r.seed);
    out += ',';
    out += r.method;
    out += ',';
    out += format_double(r.psnr_db);
    out += ',';
    out += format_double(r.target_gain);
    out += ',';
    out += format_double(r.footprint_max);
    out += ',';
    out += format_double(r.footprint_fraction);
    out += ',';
    out += std::to_string(r.meaningful_edit_count);
    out += ',';
    out += r.iatrogenic ? '1' : '0';
    out += '\n';
  }
  return out;
}

}  // namespace resbound
