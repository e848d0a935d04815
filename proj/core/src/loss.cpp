#include "resbound/loss.hpp"

#include <cmath>
#include <string>

#include "resbound/errors.hpp"

namespace resbound {

void LossWeights::validate() const {
  const double all[] = {restore, identity, edit, smooth, uncertainty};
  for (double v : all) {
    if (!(v >= 0.0) || !std::isfinite(v))
      throw DataError("loss weights must be finite and non-negative");
  }
}

namespace {

void require_shape(const Image& a, const Image& b, const char* what) {
  if (!same_shape(a, b))
    throw DataError(std::string("loss input shape mismatch: ") + what);
}

void check_finite(double v, const char* term) {
  if (!std::isfinite(v))
    throw NumericError(std::string("loss term '") + term + "' is not finite");
}

}  // namespace

LossBreakdown loss_total(const RestorationOutput& out, const Image& x_c,
                         const Image& y_clean, const LossWeights& w) {
  w.validate();
  require_shape(out.restored, y_clean, "restored vs clean");
  require_shape(out.applied_edit, y_clean, "applied edit vs clean");
  require_shape(out.edit_map, y_clean, "edit map vs clean");
  require_shape(out.uncertainty, y_clean, "uncertainty vs clean");
  require_shape(x_c, y_clean, "input vs clean");
  if (y_clean.size() == 0) throw DataError("loss over an empty image");

  const size_t n = y_clean.size();
  const double inv_n = 1.0 / double(n);

  double restore = 0.0;
  for (size_t i = 0; i < n; ++i)
    restore += std::abs(double(out.restored.pix[i]) - double(y_clean.pix[i]));
  restore *= inv_n;

  // Gate shuts the penalty off as the input drifts away from the target, so
  // it only pins the model to identity on already-clean slices.
  double input_mse = 0.0;
  for (size_t i = 0; i < n; ++i) {
    const double d = double(x_c.pix[i]) - double(y_clean.pix[i]);
    input_mse += d * d;
  }
  input_mse *= inv_n;
  const double gate = std::exp(-input_mse / kIdentityGateTheta);
  double edit_sq = 0.0;
  for (size_t i = 0; i < n; ++i) {
    const double e = double(out.applied_edit.pix[i]);
    edit_sq += e * e;
  }
  const double identity = gate * edit_sq * inv_n;

  double edit = 0.0;
  for (size_t i = 0; i < n; ++i)
    edit += std::abs(double(out.applied_edit.pix[i]));
  edit *= inv_n;

  const Image& m = out.edit_map;
  double smooth = 0.0;
  for (int y = 0; y < m.height; ++y)
    for (int x = 0; x + 1 < m.width; ++x)
      smooth += std::abs(double(m.at(y, x + 1)) - double(m.at(y, x)));
  for (int y = 0; y + 1 < m.height; ++y)
    for (int x = 0; x < m.width; ++x)
      smooth += std::abs(double(m.at(y + 1, x)) - double(m.at(y, x)));
  smooth *= inv_n;

  double uncertainty = 0.0;
  for (size_t i = 0; i < n; ++i) {
    const double u = double(out.uncertainty.pix[i]);
    const double d = double(out.restored.pix[i]) - double(y_clean.pix[i]);
    uncertainty += std::exp(-u) * d * d + u;
  }
  uncertainty *= inv_n;

  LossBreakdown b;
  b.restore = restore;
  b.identity = identity;
  b.edit = edit;
  b.smooth = smooth;
  b.uncertainty = uncertainty;
  check_finite(b.restore, "restore");
  check_finite(b.identity, "identity");
  check_finite(b.edit, "edit");
  check_finite(b.smooth, "smooth");
  check_finite(b.uncertainty, "uncertainty");
  b.total = w.restore * b.restore + w.identity * b.identity + w.edit * b.edit +
            w.smooth * b.smooth + w.uncertainty * b.uncertainty;
  check_finite(b.total, "total");
  return b;
}

}  // namespace resbound
