#pragma once

#include <cmath>
#include <cstddef>
#include <vector>

#include "resbound/errors.hpp"
#include "resbound/loss.hpp"
#include "resbound/model.hpp"
#include "resbound/net.hpp"

namespace resbound {

template <typename T>
struct TrainSample {
  TensorT<T> input;      // prev/center/next window, 3 channels
  std::vector<T> clean;  // target plane, height * width
};

// Parameter blocks in serialization order, for optimizers that walk a net and
// its gradient holder in lockstep.
template <typename T>
inline std::vector<std::vector<T>*> param_blocks(NetT<T>& n) {
  std::vector<std::vector<T>*> out;
  n.for_each_layer([&](const std::string&, ConvLayerT<T>& l) {
    out.push_back(&l.w);
    out.push_back(&l.b);
  });
  return out;
}

template <typename T>
inline std::vector<const std::vector<T>*> param_blocks(const NetT<T>& n) {
  std::vector<const std::vector<T>*> out;
  n.for_each_layer([&](const std::string&, const ConvLayerT<T>& l) {
    out.push_back(&l.w);
    out.push_back(&l.b);
  });
  return out;
}

template <typename T>
inline void zero_params(NetT<T>& n) {
  for (auto* blk : param_blocks(n))
    for (T& x : *blk) x = T(0);
}

template <typename T>
inline void scale_params(NetT<T>& n, T s) {
  for (auto* blk : param_blocks(n))
    for (T& x : *blk) x *= s;
}

namespace detail {

template <typename T>
inline T sgn(T v) {
  return v > T(0) ? T(1) : (v < T(0) ? T(-1) : T(0));
}

}  // namespace detail

// Loss of one sample; when grads is non-null the gradient of that loss is
// accumulated into it (+=, caller zeroes). Terms and their weighted total use
// the same formulas as loss_total, so a float forward here matches the
// inference-path breakdown.
template <typename T>
LossBreakdown sample_loss_grad(const NetT<T>& net, const TensorT<T>& input,
                               const std::vector<T>& clean,
                               const LossWeights& lw, NetT<T>* grads = nullptr) {
  lw.validate();
  NetActivations<T> cache;
  TensorT<T> r_pre, m_pre, u_pre;
  net_forward(net, input, r_pre, m_pre, u_pre, grads ? &cache : nullptr);

  const int h = input.height, wd = input.width;
  const size_t n = size_t(h) * wd;
  if (clean.size() != n) throw DataError("training target has wrong pixel count");
  const double inv_n = 1.0 / double(n);
  const T* x_c = input.plane(1);

  // Head nonlinearities and the composed prediction, kept for the chain rule.
  std::vector<T> th(n), r(n), m(n), u(n), e(n), pre(n), yhat(n);
  for (size_t i = 0; i < n; ++i) {
    th[i] = std::tanh(r_pre.v[i]);
    r[i] = T(kResidualBound) * th[i];
    m[i] = act::logistic(m_pre.v[i]);
    u[i] = act::softplus(u_pre.v[i]);
    e[i] = m[i] * r[i];
    pre[i] = x_c[i] + e[i];
    yhat[i] = std::clamp(pre[i], T(0), T(1));
  }

  LossBreakdown b;
  {
    double acc = 0.0;
    for (size_t i = 0; i < n; ++i) acc += std::abs(double(yhat[i]) - double(clean[i]));
    b.restore = acc * inv_n;
  }
  double gate;
  {
    double mse = 0.0;
    for (size_t i = 0; i < n; ++i) {
      const double d = double(x_c[i]) - double(clean[i]);
      mse += d * d;
    }
    gate = std::exp(-(mse * inv_n) / kIdentityGateTheta);
    double acc = 0.0;
    for (size_t i = 0; i < n; ++i) acc += double(e[i]) * double(e[i]);
    b.identity = gate * acc * inv_n;
  }
  {
    double acc = 0.0;
    for (size_t i = 0; i < n; ++i) acc += std::abs(double(e[i]));
    b.edit = acc * inv_n;
  }
  {
    double acc = 0.0;
    for (int y = 0; y < h; ++y)
      for (int x = 0; x + 1 < wd; ++x)
        acc += std::abs(double(m[size_t(y) * wd + x + 1]) - double(m[size_t(y) * wd + x]));
    for (int y = 0; y + 1 < h; ++y)
      for (int x = 0; x < wd; ++x)
        acc += std::abs(double(m[size_t(y + 1) * wd + x]) - double(m[size_t(y) * wd + x]));
    b.smooth = acc * inv_n;
  }
  {
    double acc = 0.0;
    for (size_t i = 0; i < n; ++i) {
      const double d = double(yhat[i]) - double(clean[i]);
      acc += std::exp(-double(u[i])) * d * d + double(u[i]);
    }
    b.uncertainty = acc * inv_n;
  }
  for (double v : {b.restore, b.identity, b.edit, b.smooth, b.uncertainty}) {
    if (!std::isfinite(v)) throw NumericError("non-finite loss term in training pass");
  }
  b.total = lw.restore * b.restore + lw.identity * b.identity + lw.edit * b.edit +
            lw.smooth * b.smooth + lw.uncertainty * b.uncertainty;
  if (!std::isfinite(b.total)) throw NumericError("non-finite total loss in training pass");
  if (!grads) return b;

  const T a_res = T(lw.restore * inv_n);
  const T a_idn = T(lw.identity * gate * 2.0 * inv_n);
  const T a_edt = T(lw.edit * inv_n);
  const T a_smo = T(lw.smooth * inv_n);
  const T a_unc = T(lw.uncertainty * inv_n);

  std::vector<T> d_r_pre(n), d_m_pre(n), d_u_pre(n);
  for (size_t i = 0; i < n; ++i) {
    const T diff = yhat[i] - clean[i];
    const T eu = std::exp(-u[i]);
    T d_yhat = a_res * detail::sgn(diff) + a_unc * eu * T(2) * diff;
    // clamp passes gradient only strictly inside (0, 1)
    const T d_pre = (pre[i] > T(0) && pre[i] < T(1)) ? d_yhat : T(0);
    const T d_e = d_pre + a_idn * e[i] + a_edt * detail::sgn(e[i]);
    const T d_m = d_e * r[i];
    const T d_r = d_e * m[i];
    const T d_u = a_unc * (T(1) - eu * diff * diff);
    d_r_pre[i] = d_r * T(kResidualBound) * (T(1) - th[i] * th[i]);
    d_m_pre[i] = d_m * m[i] * (T(1) - m[i]);
    d_u_pre[i] = d_u * act::logistic(u_pre.v[i]);
  }
  // total-variation smoothness feeds the edit map directly
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x + 1 < wd; ++x) {
      const size_t i = size_t(y) * wd + x;
      const T s = a_smo * detail::sgn(m[i + 1] - m[i]);
      d_m_pre[i + 1] += s * m[i + 1] * (T(1) - m[i + 1]);
      d_m_pre[i] -= s * m[i] * (T(1) - m[i]);
    }
  }
  for (int y = 0; y + 1 < h; ++y) {
    for (int x = 0; x < wd; ++x) {
      const size_t i = size_t(y) * wd + x;
      const size_t j = i + size_t(wd);
      const T s = a_smo * detail::sgn(m[j] - m[i]);
      d_m_pre[j] += s * m[j] * (T(1) - m[j]);
      d_m_pre[i] -= s * m[i] * (T(1) - m[i]);
    }
  }

  TensorT<T> d_head(1, h, wd);
  TensorT<T> d_feat_padded(cache.features_padded.channels, h + 2, wd + 2);
  d_head.v = d_r_pre;
  net.head_r.backward(cache.features_padded, d_head, d_feat_padded,
                      grads->head_r.w, grads->head_r.b);
  d_head.v = d_m_pre;
  net.head_m.backward(cache.features_padded, d_head, d_feat_padded,
                      grads->head_m.w, grads->head_m.b);
  d_head.v = d_u_pre;
  net.head_u.backward(cache.features_padded, d_head, d_feat_padded,
                      grads->head_u.w, grads->head_u.b);

  TensorT<T> d_act(cache.features_padded.channels, h, wd);
  fold_padded_grad(d_feat_padded, d_act);
  for (size_t li = net.trunk.size(); li-- > 0;) {
    // d_act holds the gradient at relu(pre[li]); gate it by the sign of pre.
    for (size_t i = 0; i < d_act.v.size(); ++i) {
      if (!(cache.pre[li].v[i] > T(0))) d_act.v[i] = T(0);
    }
    TensorT<T> d_in_padded(cache.padded_in[li].channels, h + 2, wd + 2);
    net.trunk[li].backward(cache.padded_in[li], d_act, d_in_padded,
                           grads->trunk[li].w, grads->trunk[li].b);
    if (li == 0) break;
    d_act = TensorT<T>(cache.padded_in[li].channels, h, wd);
    fold_padded_grad(d_in_padded, d_act);
  }
  return b;
}

template <typename T>
struct BatchGradients {
  LossBreakdown loss;  // per-term batch means
  NetT<T> grads;       // gradient of the mean total loss
};

template <typename T>
BatchGradients<T> batch_gradients(const NetT<T>& net,
                                  const std::vector<TrainSample<T>>& batch,
                                  const LossWeights& lw) {
  if (batch.empty()) throw DataError("gradient step over an empty batch");
  BatchGradients<T> out;
  out.grads = NetT<T>::make_custom(net.channel_chain());
  double restore = 0, identity = 0, edit = 0, smooth = 0, uncertainty = 0;
  for (const auto& s : batch) {
    const LossBreakdown b = sample_loss_grad(net, s.input, s.clean, lw, &out.grads);
    restore += b.restore;
    identity += b.identity;
    edit += b.edit;
    smooth += b.smooth;
    uncertainty += b.uncertainty;
  }
  const double inv_b = 1.0 / double(batch.size());
  out.loss.restore = restore * inv_b;
  out.loss.identity = identity * inv_b;
  out.loss.edit = edit * inv_b;
  out.loss.smooth = smooth * inv_b;
  out.loss.uncertainty = uncertainty * inv_b;
  out.loss.total = lw.restore * out.loss.restore + lw.identity * out.loss.identity +
                   lw.edit * out.loss.edit + lw.smooth * out.loss.smooth +
                   lw.uncertainty * out.loss.uncertainty;
  scale_params(out.grads, T(inv_b));
  return out;
}

}  // namespace resbound
