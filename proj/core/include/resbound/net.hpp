#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "resbound/errors.hpp"
#include "resbound/image_ops.hpp"

namespace resbound {

// Channel-major activation tensor: planes are row-major and contiguous.
template <typename T>
struct TensorT {
  int channels = 0;
  int height = 0;
  int width = 0;
  std::vector<T> v;

  TensorT() = default;
  TensorT(int c, int h, int w)
      : channels(c), height(h), width(w), v(size_t(c) * h * w, T(0)) {}

  size_t plane_size() const { return size_t(height) * width; }
  T* plane(int c) { return v.data() + size_t(c) * plane_size(); }
  const T* plane(int c) const { return v.data() + size_t(c) * plane_size(); }
  T& at(int c, int y, int x) {
    return v[(size_t(c) * height + y) * width + x];
  }
  const T& at(int c, int y, int x) const {
    return v[(size_t(c) * height + y) * width + x];
  }
};

// One-pixel reflect pad (no edge duplication), all channels.
template <typename T>
void pad_reflect_1(const TensorT<T>& in, TensorT<T>& out) {
  const int h = in.height, w = in.width;
  if (h < 2 || w < 2) throw DataError("reflect padding needs height, width >= 2");
  out.channels = in.channels;
  out.height = h + 2;
  out.width = w + 2;
  out.v.resize(size_t(in.channels) * (h + 2) * (w + 2));
  for (int c = 0; c < in.channels; ++c) {
    const T* src = in.plane(c);
    T* dst = out.plane(c);
    for (int py = 0; py < h + 2; ++py) {
      const int sy = ops::reflect_index(py - 1, h);
      const T* srow = src + size_t(sy) * w;
      T* drow = dst + size_t(py) * (w + 2);
      std::copy(srow, srow + w, drow + 1);
      drow[0] = srow[1];
      drow[w + 1] = srow[w - 2];
    }
  }
}

// Scatter a padded-coordinate gradient back to source pixels: every padded
// cell adds into the pixel it mirrored from.
template <typename T>
void fold_padded_grad(const TensorT<T>& d_padded, TensorT<T>& d_in) {
  const int h = d_in.height, w = d_in.width;
  for (int c = 0; c < d_in.channels; ++c) {
    const T* src = d_padded.plane(c);
    T* dst = d_in.plane(c);
    for (int py = 0; py < h + 2; ++py) {
      const int sy = ops::reflect_index(py - 1, h);
      const T* srow = src + size_t(py) * (w + 2);
      T* drow = dst + size_t(sy) * w;
      for (int px = 0; px < w + 2; ++px) {
        drow[ops::reflect_index(px - 1, w)] += srow[px];
      }
    }
  }
}

// 3x3 convolution, stride 1. Forward consumes a pre-padded input.
template <typename T>
struct ConvLayerT {
  int in_ch = 0;
  int out_ch = 0;
  std::vector<T> w;  // out_ch * in_ch * 9, kernel row-major
  std::vector<T> b;  // out_ch

  ConvLayerT() = default;
  ConvLayerT(int ic, int oc)
      : in_ch(ic), out_ch(oc), w(size_t(oc) * ic * 9, T(0)), b(size_t(oc), T(0)) {}

  size_t param_count() const { return w.size() + b.size(); }

  void forward(const TensorT<T>& in_padded, TensorT<T>& out) const {
    if (in_padded.channels != in_ch) throw DataError("conv input channel mismatch");
    const int h = in_padded.height - 2, wd = in_padded.width - 2;
    const int pw = in_padded.width;
    out.channels = out_ch;
    out.height = h;
    out.width = wd;
    out.v.resize(size_t(out_ch) * h * wd);
    for (int oc = 0; oc < out_ch; ++oc) {
      T* op = out.plane(oc);
      std::fill(op, op + out.plane_size(), b[size_t(oc)]);
      for (int ic = 0; ic < in_ch; ++ic) {
        const T* ip = in_padded.plane(ic);
        const T* wk = w.data() + (size_t(oc) * in_ch + ic) * 9;
        for (int ky = 0; ky < 3; ++ky) {
          const T w0 = wk[ky * 3], w1 = wk[ky * 3 + 1], w2 = wk[ky * 3 + 2];
          for (int y = 0; y < h; ++y) {
            const T* row = ip + size_t(y + ky) * pw;
            T* orow = op + size_t(y) * wd;
            for (int x = 0; x < wd; ++x) {
              orow[x] += w0 * row[x] + w1 * row[x + 1] + w2 * row[x + 2];
            }
          }
        }
      }
    }
  }

  // Lane-array dot product with a fixed summation order, written so the
  // compiler can vectorize without reassociating a single serial chain.
  static T shifted_dot(const T* a, const T* b, int n) {
    T lanes[8] = {};
    int i = 0;
    for (; i + 8 <= n; i += 8) {
      for (int j = 0; j < 8; ++j) lanes[j] += a[i + j] * b[i + j];
    }
    T t = T(0);
    for (; i < n; ++i) t += a[i] * b[i];
    for (int j = 0; j < 8; ++j) t += lanes[j];
    return t;
  }

  // Accumulates parameter gradients and the padded-coordinate input gradient.
  // dw/db must be pre-sized like w/b; d_in_padded like in_padded; all +=.
  // The tap loops are split so no pass carries a write-to-read dependence.
  void backward(const TensorT<T>& in_padded, const TensorT<T>& d_out,
                TensorT<T>& d_in_padded, std::vector<T>& dw,
                std::vector<T>& db) const {
    const int h = d_out.height, wd = d_out.width;
    const int pw = in_padded.width;
    for (int oc = 0; oc < out_ch; ++oc) {
      const T* dop = d_out.plane(oc);
      {
        T lanes[8] = {};
        size_t i = 0;
        const size_t n = d_out.plane_size();
        for (; i + 8 <= n; i += 8) {
          for (int j = 0; j < 8; ++j) lanes[j] += dop[i + j];
        }
        T acc = T(0);
        for (; i < n; ++i) acc += dop[i];
        for (int j = 0; j < 8; ++j) acc += lanes[j];
        db[size_t(oc)] += acc;
      }
      for (int ic = 0; ic < in_ch; ++ic) {
        const T* ip = in_padded.plane(ic);
        T* dip = d_in_padded.plane(ic);
        const T* wk = w.data() + (size_t(oc) * in_ch + ic) * 9;
        T* dwk = dw.data() + (size_t(oc) * in_ch + ic) * 9;
        for (int ky = 0; ky < 3; ++ky) {
          const T w0 = wk[ky * 3], w1 = wk[ky * 3 + 1], w2 = wk[ky * 3 + 2];
          T g0 = T(0), g1 = T(0), g2 = T(0);
          for (int y = 0; y < h; ++y) {
            const T* row = ip + size_t(y + ky) * pw;
            T* drow = dip + size_t(y + ky) * pw;
            const T* dorow = dop + size_t(y) * wd;
            g0 += shifted_dot(dorow, row, wd);
            g1 += shifted_dot(dorow, row + 1, wd);
            g2 += shifted_dot(dorow, row + 2, wd);
            for (int x = 0; x < wd; ++x) drow[x] += w0 * dorow[x];
            for (int x = 0; x < wd; ++x) drow[x + 1] += w1 * dorow[x];
            for (int x = 0; x < wd; ++x) drow[x + 2] += w2 * dorow[x];
          }
          dwk[ky * 3] += g0;
          dwk[ky * 3 + 1] += g1;
          dwk[ky * 3 + 2] += g2;
        }
      }
    }
  }

  template <typename U>
  ConvLayerT<U> cast() const {
    ConvLayerT<U> out(in_ch, out_ch);
    for (size_t i = 0; i < w.size(); ++i) out.w[i] = U(w[i]);
    for (size_t i = 0; i < b.size(); ++i) out.b[i] = U(b[i]);
    return out;
  }
};

namespace act {

template <typename T>
inline T relu(T x) {
  return x > T(0) ? x : T(0);
}

template <typename T>
inline T logistic(T x) {
  if (x >= T(0)) return T(1) / (T(1) + std::exp(-x));
  const T e = std::exp(x);
  return e / (T(1) + e);
}

template <typename T>
inline T softplus(T x) {
  if (x > T(0)) return x + std::log1p(std::exp(-x));
  return std::log1p(std::exp(x));
}

}  // namespace act

// Trunk of 3x3 convs with ReLU, then three 1-channel heads. The production
// shape is 3->16->32->32->16; reduced shapes exist for derivative checking.
template <typename T>
struct NetT {
  static constexpr std::array<int, 5> kChannels{3, 16, 32, 32, 16};

  std::vector<ConvLayerT<T>> trunk;
  ConvLayerT<T> head_r;
  ConvLayerT<T> head_m;
  ConvLayerT<T> head_u;

  static NetT make() {
    return make_custom({kChannels.begin(), kChannels.end()});
  }

  // channels = {in, width..., feature}; heads always map feature -> 1.
  static NetT make_custom(const std::vector<int>& channels) {
    if (channels.size() < 2) throw DataError("net needs at least one trunk layer");
    NetT n;
    for (size_t i = 0; i + 1 < channels.size(); ++i) {
      n.trunk.emplace_back(channels[i], channels[i + 1]);
    }
    n.head_r = ConvLayerT<T>(channels.back(), 1);
    n.head_m = ConvLayerT<T>(channels.back(), 1);
    n.head_u = ConvLayerT<T>(channels.back(), 1);
    return n;
  }

  std::vector<int> channel_chain() const {
    std::vector<int> c;
    if (trunk.empty()) return c;
    c.push_back(trunk.front().in_ch);
    for (const auto& l : trunk) c.push_back(l.out_ch);
    return c;
  }

  size_t param_count() const {
    size_t n = 0;
    for (const auto& l : trunk) n += l.param_count();
    return n + head_r.param_count() + head_m.param_count() + head_u.param_count();
  }

  // Visits every layer in serialization order with a stable name.
  template <typename F>
  void for_each_layer(F&& f) {
    for (size_t i = 0; i < trunk.size(); ++i) {
      f("trunk" + std::to_string(i), trunk[i]);
    }
    f(std::string("head_r"), head_r);
    f(std::string("head_m"), head_m);
    f(std::string("head_u"), head_u);
  }
  template <typename F>
  void for_each_layer(F&& f) const {
    for (size_t i = 0; i < trunk.size(); ++i) {
      f("trunk" + std::to_string(i), trunk[i]);
    }
    f(std::string("head_r"), head_r);
    f(std::string("head_m"), head_m);
    f(std::string("head_u"), head_u);
  }

  template <typename U>
  NetT<U> cast() const {
    NetT<U> out;
    out.trunk.reserve(trunk.size());
    for (const auto& l : trunk) out.trunk.push_back(l.template cast<U>());
    out.head_r = head_r.template cast<U>();
    out.head_m = head_m.template cast<U>();
    out.head_u = head_u.template cast<U>();
    return out;
  }

  void validate() const {
    if (trunk.empty() || trunk.front().in_ch != 3) {
      throw DataError("net trunk must start at 3 input channels");
    }
    for (size_t i = 0; i + 1 < trunk.size(); ++i) {
      if (trunk[i].out_ch != trunk[i + 1].in_ch) {
        throw DataError("trunk layer " + std::to_string(i + 1) +
                        " does not chain from its predecessor");
      }
    }
    for (const ConvLayerT<T>* head : {&head_r, &head_m, &head_u}) {
      if (head->in_ch != trunk.back().out_ch || head->out_ch != 1) {
        throw DataError("head layer has wrong shape");
      }
    }
    for_each_layer([](const std::string& name, const ConvLayerT<T>& l) {
      for (T x : l.w) {
        if (!std::isfinite(double(x))) throw DataError("non-finite weight in " + name);
      }
      for (T x : l.b) {
        if (!std::isfinite(double(x))) throw DataError("non-finite bias in " + name);
      }
    });
  }
};

// Per-sample activation cache kept by the training pass; inference leaves it
// null and uses scratch storage.
template <typename T>
struct NetActivations {
  std::vector<TensorT<T>> padded_in;  // reflect-padded input of each trunk layer
  std::vector<TensorT<T>> pre;        // pre-ReLU trunk outputs
  TensorT<T> features_padded;         // padded post-ReLU features for the heads
};

// Runs trunk + heads; writes the three 1-channel head pre-activations.
template <typename T>
void net_forward(const NetT<T>& net, const TensorT<T>& input, TensorT<T>& r_pre,
                 TensorT<T>& m_pre, TensorT<T>& u_pre,
                 NetActivations<T>* cache = nullptr) {
  if (net.trunk.empty() || input.channels != net.trunk.front().in_ch) {
    throw DataError("net input channel count mismatch");
  }
  NetActivations<T> scratch;
  NetActivations<T>& a = cache ? *cache : scratch;
  a.padded_in.resize(net.trunk.size());
  a.pre.resize(net.trunk.size());

  TensorT<T> cur = input;
  for (size_t i = 0; i < net.trunk.size(); ++i) {
    pad_reflect_1(cur, a.padded_in[i]);
    net.trunk[i].forward(a.padded_in[i], a.pre[i]);
    cur = a.pre[i];
    for (T& x : cur.v) x = act::relu(x);
  }
  pad_reflect_1(cur, a.features_padded);
  net.head_r.forward(a.features_padded, r_pre);
  net.head_m.forward(a.features_padded, m_pre);
  net.head_u.forward(a.features_padded, u_pre);
}

}  // namespace resbound
