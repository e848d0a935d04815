#include "resbound/model.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <map>

#include <nlohmann/json.hpp>

#include "resbound/errors.hpp"
#include "resbound/parallel.hpp"
#include "resbound/rng.hpp"
#include "resbound/version.hpp"

using nlohmann::json;

namespace resbound {

namespace {

TensorT<float> triplet_tensor(const SliceTriplet& t) {
  if (!same_shape(t.prev, t.center) || !same_shape(t.next, t.center)) {
    throw DataError("slice triplet planes disagree in shape");
  }
  TensorT<float> in(3, t.center.height, t.center.width);
  std::copy(t.prev.pix.begin(), t.prev.pix.end(), in.plane(0));
  std::copy(t.center.pix.begin(), t.center.pix.end(), in.plane(1));
  std::copy(t.next.pix.begin(), t.next.pix.end(), in.plane(2));
  return in;
}

}  // namespace

RestorationOutput forward(const SliceTriplet& t, const ModelParams& p) {
  const TensorT<float> input = triplet_tensor(t);
  TensorT<float> r_pre, m_pre, u_pre;
  net_forward(p, input, r_pre, m_pre, u_pre);

  const int h = t.center.height, w = t.center.width;
  RestorationOutput out;
  out.residual = Image(h, w);
  out.edit_map = Image(h, w);
  out.uncertainty = Image(h, w);
  out.applied_edit = Image(h, w);
  out.restored = Image(h, w);
  const float bound = float(kResidualBound);
  for (size_t i = 0; i < out.restored.size(); ++i) {
    const float r = bound * std::tanh(r_pre.v[i]);
    const float m = act::logistic(m_pre.v[i]);
    const float u = act::softplus(u_pre.v[i]);
    const float edit = m * r;
    out.residual.pix[i] = r;
    out.edit_map.pix[i] = m;
    out.uncertainty.pix[i] = u;
    out.applied_edit.pix[i] = edit;
    out.restored.pix[i] = std::clamp(t.center.pix[i] + edit, 0.0f, 1.0f);
  }
  return out;
}

Image compose(const Image& x_c, const Image& r, const Image& m) {
  if (!same_shape(x_c, r) || !same_shape(x_c, m)) {
    throw DataError("compose arguments disagree in shape");
  }
  Image out(x_c.height, x_c.width);
  for (size_t i = 0; i < out.size(); ++i) {
    out.pix[i] = std::clamp(x_c.pix[i] + m.pix[i] * r.pix[i], 0.0f, 1.0f);
  }
  return out;
}

Volume restore_volume(const Volume& v, const ModelParams& p,
                      RestorationMaps* maps) {
  p.validate();
  Volume out(v.depth, v.height, v.width);
  out.spacing = v.spacing;
  if (maps) {
    maps->residual = Volume(v.depth, v.height, v.width);
    maps->edit_map = Volume(v.depth, v.height, v.width);
    maps->uncertainty = Volume(v.depth, v.height, v.width);
    maps->applied_edit = Volume(v.depth, v.height, v.width);
  }
  parallel_for(size_t(v.depth), [&](size_t z) {
    const RestorationOutput r = forward(slice_triplet(v, int(z)), p);
    out.set_slice(int(z), r.restored);
    if (maps) {
      maps->residual.set_slice(int(z), r.residual);
      maps->edit_map.set_slice(int(z), r.edit_map);
      maps->uncertainty.set_slice(int(z), r.uncertainty);
      maps->applied_edit.set_slice(int(z), r.applied_edit);
    }
  });
  return out;
}

namespace {

std::string strip_ckpt_suffix(const std::string& path) {
  if (path.size() > 5 && path.ends_with(".json")) return path.substr(0, path.size() - 5);
  if (path.size() > 4 && path.ends_with(".raw")) return path.substr(0, path.size() - 4);
  return path;
}

}  // namespace

void save_checkpoint(const ModelParams& p, const CheckpointMeta& meta,
                     const std::string& path) {
  p.validate();
  const std::string base = strip_ckpt_suffix(path);

  json tensors = json::array();
  std::vector<float> blob;
  blob.reserve(p.param_count());
  p.for_each_layer(
      [&](const std::string& name, const ConvLayerT<float>& l) {
        json wt;
        wt["name"] = name + ".weight";
        wt["shape"] = {l.out_ch, l.in_ch, 3, 3};
        wt["offset"] = blob.size();
        wt["count"] = l.w.size();
        tensors.push_back(wt);
        blob.insert(blob.end(), l.w.begin(), l.w.end());
        json bt;
        bt["name"] = name + ".bias";
        bt["shape"] = {l.out_ch};
        bt["offset"] = blob.size();
        bt["count"] = l.b.size();
        tensors.push_back(bt);
        blob.insert(blob.end(), l.b.begin(), l.b.end());
      });

  json j;
  j["arch"]["channels"] = p.channel_chain();
  j["arch"]["activation"] = "relu";
  j["arch"]["kernel"] = 3;
  j["arch"]["residual_bound"] = kResidualBound;
  j["param_count"] = p.param_count();
  j["tensors"] = tensors;
  j["tool_version"] = meta.tool_version.empty() ? kToolVersion : meta.tool_version;
  j["rng"] = meta.rng_name.empty() ? std::string(rng::kGeneratorName) : meta.rng_name;
  j["train_case_ids"] = meta.train_case_ids;
  if (!meta.train_config_text.empty()) {
    try {
      j["train_config"] = json::parse(meta.train_config_text);
    } catch (const json::exception& e) {
      throw DataError(std::string("train config is not valid JSON: ") + e.what());
    }
  }

  const std::string text = j.dump(2) + "\n";
  std::ofstream hdr(base + ".json", std::ios::binary | std::ios::trunc);
  if (!hdr) throw DataError("cannot write checkpoint header: " + base + ".json");
  hdr << text;
  hdr.flush();
  if (!hdr) throw DataError("write failed: " + base + ".json");

  std::ofstream raw(base + ".raw", std::ios::binary | std::ios::trunc);
  if (!raw) throw DataError("cannot write checkpoint blob: " + base + ".raw");
  raw.write(reinterpret_cast<const char*>(blob.data()),
            std::streamsize(blob.size() * sizeof(float)));
  raw.flush();
  if (!raw) throw DataError("write failed: " + base + ".raw");
}

Checkpoint load_checkpoint(const std::string& path) {
  const std::string base = strip_ckpt_suffix(path);
  std::ifstream hdr(base + ".json");
  if (!hdr) throw DataError("cannot open checkpoint header: " + base + ".json");
  json j;
  try {
    hdr >> j;
  } catch (const json::exception& e) {
    throw DataError("malformed checkpoint header " + base + ".json: " + e.what());
  }

  Checkpoint ck;
  ck.params = ModelParams::make();
  try {
    const auto channels = j.at("arch").at("channels").get<std::vector<int>>();
    const std::vector<int> expect(NetT<float>::kChannels.begin(),
                                  NetT<float>::kChannels.end());
    if (channels != expect) {
      throw DataError("checkpoint architecture does not match this build");
    }
    if (j.at("param_count").get<size_t>() != ck.params.param_count()) {
      throw DataError("checkpoint parameter count mismatch");
    }
    ck.meta.tool_version = j.value("tool_version", "");
    ck.meta.rng_name = j.value("rng", "");
    ck.meta.train_case_ids = j.value("train_case_ids", std::vector<std::string>{});
    if (j.contains("train_config")) {
      ck.meta.train_config_text = j.at("train_config").dump();
    }

    std::ifstream raw(base + ".raw", std::ios::binary);
    if (!raw) throw DataError("cannot open checkpoint blob: " + base + ".raw");
    raw.seekg(0, std::ios::end);
    const size_t bytes = size_t(raw.tellg());
    if (bytes != ck.params.param_count() * sizeof(float)) {
      throw DataError("checkpoint blob size mismatch for " + base + ".raw");
    }
    raw.seekg(0, std::ios::beg);
    std::vector<float> blob(ck.params.param_count());
    raw.read(reinterpret_cast<char*>(blob.data()), std::streamsize(bytes));
    if (!raw) throw DataError("short read on " + base + ".raw");

    // index tensors by name, then fill each layer
    std::map<std::string, std::pair<size_t, size_t>> index;  // name -> offset, count
    for (const json& t : j.at("tensors")) {
      index[t.at("name").get<std::string>()] = {t.at("offset").get<size_t>(),
                                                t.at("count").get<size_t>()};
    }
    auto fetch = [&](const std::string& name, std::vector<float>& dst) {
      const auto it = index.find(name);
      if (it == index.end()) throw DataError("checkpoint missing tensor " + name);
      const auto [offset, count] = it->second;
      if (count != dst.size() || offset + count > blob.size()) {
        throw DataError("checkpoint tensor " + name + " has wrong extent");
      }
      std::copy(blob.begin() + long(offset), blob.begin() + long(offset + count),
                dst.begin());
    };
    ck.params.for_each_layer([&](const std::string& name, ConvLayerT<float>& l) {
      fetch(name + ".weight", l.w);
      fetch(name + ".bias", l.b);
    });
  } catch (const json::exception& e) {
    throw DataError("malformed checkpoint header " + base + ".json: " + e.what());
  }
  ck.params.validate();
  return ck;
}

}  // namespace resbound
