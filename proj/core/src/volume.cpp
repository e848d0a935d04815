#include "resbound/volume.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>

#include <nlohmann/json.hpp>

#include "resbound/errors.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace resbound {

static_assert(std::endian::native == std::endian::little,
              "raw volume I/O assumes a little-endian host");

const char* region_name(uint8_t code) {
  switch (code) {
    case kRegionBackground: return "background";
    case kRegionSkull: return "skull";
    case kRegionBrain: return "brain";
    case kRegionVessel: return "vessel";
    case kRegionAneurysm: return "aneurysm";
    default: return "unknown";
  }
}

size_t clamp01(Image& img) {
  size_t clamped = 0;
  for (float& p : img.pix) {
    if (p < 0.0f) {
      p = 0.0f;
      ++clamped;
    } else if (p > 1.0f) {
      p = 1.0f;
      ++clamped;
    }
  }
  return clamped;
}

Image Volume::slice(int z) const {
  Image img(height, width);
  std::memcpy(img.data(), slice_data(z), slice_pixels() * sizeof(float));
  return img;
}

void Volume::set_slice(int z, const Image& img) {
  std::memcpy(slice_data(z), img.data(), slice_pixels() * sizeof(float));
}

size_t MaskVolume::slice_count_on(int z) const {
  const uint8_t* p = slice_data(z);
  return size_t(std::count(p, p + slice_pixels(), uint8_t(1)));
}

void validate_volume(const Volume& v) {
  if (v.depth < 1 || v.height < 8 || v.width < 8) {
    throw DataError("volume dimensions out of range: depth=" +
                    std::to_string(v.depth) + " height=" +
                    std::to_string(v.height) + " width=" +
                    std::to_string(v.width));
  }
  if (v.voxels.size() != size_t(v.depth) * v.slice_pixels()) {
    throw DataError("volume voxel buffer does not match its dimensions");
  }
  for (float x : v.voxels) {
    if (!std::isfinite(x)) throw DataError("volume contains non-finite voxels");
    if (x < 0.0f || x > 1.0f) throw DataError("volume voxel outside [0, 1]");
  }
}

SliceTriplet slice_triplet(const Volume& v, int index) {
  if (index < 0 || index >= v.depth) {
    throw DataError("slice index " + std::to_string(index) +
                    " out of range for depth " + std::to_string(v.depth));
  }
  SliceTriplet t;
  t.center_index = index;
  t.center = v.slice(index);
  t.prev = (index > 0) ? v.slice(index - 1) : t.center;
  t.next = (index + 1 < v.depth) ? v.slice(index + 1) : t.center;
  return t;
}

namespace {

std::string strip_volume_suffix(const std::string& path) {
  if (path.size() > 5 && path.ends_with(".json")) return path.substr(0, path.size() - 5);
  if (path.size() > 4 && path.ends_with(".raw")) return path.substr(0, path.size() - 4);
  return path;
}

json read_header(const std::string& base) {
  std::ifstream in(base + ".json");
  if (!in) throw DataError("cannot open volume header: " + base + ".json");
  json h;
  try {
    in >> h;
  } catch (const json::exception& e) {
    throw DataError("malformed volume header " + base + ".json: " + e.what());
  }
  return h;
}

void read_raw(const std::string& base, void* dst, size_t bytes) {
  const std::string raw_path = base + ".raw";
  std::ifstream in(raw_path, std::ios::binary);
  if (!in) throw DataError("cannot open raw payload: " + raw_path);
  in.seekg(0, std::ios::end);
  const auto actual = size_t(in.tellg());
  if (actual != bytes) {
    throw DataError("raw payload size mismatch for " + raw_path + ": header implies " +
                    std::to_string(bytes) + " bytes, file has " + std::to_string(actual));
  }
  in.seekg(0, std::ios::beg);
  in.read(static_cast<char*>(dst), std::streamsize(bytes));
  if (!in) throw DataError("short read on " + raw_path);
}

void write_file(const std::string& path, const void* data, size_t bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot open for writing: " + path);
  out.write(static_cast<const char*>(data), std::streamsize(bytes));
  out.flush();
  if (!out) throw DataError("write failed: " + path);
}

struct HeaderDims {
  int depth = 0, height = 0, width = 0;
  std::optional<std::array<double, 3>> spacing;
};

HeaderDims parse_dims(const json& h, const std::string& base,
                      const char* expected_dtype) {
  for (const char* key : {"depth", "height", "width", "dtype", "order"}) {
    if (!h.contains(key)) {
      throw DataError("volume header " + base + ".json missing field '" + key + "'");
    }
  }
  if (h.at("dtype").get<std::string>() != expected_dtype) {
    throw DataError("volume header " + base + ".json has dtype '" +
                    h.at("dtype").get<std::string>() + "', expected '" +
                    expected_dtype + "'");
  }
  if (h.at("order").get<std::string>() != "zyx-row-major") {
    throw DataError("unsupported voxel order in " + base + ".json");
  }
  HeaderDims d;
  d.depth = h.at("depth").get<int>();
  d.height = h.at("height").get<int>();
  d.width = h.at("width").get<int>();
  if (d.depth < 1 || d.height < 1 || d.width < 1) {
    throw DataError("non-positive dimensions in " + base + ".json");
  }
  if (h.contains("spacing")) {
    auto s = h.at("spacing").get<std::vector<double>>();
    if (s.size() != 3) throw DataError("spacing must have 3 entries in " + base + ".json");
    d.spacing = std::array<double, 3>{s[0], s[1], s[2]};
  }
  return d;
}

void write_header(const std::string& base, const HeaderDims& d,
                  const char* dtype, std::optional<uint64_t> clamp_count) {
  json h;
  h["depth"] = d.depth;
  h["height"] = d.height;
  h["width"] = d.width;
  h["dtype"] = dtype;
  h["order"] = "zyx-row-major";
  if (d.spacing) h["spacing"] = {(*d.spacing)[0], (*d.spacing)[1], (*d.spacing)[2]};
  if (clamp_count) h["clamp_count"] = *clamp_count;
  const std::string text = h.dump(2) + "\n";
  write_file(base + ".json", text.data(), text.size());
}

}  // namespace

Volume load_volume(const std::string& path, uint64_t* clamp_count) {
  const std::string base = strip_volume_suffix(path);
  const json h = read_header(base);
  const HeaderDims d = parse_dims(h, base, "f32");

  Volume v(d.depth, d.height, d.width);
  v.spacing = d.spacing;
  read_raw(base, v.voxels.data(), v.voxel_count() * sizeof(float));

  uint64_t clamped = 0;
  for (float& x : v.voxels) {
    if (!std::isfinite(x)) {
      throw DataError("non-finite voxel in " + base + ".raw");
    }
    if (x < 0.0f) {
      x = 0.0f;
      ++clamped;
    } else if (x > 1.0f) {
      x = 1.0f;
      ++clamped;
    }
  }
  if (clamp_count) *clamp_count = clamped;
  validate_volume(v);
  return v;
}

void save_volume(const Volume& v, const std::string& path,
                 std::optional<uint64_t> clamp_count) {
  validate_volume(v);
  const std::string base = strip_volume_suffix(path);
  HeaderDims d{v.depth, v.height, v.width, v.spacing};
  write_header(base, d, "f32", clamp_count);
  write_file(base + ".raw", v.voxels.data(), v.voxel_count() * sizeof(float));
}

void save_map_volume(const Volume& v, const std::string& path) {
  if (v.depth < 1 || v.height < 1 || v.width < 1)
    throw DataError("map volume has non-positive dimensions");
  if (v.voxels.size() != size_t(v.depth) * v.slice_pixels())
    throw DataError("map volume buffer does not match its dimensions");
  for (float x : v.voxels)
    if (!std::isfinite(x)) throw DataError("non-finite value in map volume");
  const std::string base = strip_volume_suffix(path);
  HeaderDims d{v.depth, v.height, v.width, v.spacing};
  write_header(base, d, "f32", std::nullopt);
  write_file(base + ".raw", v.voxels.data(), v.voxel_count() * sizeof(float));
}

Volume load_map_volume(const std::string& path) {
  const std::string base = strip_volume_suffix(path);
  const json h = read_header(base);
  const HeaderDims d = parse_dims(h, base, "f32");
  Volume v(d.depth, d.height, d.width);
  v.spacing = d.spacing;
  read_raw(base, v.voxels.data(), v.voxel_count() * sizeof(float));
  for (float x : v.voxels)
    if (!std::isfinite(x))
      throw DataError("non-finite value in " + base + ".raw");
  return v;
}

namespace {

template <typename M>
M load_u8(const std::string& path, uint8_t max_code, const char* what) {
  const std::string base = strip_volume_suffix(path);
  const json h = read_header(base);
  const HeaderDims d = parse_dims(h, base, "u8");
  M m(d.depth, d.height, d.width);
  auto& buf = [&]() -> std::vector<uint8_t>& {
    if constexpr (std::is_same_v<M, LabelMap>) return m.labels;
    else return m.on;
  }();
  read_raw(base, buf.data(), buf.size());
  for (uint8_t c : buf) {
    if (c > max_code) {
      throw DataError(std::string(what) + " " + base + ".raw contains code " +
                      std::to_string(int(c)) + " above " + std::to_string(int(max_code)));
    }
  }
  return m;
}

}  // namespace

LabelMap load_labels(const std::string& path) {
  return load_u8<LabelMap>(path, kRegionCount - 1, "label map");
}

void save_labels(const LabelMap& m, const std::string& path) {
  const std::string base = strip_volume_suffix(path);
  write_header(base, HeaderDims{m.depth, m.height, m.width, std::nullopt}, "u8",
               std::nullopt);
  write_file(base + ".raw", m.labels.data(), m.labels.size());
}

MaskVolume load_mask(const std::string& path) {
  return load_u8<MaskVolume>(path, 1, "mask");
}

void save_mask(const MaskVolume& m, const std::string& path) {
  const std::string base = strip_volume_suffix(path);
  write_header(base, HeaderDims{m.depth, m.height, m.width, std::nullopt}, "u8",
               std::nullopt);
  write_file(base + ".raw", m.on.data(), m.on.size());
}

}  // namespace resbound
