#include "json.hpp"

#include "t2d/inference.hpp"

namespace t2d {

std::string to_string(SchemeKind kind) {
  switch (kind) {
    case SchemeKind::Slice2d: return "slice2d";
    case SchemeKind::Thick2d: return "thick2d";
    case SchemeKind::Patch3d: return "patch3d";
  }
  return "?";
}

SchemeKind parse_scheme_kind(const std::string& s) {
  if (s == "slice2d") return SchemeKind::Slice2d;
  if (s == "thick2d") return SchemeKind::Thick2d;
  if (s == "patch3d") return SchemeKind::Patch3d;
  throw std::invalid_argument("unknown window scheme \"" + s + "\" (expected slice2d|thick2d|patch3d)");
}

std::string CostReport::to_json() const {
  nlohmann::ordered_json j;
  j["scheme"] = scheme;
  j["windows"] = windows;
  j["macs_per_window"] = macs_per_window;
  j["total_macs"] = total_macs;
  j["wall_ms"] = wall_ms ? nlohmann::ordered_json(*wall_ms) : nlohmann::ordered_json(nullptr);
  return j.dump();
}

CostReport CostReport::from_json(const std::string& text) {
  const auto j = nlohmann::json::parse(text);
  CostReport r;
  r.scheme = j.at("scheme").get<std::string>();
  r.windows = j.at("windows").get<std::uint64_t>();
  r.macs_per_window = j.at("macs_per_window").get<std::uint64_t>();
  r.total_macs = j.at("total_macs").get<std::uint64_t>();
  if (j.contains("wall_ms") && !j.at("wall_ms").is_null()) r.wall_ms = j.at("wall_ms").get<double>();
  return r;
}

std::vector<int> window_starts(int extent, int patch, int stride) {
  if (stride < 1) throw std::invalid_argument("window stride must be >= 1");
  if (patch < 1 || patch > extent) {
    throw std::invalid_argument("patch extent " + std::to_string(patch) + " does not fit volume extent " +
                                std::to_string(extent));
  }
  std::vector<int> starts;
  for (int s = 0; s + patch <= extent; s += stride) starts.push_back(s);
  if (starts.back() + patch < extent) starts.push_back(extent - patch);
  return starts;
}

CostReport count_windows(const Dims& dims, const WindowScheme& scheme) {
  CostReport r;
  r.scheme = to_string(scheme.kind);
  switch (scheme.kind) {
    case SchemeKind::Slice2d:
      r.windows = static_cast<std::uint64_t>(dims.extent(scheme.axis));
      break;
    case SchemeKind::Thick2d: {
      const int n = dims.extent(scheme.axis);
      if (scheme.k < 1 || scheme.k > n) {
        throw std::invalid_argument("thick2d: k=" + std::to_string(scheme.k) + " does not fit extent " +
                                    std::to_string(n));
      }
      r.windows = static_cast<std::uint64_t>(n - scheme.k + 1);
      break;
    }
    case SchemeKind::Patch3d: {
      const std::array<int, 3> ext{dims.h, dims.w, dims.d};
      r.windows = 1;
      for (int a = 0; a < 3; ++a) r.windows *= window_starts(ext[a], scheme.patch[a], scheme.stride[a]).size();
      break;
    }
  }
  return r;
}

std::uint64_t network_macs(const ModelConfig& cfg, int size) {
  ModelConfig c = cfg;
  c.input_size = size;
  std::uint64_t total = 0;
  for (const auto& l : T2DNet::build(c).layer_costs(size)) total += l.macs();
  return total;
}

std::uint64_t patch3d_macs(const ModelConfig& cfg, const std::array<int, 3>& patch) {
  ModelConfig c = cfg;
  c.fusion_mode = FusionMode::Plain;
  c.k = 1;
  c.g = 1;
  c.input_size = 4;
  c.ssa_pool_size = 1;
  std::uint64_t total = 0;
  for (const auto& l : T2DNet::build(c).layer_costs(c.input_size)) {
    std::uint64_t voxels = 1;
    for (int e : patch) voxels *= static_cast<std::uint64_t>((e + l.downsample - 1) / l.downsample);
    total += static_cast<std::uint64_t>(l.cin) * l.cout * l.kernel * l.kernel * l.kernel * voxels;
  }
  return total;
}

CostReport estimate_cost(const Dims& dims, const WindowScheme& scheme, const ModelConfig& cfg) {
  CostReport r = count_windows(dims, scheme);
  if (scheme.kind == SchemeKind::Patch3d) {
    r.macs_per_window = patch3d_macs(cfg, scheme.patch);
  } else {
    auto [rows, cols] = slice_extent(dims, scheme.axis);
    const int size = (std::max(rows, cols) + 3) / 4 * 4;
    ModelConfig c = cfg;
    if (scheme.kind == SchemeKind::Slice2d) {
      c.fusion_mode = FusionMode::Plain;
      c.k = 1;
    } else {
      c.k = scheme.k;
    }
    c.ssa_pool_size = std::min(c.ssa_pool_size, size / 4);
    r.macs_per_window = network_macs(c, size);
  }
  r.total_macs = r.windows * r.macs_per_window;
  return r;
}

}  // namespace t2d
