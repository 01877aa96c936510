#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>

#include "t2d/model.hpp"
#include "t2d/volume.hpp"

namespace t2d {

/// Maps one k-slice group to k probability planes of the same extent.
using GroupPredictor = std::function<std::vector<Real>(const SliceGroup&)>;

/// Worker count from T2D_THREADS (default 1, at least 1).
int thread_count();

/// Runs every stride-1 group along `axis` and averages the overlaps.
/// Groups are spread over `threads` workers; the merge order is fixed.
Volume predict_axis(const GroupPredictor& predict, const Volume& vol, Axis axis, int k, int threads = 1);
/// Network variant: slices are padded or cropped to the input size and
/// predictions are mapped back before regrouping.
Volume predict_axis(const T2DNet& net, const Volume& vol, Axis axis, int threads = 1);

/// Voxelwise P ≥ threshold.
Volume binarize(const Volume& p, Real threshold = Real(0.5));
/// Foreground where at least two of the three masks agree.
Volume fuse_views(const Volume& zc, const Volume& zs, const Volume& za);
/// Mean of the three probability volumes (experimental alternative to voting).
Volume fuse_mean(const Volume& pc, const Volume& ps, const Volume& pa);

enum class SchemeKind { Slice2d, Thick2d, Patch3d };
std::string to_string(SchemeKind kind);
SchemeKind parse_scheme_kind(const std::string& s);

struct WindowScheme {
  SchemeKind kind = SchemeKind::Thick2d;
  /// Patch extent along (H, W, D); used by patch3d only.
  std::array<int, 3> patch{128, 128, 64};
  std::array<int, 3> stride{32, 32, 16};
  /// Slice thickness (thick2d) and slicing axis (2D schemes).
  int k = 15;
  Axis axis = Axis::Axial;
};

struct CostReport {
  std::string scheme;
  std::uint64_t windows = 0;
  std::uint64_t macs_per_window = 0;
  std::uint64_t total_macs = 0;
  std::optional<double> wall_ms;

  std::string to_json() const;
  static CostReport from_json(const std::string& text);
  friend bool operator==(const CostReport&, const CostReport&) = default;
};

/// Window start positions along one axis: multiples of the stride, plus a
/// final window flush with the end when the stride does not land there.
std::vector<int> window_starts(int extent, int patch, int stride);

/// Window count of a scheme; macs_per_window is filled in by the caller or
/// by estimate_cost.
CostReport count_windows(const Dims& dims, const WindowScheme& scheme);

/// MACs of one forward of the configured network on an S×S input.
std::uint64_t network_macs(const ModelConfig& cfg, int size);
/// MACs of a volumetric analog of the single-channel plain network on one
/// patch: every k×k kernel becomes k×k×k over a three-axis grid.
std::uint64_t patch3d_macs(const ModelConfig& cfg, const std::array<int, 3>& patch);

/// count_windows plus the analytic per-window cost. 2D schemes run on
/// slices padded to the larger in-plane extent; slice2d uses the plain
/// network with k = 1, thick2d the configured one with k = scheme.k.
CostReport estimate_cost(const Dims& dims, const WindowScheme& scheme, const ModelConfig& cfg);

}  // namespace t2d
