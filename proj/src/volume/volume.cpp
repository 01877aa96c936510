#include "t2d/volume.hpp"

#include <algorithm>
#include <cmath>

namespace t2d {

std::string to_string(Axis axis) {
  switch (axis) {
    case Axis::Coronal: return "coronal";
    case Axis::Sagittal: return "sagittal";
    case Axis::Axial: return "axial";
  }
  return "?";
}

Axis parse_axis(const std::string& s) {
  if (s == "coronal" || s == "C" || s == "c") return Axis::Coronal;
  if (s == "sagittal" || s == "S" || s == "s") return Axis::Sagittal;
  if (s == "axial" || s == "A" || s == "a") return Axis::Axial;
  throw std::invalid_argument("unknown axis \"" + s + "\" (expected coronal|sagittal|axial)");
}

std::string to_string(VolumeKind kind) {
  switch (kind) {
    case VolumeKind::Intensity: return "intensity";
    case VolumeKind::Probability: return "probability";
    case VolumeKind::Mask: return "mask";
  }
  return "?";
}

int Dims::extent(Axis axis) const {
  switch (axis) {
    case Axis::Coronal: return h;
    case Axis::Sagittal: return w;
    case Axis::Axial: return d;
  }
  return 0;
}

Volume::Volume(Dims dims, VolumeKind kind) : Volume(dims, kind, std::vector<Real>(dims.voxels(), 0)) {}

Volume::Volume(Dims dims, VolumeKind kind, std::vector<Real> voxels)
    : dims_(dims), kind_(kind), voxels_(std::move(voxels)) {
  if (dims.h <= 0 || dims.w <= 0 || dims.d <= 0) {
    throw std::invalid_argument("volume dims must be positive, got " + std::to_string(dims.h) + "x" +
                                std::to_string(dims.w) + "x" + std::to_string(dims.d));
  }
  if (voxels_.size() != dims.voxels()) {
    throw std::invalid_argument("volume has " + std::to_string(voxels_.size()) + " voxels, dims need " +
                                std::to_string(dims.voxels()));
  }
}

void Volume::validate() const {
  for (std::size_t i = 0; i < voxels_.size(); ++i) {
    const Real v = voxels_[i];
    bool ok = std::isfinite(v);
    if (kind_ == VolumeKind::Probability) ok = ok && v >= 0 && v <= 1;
    if (kind_ == VolumeKind::Mask) ok = v == 0 || v == 1;
    if (!ok) {
      throw std::invalid_argument(to_string(kind_) + " volume has invalid voxel " + std::to_string(v) +
                                  " at linear index " + std::to_string(i));
    }
  }
}

std::pair<int, int> slice_extent(const Dims& dims, Axis axis) {
  switch (axis) {
    case Axis::Coronal: return {dims.w, dims.d};
    case Axis::Sagittal: return {dims.h, dims.d};
    case Axis::Axial: return {dims.h, dims.w};
  }
  return {0, 0};
}

namespace {

void check_index(const Dims& dims, Axis axis, int index) {
  const int n = dims.extent(axis);
  if (index < 1 || index > n) {
    throw RangeError(to_string(axis) + " slice index " + std::to_string(index) + " outside [1, " +
                     std::to_string(n) + "]");
  }
}

// Linear voxel index of in-slice (r, c) on 0-based slice i.
inline std::size_t voxel_of(const Volume& v, Axis axis, int i, int r, int c) {
  switch (axis) {
    case Axis::Coronal: return v.index(i, r, c);
    case Axis::Sagittal: return v.index(r, i, c);
    case Axis::Axial: break;
  }
  return v.index(r, c, i);
}

}  // namespace

Slice2D slice(const Volume& vol, Axis axis, int index) {
  check_index(vol.dims(), axis, index);
  auto [rows, cols] = slice_extent(vol.dims(), axis);
  Slice2D s{rows, cols, std::vector<Real>(static_cast<std::size_t>(rows) * cols)};
  const auto& vx = vol.voxels();
  for (int r = 0; r < rows; ++r)
    for (int c = 0; c < cols; ++c)
      s.values[static_cast<std::size_t>(r) * cols + c] = vx[voxel_of(vol, axis, index - 1, r, c)];
  return s;
}

void put_slice(Volume& vol, Axis axis, int index, const Slice2D& s) {
  check_index(vol.dims(), axis, index);
  auto [rows, cols] = slice_extent(vol.dims(), axis);
  if (s.rows != rows || s.cols != cols) {
    throw std::invalid_argument("put_slice: slice is " + std::to_string(s.rows) + "x" +
                                std::to_string(s.cols) + ", volume expects " + std::to_string(rows) +
                                "x" + std::to_string(cols));
  }
  auto& vx = vol.voxels();
  for (int r = 0; r < rows; ++r)
    for (int c = 0; c < cols; ++c) vx[voxel_of(vol, axis, index - 1, r, c)] = s.at(r, c);
}

Slice2D SliceGroup::channel(int c) const {
  const std::size_t plane = static_cast<std::size_t>(rows) * cols;
  return Slice2D{rows, cols,
                 std::vector<Real>(values.begin() + c * plane, values.begin() + (c + 1) * plane)};
}

SliceGroup extract_group(const Volume& vol, Axis axis, int start, int k) {
  const int n = vol.dims().extent(axis);
  if (k < 1) throw std::invalid_argument("group thickness must be >= 1");
  if (n < k) {
    throw RangeError(to_string(axis) + " extent " + std::to_string(n) + " is thinner than k=" +
                     std::to_string(k));
  }
  if (start < 1 || start + k - 1 > n) {
    throw RangeError("group [" + std::to_string(start) + ", " + std::to_string(start + k - 1) +
                     "] exceeds " + to_string(axis) + " extent " + std::to_string(n));
  }
  auto [rows, cols] = slice_extent(vol.dims(), axis);
  SliceGroup g{axis, start, k, rows, cols, {}};
  g.values.resize(static_cast<std::size_t>(k) * rows * cols);
  const auto& vx = vol.voxels();
  for (int ch = 0; ch < k; ++ch) {
    Real* dst = g.values.data() + static_cast<std::size_t>(ch) * rows * cols;
    for (int r = 0; r < rows; ++r)
      for (int c = 0; c < cols; ++c)
        dst[static_cast<std::size_t>(r) * cols + c] = vx[voxel_of(vol, axis, start - 1 + ch, r, c)];
  }
  return g;
}

int coverage_count(int s, int extent, int k) {
  const int last = extent - k + 1;
  if (last < 1 || s < 1 || s > extent) return 0;
  return std::max(0, std::min(s, last) - std::max(1, s - k + 1) + 1);
}

Volume regroup(const std::vector<GroupPrediction>& groups, Axis axis, Dims dims, int k) {
  const int n = dims.extent(axis);
  auto [rows, cols] = slice_extent(dims, axis);
  const std::size_t plane = static_cast<std::size_t>(rows) * cols;
  std::vector<Real> acc(static_cast<std::size_t>(n) * plane, 0);
  std::vector<int> count(n, 0);
  for (const auto& g : groups) {
    if (g.start < 1 || g.start + k - 1 > n) {
      throw RangeError("regroup: group at " + std::to_string(g.start) + " exceeds extent " +
                       std::to_string(n));
    }
    if (g.values.size() != static_cast<std::size_t>(k) * plane) {
      throw std::invalid_argument("regroup: group at " + std::to_string(g.start) + " holds " +
                                  std::to_string(g.values.size()) + " values, expected " +
                                  std::to_string(k * plane));
    }
    for (int ch = 0; ch < k; ++ch) {
      const int s = g.start - 1 + ch;
      ++count[s];
      Real* dst = acc.data() + s * plane;
      const Real* src = g.values.data() + ch * plane;
      for (std::size_t i = 0; i < plane; ++i) dst[i] += src[i];
    }
  }
  Volume out(dims, VolumeKind::Probability);
  auto& vx = out.voxels();
  for (int s = 0; s < n; ++s) {
    if (count[s] == 0) {
      throw RangeError("regroup: " + to_string(axis) + " slice " + std::to_string(s + 1) +
                       " is covered by no group");
    }
    const Real div = static_cast<Real>(count[s]);
    const Real* src = acc.data() + s * plane;
    for (int r = 0; r < rows; ++r)
      for (int c = 0; c < cols; ++c) {
        const Real v = src[static_cast<std::size_t>(r) * cols + c] / div;
        vx[voxel_of(out, axis, s, r, c)] = std::clamp(v, Real(0), Real(1));
      }
  }
  return out;
}

PadCrop::PadCrop(int rows, int cols, int size) : rows_(rows), cols_(cols), size_(size) {
  if (rows <= 0 || cols <= 0 || size <= 0) throw std::invalid_argument("PadCrop: non-positive extent");
  auto offset = [size](int n) { return size >= n ? (size - n) / 2 : -((n - size) / 2); };
  off_r_ = offset(rows);
  off_c_ = offset(cols);
}

std::vector<Real> PadCrop::apply(const std::vector<Real>& planes, int channels) const {
  const std::size_t src_plane = static_cast<std::size_t>(rows_) * cols_;
  const std::size_t dst_plane = static_cast<std::size_t>(size_) * size_;
  if (planes.size() != src_plane * channels) throw std::invalid_argument("PadCrop::apply: size mismatch");
  std::vector<Real> out(dst_plane * channels, 0);
  const int r0 = std::max(0, off_r_), r1 = std::min(size_, rows_ + off_r_);
  const int c0 = std::max(0, off_c_), c1 = std::min(size_, cols_ + off_c_);
  for (int ch = 0; ch < channels; ++ch)
    for (int r = r0; r < r1; ++r)
      for (int c = c0; c < c1; ++c)
        out[ch * dst_plane + static_cast<std::size_t>(r) * size_ + c] =
            planes[ch * src_plane + static_cast<std::size_t>(r - off_r_) * cols_ + (c - off_c_)];
  return out;
}

std::vector<Real> PadCrop::invert(std::span<const Real> planes, int channels, Real fill) const {
  const std::size_t src_plane = static_cast<std::size_t>(rows_) * cols_;
  const std::size_t dst_plane = static_cast<std::size_t>(size_) * size_;
  if (planes.size() != dst_plane * channels) throw std::invalid_argument("PadCrop::invert: size mismatch");
  std::vector<Real> out(src_plane * channels, fill);
  for (int ch = 0; ch < channels; ++ch)
    for (int r = 0; r < rows_; ++r)
      for (int c = 0; c < cols_; ++c) {
        auto [tr, tc] = to_target(r, c);
        if (tr < 0 || tr >= size_ || tc < 0 || tc >= size_) continue;
        out[ch * src_plane + static_cast<std::size_t>(r) * cols_ + c] =
            planes[ch * dst_plane + static_cast<std::size_t>(tr) * size_ + tc];
      }
  return out;
}

Slice2D pad_or_crop(const Slice2D& s, int size) {
  PadCrop pc(s.rows, s.cols, size);
  return Slice2D{size, size, pc.apply(s.values, 1)};
}

}  // namespace t2d
