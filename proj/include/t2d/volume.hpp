#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "t2d/tensor.hpp"

namespace t2d {

enum class VolumeKind : std::uint8_t { Intensity = 0, Probability = 1, Mask = 2 };

/// Slicing direction. Coronal slices are indexed by h, sagittal by w, axial by d.
enum class Axis { Coronal, Sagittal, Axial };

constexpr std::array<Axis, 3> kAllAxes{Axis::Coronal, Axis::Sagittal, Axis::Axial};

std::string to_string(Axis axis);
Axis parse_axis(const std::string& s);
std::string to_string(VolumeKind kind);

class RangeError : public std::out_of_range {
 public:
  using std::out_of_range::out_of_range;
};

struct Dims {
  int h = 0, w = 0, d = 0;
  friend bool operator==(const Dims&, const Dims&) = default;
  std::size_t voxels() const { return static_cast<std::size_t>(h) * w * d; }
  int extent(Axis axis) const;
};

/// Row-major H×W×D grid with d outermost: index = (d·H + h)·W + w.
class Volume {
 public:
  Volume() = default;
  Volume(Dims dims, VolumeKind kind);
  Volume(Dims dims, VolumeKind kind, std::vector<Real> voxels);

  const Dims& dims() const { return dims_; }
  VolumeKind kind() const { return kind_; }
  std::size_t index(int h, int w, int d) const {
    return (static_cast<std::size_t>(d) * dims_.h + h) * dims_.w + w;
  }
  Real at(int h, int w, int d) const { return voxels_[index(h, w, d)]; }
  Real& at(int h, int w, int d) { return voxels_[index(h, w, d)]; }
  const std::vector<Real>& voxels() const { return voxels_; }
  std::vector<Real>& voxels() { return voxels_; }

  /// Checks the value-range invariant of the kind tag.
  void validate() const;

  friend bool operator==(const Volume&, const Volume&) = default;

 private:
  Dims dims_;
  VolumeKind kind_ = VolumeKind::Intensity;
  std::vector<Real> voxels_;
};

/// Cross-section perpendicular to an axis. Rows/cols are the two remaining
/// axes in (h, w, d) order: coronal → (w, d), sagittal → (h, d), axial → (h, w).
struct Slice2D {
  int rows = 0, cols = 0;
  std::vector<Real> values;
  Real at(int r, int c) const { return values[static_cast<std::size_t>(r) * cols + c]; }
  friend bool operator==(const Slice2D&, const Slice2D&) = default;
};

std::pair<int, int> slice_extent(const Dims& dims, Axis axis);

/// `index` is 1-based.
Slice2D slice(const Volume& vol, Axis axis, int index);
/// Writes a slice back; `index` is 1-based.
void put_slice(Volume& vol, Axis axis, int index, const Slice2D& s);

/// k consecutive slices starting at 1-based `start`, as k×rows×cols.
struct SliceGroup {
  Axis axis = Axis::Axial;
  int start = 1;
  int k = 1;
  int rows = 0, cols = 0;
  std::vector<Real> values;

  Slice2D channel(int c) const;
  Tensor tensor() const { return Tensor::from({k, rows, cols}, values); }
};

SliceGroup extract_group(const Volume& vol, Axis axis, int start, int k);

/// A set of k-slice inputs with matching labels.
struct SliceGroupBatch {
  Axis axis = Axis::Axial;
  int k = 1;
  std::vector<int> starts;
  std::vector<Tensor> data;
  std::vector<Tensor> labels;
};

struct GroupPrediction {
  int start = 1;  // 1-based
  std::vector<Real> values;  // k×rows×cols
};

/// Assembles overlapping group predictions into a probability volume,
/// averaging each slice over the groups that contain it.
Volume regroup(const std::vector<GroupPrediction>& groups, Axis axis, Dims dims, int k);

/// Number of stride-1 groups of thickness k covering 1-based slice s of an
/// extent-D axis.
int coverage_count(int s, int extent, int k);

/// Centered crop/zero-pad of rows×cols planes to size×size, with the
/// inverse mapping for predictions.
class PadCrop {
 public:
  PadCrop(int rows, int cols, int size);

  int size() const { return size_; }
  int rows() const { return rows_; }
  int cols() const { return cols_; }
  /// Target coordinate of source (r, c); may fall outside [0, size).
  std::pair<int, int> to_target(int r, int c) const { return {r + off_r_, c + off_c_}; }
  std::pair<int, int> to_source(int r, int c) const { return {r - off_r_, c - off_c_}; }

  /// Applies to each rows×cols plane of `planes` (channels·rows·cols values).
  std::vector<Real> apply(const std::vector<Real>& planes, int channels) const;
  /// Maps size×size planes back; source pixels cropped away get `fill`.
  std::vector<Real> invert(std::span<const Real> planes, int channels, Real fill = 0) const;

 private:
  int rows_, cols_, size_;
  int off_r_, off_c_;
};

Slice2D pad_or_crop(const Slice2D& s, int size);

}  // namespace t2d
