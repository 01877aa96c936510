#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "t2d/kv_config.hpp"
#include "t2d/volume.hpp"

namespace t2d {

enum class PhantomFamily { TubeTree, Blob };
std::string to_string(PhantomFamily f);
PhantomFamily parse_phantom_family(const std::string& s);

struct PhantomConfig {
  Dims dims{64, 64, 64};
  PhantomFamily family = PhantomFamily::TubeTree;
  double radius_min = 1.5, radius_max = 3.0;
  /// Root tubes per volume and levels of child branches below each root.
  int branches = 3;
  int depth = 2;
  double fg_mean = 1.0, bg_mean = 0.0;
  double noise_sigma = 0.35;
  /// Expected single-slice distractor disks per axial slice.
  double distractor_density = 1.0;
  /// Contrast gaps along tubes: expected gap starts per centerline voxel,
  /// gap length range in centerline voxels, and the fraction of the
  /// foreground contrast left inside a gap. Labels are unaffected.
  double gap_rate = 0.0;
  int gap_length_min = 3, gap_length_max = 6;
  double gap_contrast = 0.15;
  std::uint64_t seed = 0;

  void validate() const;
  void to_kv(KvConfig& kv, const std::string& prefix = "phantom.") const;
  static PhantomConfig from_kv(const KvConfig& kv, const std::string& prefix = "phantom.");
};

using Voxel = std::array<int, 3>;  // (h, w, d)

struct Phantom {
  Volume image;
  Volume mask;
  /// Voxels painted as distractors (never foreground).
  Volume distractors;
  /// Foreground voxels whose contrast was reduced by a gap.
  Volume gaps;
  /// Rasterized centerline of every tube, consecutive voxels 26-adjacent.
  std::vector<std::vector<Voxel>> centerlines;
};

class PhantomError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Deterministic in cfg (seed included). Draws whose foreground fraction
/// falls outside (0, 0.5) or whose tubes barely enter the volume are
/// redrawn a bounded number of times before PhantomError.
Phantom generate(const PhantomConfig& cfg);

struct DatasetEntry {
  std::string name;
  std::uint64_t seed = 0;
  PhantomFamily family = PhantomFamily::TubeTree;
  bool train = true;
  friend bool operator==(const DatasetEntry&, const DatasetEntry&) = default;
};

/// Seeds cfg.seed + 0 .. n−1; the first round(n·train_fraction) go to the
/// training split (each split keeps at least one volume).
std::vector<DatasetEntry> make_dataset(int n, const PhantomConfig& cfg, double train_fraction);

/// Writes <name>.image.t2dv and <name>.mask.t2dv per entry plus manifest.tsv.
void write_dataset(const std::filesystem::path& dir, const std::vector<DatasetEntry>& entries,
                   const PhantomConfig& cfg, int threads = 1);
std::string manifest_text(const std::vector<DatasetEntry>& entries);
std::vector<DatasetEntry> parse_manifest(const std::string& text);

std::filesystem::path image_path(const std::filesystem::path& dir, const std::string& name);
std::filesystem::path mask_path(const std::filesystem::path& dir, const std::string& name);

}  // namespace t2d
