#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "t2d/volume.hpp"

namespace t2d {

/// 2|Y∩Z| / (|Y| + |Z|); two empty masks score 1.
double dsc(const Volume& y, const Volume& z);

/// Dice of each pair of neighboring slices along `axis` (length extent − 1).
/// A pair of empty slices scores 1.
std::vector<double> inter_slice_profile(const Volume& mask, Axis axis = Axis::Axial);

/// L2 distance between the profiles of prediction and ground truth.
double inter_slice_similarity(const Volume& pred, const Volume& gt, Axis axis = Axis::Axial);
/// The same distance divided by sqrt(extent − 1), comparable across depths.
double inter_slice_similarity_normalized(const Volume& pred, const Volume& gt, Axis axis = Axis::Axial);

double profile_distance(const std::vector<double>& a, const std::vector<double>& b);

/// One evaluated volume. View DSCs that were not predicted hold NaN.
struct EvalRow {
  std::string volume;
  double dsc_c = 0, dsc_s = 0, dsc_a = 0, dsc_f = 0;
  /// Inter-slice similarity of the fused mask, raw and per-pair normalized.
  double similarity = 0, similarity_normalized = 0;
  /// Network forward passes spent on this volume and their analytic MACs.
  std::uint64_t windows = 0, total_macs = 0;
  friend bool operator==(const EvalRow&, const EvalRow&) = default;
};

struct EvalReport {
  std::vector<EvalRow> rows;

  /// Row named "summary": means of the metric columns (NaN entries skipped)
  /// and sums of the cost columns.
  EvalRow summary() const;
  /// Header, one line per row, then the summary line. Reals use 17
  /// significant digits so parsing reproduces them exactly.
  std::string to_csv() const;
  /// Parses to_csv output; the summary line is recomputed, not stored.
  static EvalReport from_csv(const std::string& text);
};

}  // namespace t2d
