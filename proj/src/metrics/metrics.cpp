#include "t2d/metrics.hpp"

#include <cmath>
#include <cstdio>
#include <limits>
#include <sstream>

namespace t2d {

namespace {

void require_binary(const Volume& v, const char* what) {
  for (Real x : v.voxels()) {
    if (x != 0 && x != 1) {
      throw std::invalid_argument(std::string(what) + ": mask holds non-binary value " + std::to_string(x));
    }
  }
}

double dice_counts(std::size_t inter, std::size_t a, std::size_t b) {
  if (a + b == 0) return 1.0;
  return 2.0 * static_cast<double>(inter) / static_cast<double>(a + b);
}

}  // namespace

double dsc(const Volume& y, const Volume& z) {
  if (!(y.dims() == z.dims())) throw std::invalid_argument("dsc: volume dims differ");
  require_binary(y, "dsc");
  require_binary(z, "dsc");
  std::size_t inter = 0, ny = 0, nz = 0;
  for (std::size_t i = 0; i < y.voxels().size(); ++i) {
    const bool a = y.voxels()[i] != 0, b = z.voxels()[i] != 0;
    inter += a && b;
    ny += a;
    nz += b;
  }
  return dice_counts(inter, ny, nz);
}

std::vector<double> inter_slice_profile(const Volume& mask, Axis axis) {
  require_binary(mask, "inter_slice_profile");
  const int n = mask.dims().extent(axis);
  if (n < 2) throw std::invalid_argument("inter_slice_profile: need at least 2 slices, got " + std::to_string(n));
  std::vector<double> out;
  out.reserve(n - 1);
  Slice2D prev = slice(mask, axis, 1);
  for (int s = 2; s <= n; ++s) {
    Slice2D cur = slice(mask, axis, s);
    std::size_t inter = 0, a = 0, b = 0;
    for (std::size_t i = 0; i < cur.values.size(); ++i) {
      const bool p = prev.values[i] != 0, c = cur.values[i] != 0;
      inter += p && c;
      a += p;
      b += c;
    }
    out.push_back(dice_counts(inter, a, b));
    prev = std::move(cur);
  }
  return out;
}

double profile_distance(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() != b.size()) throw std::invalid_argument("profile_distance: profile lengths differ");
  double s = 0;
  for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
  return std::sqrt(s);
}

double inter_slice_similarity(const Volume& pred, const Volume& gt, Axis axis) {
  if (!(pred.dims() == gt.dims())) throw std::invalid_argument("inter_slice_similarity: volume dims differ");
  return profile_distance(inter_slice_profile(pred, axis), inter_slice_profile(gt, axis));
}

double inter_slice_similarity_normalized(const Volume& pred, const Volume& gt, Axis axis) {
  return inter_slice_similarity(pred, gt, axis) / std::sqrt(static_cast<double>(pred.dims().extent(axis) - 1));
}

EvalRow EvalReport::summary() const {
  EvalRow s;
  s.volume = "summary";
  double EvalRow::*cols[] = {&EvalRow::dsc_c, &EvalRow::dsc_s, &EvalRow::dsc_a,
                             &EvalRow::dsc_f, &EvalRow::similarity, &EvalRow::similarity_normalized};
  for (auto col : cols) {
    double sum = 0;
    int n = 0;
    for (const auto& r : rows) {
      if (std::isnan(r.*col)) continue;
      sum += r.*col;
      ++n;
    }
    s.*col = n ? sum / n : std::numeric_limits<double>::quiet_NaN();
  }
  for (const auto& r : rows) {
    s.windows += r.windows;
    s.total_macs += r.total_macs;
  }
  return s;
}

namespace {

constexpr const char* kHeader =
    "volume,dsc_c,dsc_s,dsc_a,dsc_f,similarity,similarity_normalized,windows,total_macs";

std::string csv_line(const EvalRow& r) {
  char buf[512];
  std::snprintf(buf, sizeof buf, "%s,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%llu,%llu", r.volume.c_str(),
                r.dsc_c, r.dsc_s, r.dsc_a, r.dsc_f, r.similarity, r.similarity_normalized,
                static_cast<unsigned long long>(r.windows), static_cast<unsigned long long>(r.total_macs));
  return buf;
}

}  // namespace

std::string EvalReport::to_csv() const {
  std::string out = std::string(kHeader) + "\n";
  for (const auto& r : rows) {
    if (r.volume.find_first_of(",\n") != std::string::npos) {
      throw std::invalid_argument("volume name \"" + r.volume + "\" cannot be written to CSV");
    }
    out += csv_line(r) + "\n";
  }
  out += csv_line(summary()) + "\n";
  return out;
}

EvalReport EvalReport::from_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line) || line != kHeader) throw std::invalid_argument("eval report: unexpected header");
  EvalReport rep;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<std::string> f;
    std::stringstream ss(line);
    for (std::string cell; std::getline(ss, cell, ',');) f.push_back(cell);
    if (f.size() != 9) throw std::invalid_argument("eval report: malformed line \"" + line + "\"");
    if (f[0] == "summary") continue;
    EvalRow r;
    r.volume = f[0];
    double* reals[] = {&r.dsc_c, &r.dsc_s, &r.dsc_a, &r.dsc_f, &r.similarity, &r.similarity_normalized};
    for (int i = 0; i < 6; ++i) *reals[i] = std::strtod(f[1 + i].c_str(), nullptr);
    r.windows = std::strtoull(f[7].c_str(), nullptr, 10);
    r.total_macs = std::strtoull(f[8].c_str(), nullptr, 10);
    rep.rows.push_back(r);
  }
  return rep;
}

}  // namespace t2d
