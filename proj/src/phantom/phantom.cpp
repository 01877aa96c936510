#include "t2d/phantom.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <random>
#include <sstream>
#include <thread>

#include "t2d/volume_io.hpp"

namespace t2d {

std::string to_string(PhantomFamily f) { return f == PhantomFamily::TubeTree ? "tube_tree" : "blob"; }

PhantomFamily parse_phantom_family(const std::string& s) {
  if (s == "tube_tree") return PhantomFamily::TubeTree;
  if (s == "blob") return PhantomFamily::Blob;
  throw ConfigError("phantom.family", "unknown family \"" + s + "\" (expected tube_tree|blob)");
}

void PhantomConfig::validate() const {
  if (dims.h < 8 || dims.w < 8 || dims.d < 8) throw ConfigError("phantom.h", "each extent must be >= 8");
  if (!(radius_min >= 1)) throw ConfigError("phantom.radius_min", "must be >= 1");
  if (!(radius_max >= radius_min)) throw ConfigError("phantom.radius_max", "must be >= radius_min");
  if (branches < 1) throw ConfigError("phantom.branches", "must be >= 1");
  if (depth < 0) throw ConfigError("phantom.depth", "must be >= 0");
  if (!(noise_sigma >= 0)) throw ConfigError("phantom.noise_sigma", "must be >= 0");
  if (!(distractor_density >= 0)) throw ConfigError("phantom.distractor_density", "must be >= 0");
  if (!(gap_rate >= 0 && gap_rate < 1)) throw ConfigError("phantom.gap_rate", "must lie in [0, 1)");
  if (gap_length_min < 1 || gap_length_max < gap_length_min) {
    throw ConfigError("phantom.gap_length_min", "need 1 <= gap_length_min <= gap_length_max");
  }
  if (!(gap_contrast >= 0 && gap_contrast <= 1)) throw ConfigError("phantom.gap_contrast", "must lie in [0, 1]");
  if (fg_mean == bg_mean) throw ConfigError("phantom.fg_mean", "must differ from bg_mean");
}

void PhantomConfig::to_kv(KvConfig& kv, const std::string& p) const {
  kv.set(p + "h", std::to_string(dims.h));
  kv.set(p + "w", std::to_string(dims.w));
  kv.set(p + "d", std::to_string(dims.d));
  kv.set(p + "family", to_string(family));
  kv.set(p + "radius_min", format_real(radius_min));
  kv.set(p + "radius_max", format_real(radius_max));
  kv.set(p + "branches", std::to_string(branches));
  kv.set(p + "depth", std::to_string(depth));
  kv.set(p + "fg_mean", format_real(fg_mean));
  kv.set(p + "bg_mean", format_real(bg_mean));
  kv.set(p + "noise_sigma", format_real(noise_sigma));
  kv.set(p + "distractor_density", format_real(distractor_density));
  kv.set(p + "gap_rate", format_real(gap_rate));
  kv.set(p + "gap_length_min", std::to_string(gap_length_min));
  kv.set(p + "gap_length_max", std::to_string(gap_length_max));
  kv.set(p + "gap_contrast", format_real(gap_contrast));
  kv.set(p + "seed", std::to_string(seed));
}

PhantomConfig PhantomConfig::from_kv(const KvConfig& kv, const std::string& p) {
  PhantomConfig c;
  c.dims.h = static_cast<int>(kv.get_int(p + "h", c.dims.h));
  c.dims.w = static_cast<int>(kv.get_int(p + "w", c.dims.w));
  c.dims.d = static_cast<int>(kv.get_int(p + "d", c.dims.d));
  c.family = parse_phantom_family(kv.get_string(p + "family", to_string(c.family)));
  c.radius_min = kv.get_double(p + "radius_min", c.radius_min);
  c.radius_max = kv.get_double(p + "radius_max", c.radius_max);
  c.branches = static_cast<int>(kv.get_int(p + "branches", c.branches));
  c.depth = static_cast<int>(kv.get_int(p + "depth", c.depth));
  c.fg_mean = kv.get_double(p + "fg_mean", c.fg_mean);
  c.bg_mean = kv.get_double(p + "bg_mean", c.bg_mean);
  c.noise_sigma = kv.get_double(p + "noise_sigma", c.noise_sigma);
  c.distractor_density = kv.get_double(p + "distractor_density", c.distractor_density);
  c.gap_rate = kv.get_double(p + "gap_rate", c.gap_rate);
  c.gap_length_min = static_cast<int>(kv.get_int(p + "gap_length_min", c.gap_length_min));
  c.gap_length_max = static_cast<int>(kv.get_int(p + "gap_length_max", c.gap_length_max));
  c.gap_contrast = kv.get_double(p + "gap_contrast", c.gap_contrast);
  c.seed = static_cast<std::uint64_t>(kv.get_int(p + "seed", static_cast<long long>(c.seed)));
  return c;
}

namespace {

struct Vec3 {
  double h = 0, w = 0, d = 0;
  Vec3 operator+(const Vec3& o) const { return {h + o.h, w + o.w, d + o.d}; }
  Vec3 operator-(const Vec3& o) const { return {h - o.h, w - o.w, d - o.d}; }
  Vec3 operator*(double s) const { return {h * s, w * s, d * s}; }
  double dot(const Vec3& o) const { return h * o.h + w * o.w + d * o.d; }
  double norm() const { return std::sqrt(dot(*this)); }
  Vec3 unit() const { return *this * (1.0 / norm()); }
};

using Rng = std::mt19937_64;

double uniform(Rng& rng, double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng); }

Vec3 random_direction(Rng& rng) {
  std::normal_distribution<double> n(0, 1);
  Vec3 v;
  do {
    v = {n(rng), n(rng), n(rng)};
  } while (v.norm() < 1e-6);
  return v.unit();
}

class Canvas {
 public:
  explicit Canvas(Dims dims) : dims_(dims), mask_(dims.voxels(), 0), gaps_(dims.voxels(), 0) {}

  bool inside(const Vec3& p) const {
    return p.h >= 0 && p.w >= 0 && p.d >= 0 && p.h <= dims_.h - 1 && p.w <= dims_.w - 1 && p.d <= dims_.d - 1;
  }
  std::size_t index(int h, int w, int d) const {
    return (static_cast<std::size_t>(d) * dims_.h + h) * dims_.w + w;
  }

  void capsule(const Vec3& a, const Vec3& b, double r) { paint(a, b, r, mask_); }
  void gap(const Vec3& a, const Vec3& b, double r) { paint(a, b, r, gaps_); }

  void paint(const Vec3& a, const Vec3& b, double r, std::vector<Real>& buf) {
    const Vec3 ab = b - a;
    const double len2 = ab.dot(ab);
    auto lo = [&](double x, double y) { return std::max(0, static_cast<int>(std::floor(std::min(x, y) - r))); };
    auto hi = [&](double x, double y, int n) {
      return std::min(n - 1, static_cast<int>(std::ceil(std::max(x, y) + r)));
    };
    for (int d = lo(a.d, b.d); d <= hi(a.d, b.d, dims_.d); ++d)
      for (int h = lo(a.h, b.h); h <= hi(a.h, b.h, dims_.h); ++h)
        for (int w = lo(a.w, b.w); w <= hi(a.w, b.w, dims_.w); ++w) {
          const Vec3 p{static_cast<double>(h), static_cast<double>(w), static_cast<double>(d)};
          const double t = len2 > 0 ? std::clamp((p - a).dot(ab) / len2, 0.0, 1.0) : 0.0;
          const Vec3 q = a + ab * t;
          if ((p - q).dot(p - q) <= r * r) buf[index(h, w, d)] = 1;
        }
  }

  const Dims& dims() const { return dims_; }
  std::vector<Real>& mask() { return mask_; }
  std::vector<Real>& gaps() { return gaps_; }

 private:
  Dims dims_;
  std::vector<Real> mask_;
  std::vector<Real> gaps_;
};

struct TreeBuilder {
  const PhantomConfig& cfg;
  Rng& rng;
  Canvas& canvas;
  std::vector<std::vector<Voxel>>& centerlines;
  int min_length;
  bool degenerate = false;

  void grow(Vec3 p, Vec3 dir, double r, int level) {
    std::vector<Vec3> pts{p};
    std::vector<Vec3> dirs{dir};
    std::normal_distribution<double> jitter(0, 0.12);
    const int max_steps = 2 * (canvas.dims().h + canvas.dims().w + canvas.dims().d);
    for (int s = 0; s < max_steps; ++s) {
      dir = (dir + Vec3{jitter(rng), jitter(rng), jitter(rng)}).unit();
      p = p + dir;
      if (!canvas.inside(p)) break;
      pts.push_back(p);
      dirs.push_back(dir);
    }
    if (static_cast<int>(pts.size()) < (level == 0 ? min_length : 2)) {
      if (level == 0) degenerate = true;
      return;
    }
    for (std::size_t i = 0; i + 1 < pts.size(); ++i) canvas.capsule(pts[i], pts[i + 1], r);
    if (cfg.gap_rate > 0) {
      for (std::size_t i = 0; i + 1 < pts.size(); ++i) {
        if (uniform(rng, 0, 1) >= cfg.gap_rate) continue;
        const auto len = static_cast<std::size_t>(cfg.gap_length_min +
                                                  static_cast<int>(rng() % (cfg.gap_length_max - cfg.gap_length_min + 1)));
        const std::size_t end = std::min(pts.size() - 1, i + len);
        for (std::size_t j = i; j < end; ++j) canvas.gap(pts[j], pts[j + 1], r + 0.75);
        i = end;
      }
    }

    std::vector<Voxel> line;
    for (std::size_t i = 0; i + 1 < pts.size(); ++i) {
      for (int s = 0; s < 2; ++s) {
        const Vec3 q = pts[i] + (pts[i + 1] - pts[i]) * (0.5 * s);
        Voxel v{static_cast<int>(std::lround(q.h)), static_cast<int>(std::lround(q.w)),
                static_cast<int>(std::lround(q.d))};
        if (line.empty() || line.back() != v) line.push_back(v);
      }
    }
    const Vec3& e = pts.back();
    Voxel last{static_cast<int>(std::lround(e.h)), static_cast<int>(std::lround(e.w)),
               static_cast<int>(std::lround(e.d))};
    if (line.back() != last) line.push_back(last);
    centerlines.push_back(std::move(line));

    if (level >= cfg.depth) return;
    const int children = 1 + static_cast<int>(rng() % 2);
    for (int c = 0; c < children; ++c) {
      const auto at = static_cast<std::size_t>(uniform(rng, 0.2, 0.8) * static_cast<double>(pts.size() - 1));
      Vec3 side = random_direction(rng);
      side = (side - dirs[at] * side.dot(dirs[at])).unit();
      const Vec3 child_dir = (dirs[at] + side * uniform(rng, 0.8, 1.5)).unit();
      grow(pts[at], child_dir, std::max(cfg.radius_min, r * 0.75), level + 1);
    }
  }
};

Vec3 boundary_start(const Dims& dims, Rng& rng, Vec3& dir) {
  const double H = dims.h - 1, W = dims.w - 1, D = dims.d - 1;
  Vec3 p{uniform(rng, 0.2, 0.8) * H, uniform(rng, 0.2, 0.8) * W, uniform(rng, 0.2, 0.8) * D};
  switch (rng() % 6) {
    case 0: p.h = 0; break;
    case 1: p.h = H; break;
    case 2: p.w = 0; break;
    case 3: p.w = W; break;
    case 4: p.d = 0; break;
    default: p.d = D; break;
  }
  const Vec3 target{uniform(rng, 0.3, 0.7) * H, uniform(rng, 0.3, 0.7) * W, uniform(rng, 0.3, 0.7) * D};
  dir = (target - p).unit();
  return p;
}

void paint_blobs(const PhantomConfig& cfg, Rng& rng, Canvas& canvas) {
  const Dims& dm = canvas.dims();
  const double scale = std::min({dm.h, dm.w, dm.d}) / 64.0;
  const int n = 1 + static_cast<int>(rng() % 3);
  for (int b = 0; b < n; ++b) {
    const Vec3 c{uniform(rng, 0.3, 0.7) * (dm.h - 1), uniform(rng, 0.3, 0.7) * (dm.w - 1),
                 uniform(rng, 0.3, 0.7) * (dm.d - 1)};
    const Vec3 ax{uniform(rng, 4, 10) * scale, uniform(rng, 4, 10) * scale, uniform(rng, 4, 10) * scale};
    for (int d = 0; d < dm.d; ++d)
      for (int h = 0; h < dm.h; ++h)
        for (int w = 0; w < dm.w; ++w) {
          const double x = (h - c.h) / ax.h, y = (w - c.w) / ax.w, z = (d - c.d) / ax.d;
          if (x * x + y * y + z * z <= 1) canvas.mask()[canvas.index(h, w, d)] = 1;
        }
  }
  (void)cfg;
}

// Disks one axial slice thick, kept one voxel away from the foreground and
// from each other in all three directions.
std::vector<Real> paint_distractors(const PhantomConfig& cfg, Rng& rng, const Canvas& canvas,
                                    const std::vector<Real>& mask) {
  const Dims& dm = canvas.dims();
  std::vector<Real> out(dm.voxels(), 0);
  const int wanted = static_cast<int>(std::lround(cfg.distractor_density * dm.d));
  int placed = 0;
  auto blocked = [&](int h, int w, int d) {
    for (int dd = std::max(0, d - 1); dd <= std::min(dm.d - 1, d + 1); ++dd)
      for (int hh = std::max(0, h - 1); hh <= std::min(dm.h - 1, h + 1); ++hh)
        for (int ww = std::max(0, w - 1); ww <= std::min(dm.w - 1, w + 1); ++ww) {
          const std::size_t i = canvas.index(hh, ww, dd);
          if (mask[i] != 0 || out[i] != 0) return true;
        }
    return false;
  };
  for (int attempt = 0; attempt < 20 * wanted && placed < wanted; ++attempt) {
    const double r = uniform(rng, cfg.radius_min, cfg.radius_max);
    const int d = static_cast<int>(rng() % dm.d);
    const double ch = uniform(rng, 0, dm.h - 1), cw = uniform(rng, 0, dm.w - 1);
    std::vector<std::size_t> disk;
    bool ok = true;
    for (int h = std::max(0, static_cast<int>(std::floor(ch - r)));
         ok && h <= std::min(dm.h - 1, static_cast<int>(std::ceil(ch + r))); ++h)
      for (int w = std::max(0, static_cast<int>(std::floor(cw - r)));
           w <= std::min(dm.w - 1, static_cast<int>(std::ceil(cw + r))); ++w) {
        if ((h - ch) * (h - ch) + (w - cw) * (w - cw) > r * r) continue;
        if (blocked(h, w, d)) {
          ok = false;
          break;
        }
        disk.push_back(canvas.index(h, w, d));
      }
    if (!ok || disk.empty()) continue;
    for (std::size_t i : disk) out[i] = 1;
    ++placed;
  }
  return out;
}

}  // namespace

Phantom generate(const PhantomConfig& cfg) {
  cfg.validate();
  constexpr int kMaxAttempts = 16;
  Rng rng(cfg.seed);
  for (int attempt = 0; attempt < kMaxAttempts; ++attempt) {
    Canvas canvas(cfg.dims);
    std::vector<std::vector<Voxel>> centerlines;
    bool degenerate = false;
    if (cfg.family == PhantomFamily::TubeTree) {
      TreeBuilder tb{cfg, rng, canvas, centerlines, std::min({cfg.dims.h, cfg.dims.w, cfg.dims.d}) / 4};
      for (int b = 0; b < cfg.branches; ++b) {
        Vec3 dir;
        const Vec3 start = boundary_start(cfg.dims, rng, dir);
        tb.grow(start, dir, uniform(rng, cfg.radius_min, cfg.radius_max), 0);
      }
      degenerate = tb.degenerate;
    } else {
      paint_blobs(cfg, rng, canvas);
    }
    std::vector<Real> mask = canvas.mask();
    std::size_t fg = 0;
    for (Real v : mask) fg += v != 0;
    const double fraction = static_cast<double>(fg) / static_cast<double>(mask.size());
    if (degenerate || fg == 0 || fraction >= 0.5) continue;

    std::vector<Real> distract = paint_distractors(cfg, rng, canvas, mask);
    std::vector<Real> gaps = canvas.gaps();
    std::vector<Real> image(mask.size());
    const double contrast = cfg.fg_mean - cfg.bg_mean;
    for (std::size_t i = 0; i < image.size(); ++i) {
      gaps[i] *= mask[i];
      const double fg = gaps[i] != 0 ? cfg.gap_contrast : mask[i];
      image[i] = static_cast<Real>(cfg.bg_mean + contrast * std::max<double>(fg, distract[i]));
    }
    if (cfg.noise_sigma > 0) {
      std::normal_distribution<double> noise(0, cfg.noise_sigma);
      for (auto& v : image) v += static_cast<Real>(noise(rng));
    }
    return Phantom{Volume(cfg.dims, VolumeKind::Intensity, std::move(image)),
                   Volume(cfg.dims, VolumeKind::Mask, std::move(mask)),
                   Volume(cfg.dims, VolumeKind::Mask, std::move(distract)),
                   Volume(cfg.dims, VolumeKind::Mask, std::move(gaps)), std::move(centerlines)};
  }
  throw PhantomError("phantom seed " + std::to_string(cfg.seed) + ": no valid geometry after " +
                     std::to_string(kMaxAttempts) + " attempts (check radii and volume size)");
}

std::vector<DatasetEntry> make_dataset(int n, const PhantomConfig& cfg, double train_fraction) {
  if (n < 2) throw std::invalid_argument("make_dataset: need n >= 2, got " + std::to_string(n));
  if (!(train_fraction > 0 && train_fraction < 1)) {
    throw ConfigError("dataset.train_fraction", "must lie in (0, 1)");
  }
  const int n_train = std::clamp(static_cast<int>(std::lround(n * train_fraction)), 1, n - 1);
  std::vector<DatasetEntry> out;
  for (int i = 0; i < n; ++i) {
    char name[32];
    std::snprintf(name, sizeof name, "vol_%04d", i);
    out.push_back({name, cfg.seed + static_cast<std::uint64_t>(i), cfg.family, i < n_train});
  }
  return out;
}

std::filesystem::path image_path(const std::filesystem::path& dir, const std::string& name) {
  return dir / (name + ".image.t2dv");
}

std::filesystem::path mask_path(const std::filesystem::path& dir, const std::string& name) {
  return dir / (name + ".mask.t2dv");
}

std::string manifest_text(const std::vector<DatasetEntry>& entries) {
  std::string out = "filename\tseed\tfamily\tsplit\n";
  for (const auto& e : entries) {
    out += e.name + "\t" + std::to_string(e.seed) + "\t" + to_string(e.family) + "\t" +
           (e.train ? "train" : "test") + "\n";
  }
  return out;
}

std::vector<DatasetEntry> parse_manifest(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  std::getline(in, line);
  if (line != "filename\tseed\tfamily\tsplit") throw std::invalid_argument("manifest: unexpected header");
  std::vector<DatasetEntry> out;
  int lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::vector<std::string> f;
    std::stringstream ss(line);
    for (std::string cell; std::getline(ss, cell, '\t');) f.push_back(cell);
    if (f.size() != 4 || (f[3] != "train" && f[3] != "test")) {
      throw std::invalid_argument("manifest line " + std::to_string(lineno) + " is malformed");
    }
    out.push_back({f[0], std::stoull(f[1]), parse_phantom_family(f[2]), f[3] == "train"});
  }
  return out;
}

void write_dataset(const std::filesystem::path& dir, const std::vector<DatasetEntry>& entries,
                   const PhantomConfig& cfg, int threads) {
  std::filesystem::create_directories(dir);
  auto work = [&](std::size_t i) {
    PhantomConfig c = cfg;
    c.seed = entries[i].seed;
    c.family = entries[i].family;
    Phantom p = generate(c);
    write_volume(image_path(dir, entries[i].name), p.image);
    write_volume(mask_path(dir, entries[i].name), p.mask);
  };
  const int workers = std::clamp(threads, 1, static_cast<int>(std::max<std::size_t>(1, entries.size())));
  if (workers == 1) {
    for (std::size_t i = 0; i < entries.size(); ++i) work(i);
  } else {
    std::vector<std::exception_ptr> errors(workers);
    std::vector<std::thread> pool;
    for (int t = 0; t < workers; ++t) {
      pool.emplace_back([&, t] {
        try {
          for (std::size_t i = t; i < entries.size(); i += workers) work(i);
        } catch (...) {
          errors[t] = std::current_exception();
        }
      });
    }
    for (auto& th : pool) th.join();
    for (auto& e : errors)
      if (e) std::rethrow_exception(e);
  }
  std::ofstream(dir / "manifest.tsv") << manifest_text(entries);
}

}  // namespace t2d
