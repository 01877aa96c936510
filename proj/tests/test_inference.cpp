#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>

#include "support.hpp"
#include "t2d/inference.hpp"

using namespace t2d;
using test::random_mask;
using test::random_volume;

namespace {

ModelConfig tiny(FusionMode mode, int k) {
  ModelConfig c;
  c.fusion_mode = mode;
  c.k = k;
  c.base_width = 2;
  c.trunk_width = 4;
  c.ssa_channels = 3;
  c.ssa_pool_size = 2;
  c.input_size = 16;
  c.seed = 3;
  return c;
}

const GroupPredictor echo = [](const SliceGroup& g) { return g.values; };

}  // namespace

TEST_CASE("echo predictor reproduces any probability volume") {
  const Volume v = random_volume({7, 6, 9}, 1);
  for (Axis a : kAllAxes) {
    for (int k : {1, 2, 3, 6}) {
      const Volume out = predict_axis(echo, v, a, k);
      double worst = 0;
      for (std::size_t i = 0; i < v.voxels().size(); ++i)
        worst = std::max(worst, std::abs(out.voxels()[i] - v.voxels()[i]));
      CHECK(worst < 1e-12);
    }
  }
}

TEST_CASE("k equal to the extent runs one group") {
  const Volume v = random_volume({3, 3, 4}, 2);
  int calls = 0;
  GroupPredictor f = [&](const SliceGroup& g) {
    ++calls;
    CHECK(g.start == 1);
    return std::vector<Real>(g.values.size(), 0.25);
  };
  const Volume out = predict_axis(f, v, Axis::Axial, 4);
  CHECK(calls == 1);
  for (Real x : out.voxels()) CHECK(x == 0.25);
  CHECK_THROWS_AS(predict_axis(f, v, Axis::Axial, 5), RangeError);
}

TEST_CASE("network prediction equals a naive loop-and-average oracle") {
  const T2DNet net = T2DNet::build(tiny(FusionMode::EsmSsa, 3));
  const Volume v = random_volume({16, 16, 20}, 3, VolumeKind::Intensity);
  const Volume p = predict_axis(net, v, Axis::Axial);
  std::vector<double> acc(v.voxels().size(), 0);
  std::vector<int> count(20, 0);
  for (int s = 1; s + 2 <= 20; ++s) {
    NoGradGuard ng;
    Tensor y = net.forward(extract_group(v, Axis::Axial, s, 3).tensor());
    for (int c = 0; c < 3; ++c) {
      ++count[s - 1 + c];
      for (int i = 0; i < 256; ++i) acc[(s - 1 + c) * 256 + i] += y.data()[c * 256 + i];
    }
  }
  double worst = 0;
  for (std::size_t i = 0; i < acc.size(); ++i) worst = std::max(worst, std::abs(acc[i] / count[i / 256] - p.voxels()[i]));
  CHECK(worst < 1e-9);
}

TEST_CASE("network prediction pads and crops non-square slices") {
  const T2DNet net = T2DNet::build(tiny(FusionMode::Plain, 3));
  const Volume v = random_volume({10, 20, 6}, 4, VolumeKind::Intensity);
  for (Axis a : kAllAxes) {
    const Volume p = predict_axis(net, v, a);
    CHECK(p.dims() == v.dims());
    CHECK_NOTHROW(p.validate());
  }
}

TEST_CASE("threaded prediction is bitwise identical") {
  const T2DNet net = T2DNet::build(tiny(FusionMode::Esm, 6));
  const Volume v = random_volume({16, 16, 14}, 5, VolumeKind::Intensity);
  const Volume one = predict_axis(net, v, Axis::Coronal, 1);
  CHECK(predict_axis(net, v, Axis::Coronal, 3) == one);
  CHECK(predict_axis(net, v, Axis::Coronal, 64) == one);
}

TEST_CASE("predictor errors propagate") {
  GroupPredictor bad = [](const SliceGroup&) { return std::vector<Real>(3, 0); };
  CHECK_THROWS_AS(predict_axis(bad, random_volume({4, 4, 4}, 6), Axis::Axial, 2, 2), ShapeError);
}

TEST_CASE("binarize boundary semantics") {
  const Dims dims{2, 2, 2};
  Volume half(dims, VolumeKind::Probability, std::vector<Real>(8, 0.5));
  const Volume bh = binarize(half);
  for (Real x : bh.voxels()) CHECK(x == 1);
  Volume below(dims, VolumeKind::Probability, std::vector<Real>(8, 0.4999));
  const Volume bb = binarize(below);
  for (Real x : bb.voxels()) CHECK(x == 0);
  const Volume r = random_volume({4, 4, 4}, 7);
  const Volume b = binarize(r);
  CHECK(b.kind() == VolumeKind::Mask);
  CHECK(binarize(b) == b);
  CHECK(binarize(r, 0.9) != b);
}

TEST_CASE("fuse_views majority truth table") {
  const Dims dims{1, 1, 8};
  const Volume zc(dims, VolumeKind::Mask, {0, 1, 0, 0, 1, 1, 0, 1});
  const Volume zs(dims, VolumeKind::Mask, {0, 0, 1, 0, 1, 0, 1, 1});
  const Volume za(dims, VolumeKind::Mask, {0, 0, 0, 1, 0, 1, 1, 1});
  const std::vector<Real> expect{0, 0, 0, 0, 1, 1, 1, 1};
  CHECK(fuse_views(zc, zs, za).voxels() == expect);
  CHECK(fuse_views(zs, za, zc).voxels() == expect);
  CHECK(fuse_views(za, zc, zs).voxels() == expect);
  CHECK(fuse_views(zs, zc, za).voxels() == expect);
  const Volume m = random_mask({3, 4, 5}, 8);
  CHECK(fuse_views(m, m, m) == m);
  CHECK_THROWS(fuse_views(m, m, random_volume({3, 4, 5}, 9)));
  CHECK_THROWS(fuse_views(m, m, random_mask({3, 4, 4}, 9)));
}

TEST_CASE("fuse_mean averages") {
  const Dims dims{1, 1, 2};
  const Volume f = fuse_mean(Volume(dims, VolumeKind::Probability, {0.3, 1}),
                             Volume(dims, VolumeKind::Probability, {0.6, 1}),
                             Volume(dims, VolumeKind::Probability, {0.0, 1}));
  CHECK(f.voxels()[0] == doctest::Approx(0.3));
  CHECK(f.voxels()[1] == 1);
}

TEST_CASE("window arithmetic") {
  CHECK(window_starts(512, 128, 32).size() == 13);
  const auto d = window_starts(394, 64, 16);
  CHECK(d.size() == 22);
  CHECK(d.back() == 330);
  CHECK(d[20] == 320);
  CHECK(window_starts(64, 64, 16) == std::vector<int>{0});
  CHECK(window_starts(80, 64, 16) == std::vector<int>{0, 16});
  CHECK_THROWS(window_starts(10, 20, 4));

  // Enumeration oracle: every position with a window flush to the end.
  for (int extent : {5, 17, 64, 100, 394})
    for (int patch : {1, 4, 16, 64})
      for (int stride : {1, 3, 16, 32}) {
        if (patch > extent) continue;
        std::vector<int> oracle;
        for (int s = 0; s + patch <= extent; s += stride) oracle.push_back(s);
        if (oracle.back() + patch != extent) oracle.push_back(extent - patch);
        CHECK(window_starts(extent, patch, stride) == oracle);
      }

  const Dims big{512, 512, 394};
  WindowScheme p3;
  p3.kind = SchemeKind::Patch3d;
  CHECK(count_windows(big, p3).windows == 3718);
  WindowScheme thick;
  thick.kind = SchemeKind::Thick2d;
  thick.k = 15;
  CHECK(count_windows(big, thick).windows == 380);
  WindowScheme s2;
  s2.kind = SchemeKind::Slice2d;
  CHECK(count_windows(big, s2).windows == 394);
  s2.axis = Axis::Coronal;
  CHECK(count_windows(big, s2).windows == 512);
}

TEST_CASE("analytic cost model") {
  ModelConfig cfg = tiny(FusionMode::EsmSsa, 15);
  cfg.base_width = 8;
  cfg.trunk_width = 16;
  cfg.ssa_channels = 8;
  cfg.ssa_pool_size = 8;
  const Dims dims{64, 64, 48};
  WindowScheme thick;
  thick.k = 15;
  const CostReport t = estimate_cost(dims, thick, cfg);
  CHECK(t.windows == 34);
  CHECK(t.macs_per_window == network_macs([&] {
          ModelConfig c = cfg;
          c.input_size = 64;
          return c;
        }(), 64));
  CHECK(t.total_macs == t.windows * t.macs_per_window);

  WindowScheme p3;
  p3.kind = SchemeKind::Patch3d;
  p3.patch = {32, 32, 16};
  p3.stride = {8, 8, 4};
  const CostReport p = estimate_cost(dims, p3, cfg);
  CHECK(p.windows == 5 * 5 * 9);
  CHECK(p.total_macs > t.total_macs);

  const std::string js = t.to_json();
  CHECK(CostReport::from_json(js) == t);
  CostReport timed = t;
  timed.wall_ms = 12.5;
  CHECK(CostReport::from_json(timed.to_json()) == timed);
  CHECK(parse_scheme_kind("patch3d") == SchemeKind::Patch3d);
  CHECK_THROWS(parse_scheme_kind("3d"));
}
