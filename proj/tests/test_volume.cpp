#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <filesystem>
#include <random>

#include "support.hpp"
#include "t2d/binary_io.hpp"
#include "t2d/volume.hpp"
#include "t2d/volume_io.hpp"

using namespace t2d;
using test::random_volume;

TEST_CASE("slice indexing and counts") {
  Volume v({1, 1, 3}, VolumeKind::Intensity, {10, 20, 30});
  const Slice2D s = slice(v, Axis::Axial, 2);
  CHECK(s.rows == 1);
  CHECK(s.cols == 1);
  CHECK(s.values == std::vector<Real>{20});

  const Volume r = random_volume({4, 5, 6}, 1);
  CHECK(r.dims().extent(Axis::Coronal) == 4);
  CHECK(slice_extent(r.dims(), Axis::Coronal) == std::pair{5, 6});
  CHECK(slice_extent(r.dims(), Axis::Sagittal) == std::pair{4, 6});
  CHECK(slice_extent(r.dims(), Axis::Axial) == std::pair{4, 5});
  CHECK(slice(r, Axis::Coronal, 3).at(1, 2) == r.at(2, 1, 2));
  CHECK(slice(r, Axis::Sagittal, 5).at(3, 4) == r.at(3, 4, 4));
  CHECK(slice(r, Axis::Axial, 6).at(3, 4) == r.at(3, 4, 5));

  CHECK_THROWS_AS(slice(r, Axis::Axial, 0), RangeError);
  CHECK_THROWS_AS(slice(r, Axis::Axial, 7), RangeError);
  CHECK_THROWS_AS(slice(r, Axis::Coronal, 5), RangeError);
}

TEST_CASE("slicing then restacking reproduces the volume bitwise") {
  const Volume v = random_volume({5, 3, 4}, 2);
  for (Axis a : kAllAxes) {
    Volume out(v.dims(), v.kind());
    for (int i = 1; i <= v.dims().extent(a); ++i) put_slice(out, a, i, slice(v, a, i));
    CHECK(out == v);
  }
}

TEST_CASE("extract_group") {
  Volume v({2, 2, 5}, VolumeKind::Intensity);
  for (int d = 0; d < 5; ++d)
    for (int h = 0; h < 2; ++h)
      for (int w = 0; w < 2; ++w) v.at(h, w, d) = d + 1;
  const SliceGroup g = extract_group(v, Axis::Axial, 3, 3);
  for (int c = 0; c < 3; ++c) CHECK(g.channel(c).values == std::vector<Real>(4, c + 3));
  CHECK_THROWS_AS(extract_group(v, Axis::Axial, 4, 3), RangeError);
  CHECK_THROWS_AS(extract_group(v, Axis::Coronal, 1, 3), RangeError);

  const Volume r = random_volume({6, 5, 7}, 3);
  for (Axis a : kAllAxes) {
    for (int i = 1; i <= r.dims().extent(a); ++i) {
      const SliceGroup one = extract_group(r, a, i, 1);
      CHECK(one.tensor().shape() == Shape{1, one.rows, one.cols});
      CHECK(one.channel(0) == slice(r, a, i));
    }
    const int k = 4;
    for (int d = 1; d + k <= r.dims().extent(a); ++d) {
      const SliceGroup g0 = extract_group(r, a, d, k), g1 = extract_group(r, a, d + 1, k);
      for (int c = 1; c < k; ++c) CHECK(g0.channel(c) == g1.channel(c - 1));
    }
  }
}

TEST_CASE("regroup hand oracle") {
  const Dims dims{1, 1, 4};
  std::vector<GroupPrediction> groups{{1, {0.0, 0.0}}, {2, {0.6, 0.6}}, {3, {1.0, 1.0}}};
  const Volume v = regroup(groups, Axis::Axial, dims, 2);
  CHECK(v.voxels()[0] == 0.0);
  CHECK(v.voxels()[1] == doctest::Approx(0.3).epsilon(1e-15));
  CHECK(v.voxels()[2] == doctest::Approx(0.8).epsilon(1e-15));
  CHECK(v.voxels()[3] == 1.0);
  CHECK(v.kind() == VolumeKind::Probability);
}

TEST_CASE("regroup with k=1 stacks the inputs") {
  const Volume r = random_volume({3, 4, 5}, 4);
  for (Axis a : kAllAxes) {
    std::vector<GroupPrediction> gs;
    for (int i = 1; i <= r.dims().extent(a); ++i) gs.push_back({i, slice(r, a, i).values});
    CHECK(regroup(gs, a, r.dims(), 1).voxels() == r.voxels());
  }
}

TEST_CASE("regroup equals a per-voxel accumulate/count oracle") {
  std::mt19937_64 rng(5);
  const Dims dims{5, 6, 9};
  for (Axis a : kAllAxes) {
    for (int k : {1, 2, 3, 5}) {
      const int n = dims.extent(a);
      auto [rows, cols] = slice_extent(dims, a);
      const std::size_t plane = static_cast<std::size_t>(rows) * cols;
      std::vector<GroupPrediction> gs;
      for (int s = 1; s + k - 1 <= n; ++s)
        gs.push_back({s, test::random_values(k * plane, rng(), 0, 1)});
      const Volume v = regroup(gs, a, dims, k);
      for (int h = 0; h < dims.h; ++h)
        for (int w = 0; w < dims.w; ++w)
          for (int d = 0; d < dims.d; ++d) {
            const int pos[3] = {h, w, d};
            const int s = pos[static_cast<int>(a)];
            int r = 0, c = 0;
            if (a == Axis::Coronal) r = w, c = d;
            if (a == Axis::Sagittal) r = h, c = d;
            if (a == Axis::Axial) r = h, c = w;
            double sum = 0;
            int count = 0;
            for (const auto& g : gs) {
              const int ch = s - (g.start - 1);
              if (ch < 0 || ch >= k) continue;
              sum += g.values[ch * plane + r * cols + c];
              ++count;
            }
            CHECK(count == coverage_count(s + 1, n, k));
            CHECK(std::abs(v.at(h, w, d) - sum / count) < 1e-12);
          }
    }
  }
}

TEST_CASE("regroup rejects uncovered slices and malformed groups") {
  const Dims dims{1, 1, 4};
  CHECK_THROWS_AS(regroup({{1, {0.1, 0.2}}}, Axis::Axial, dims, 2), RangeError);
  CHECK_THROWS_AS(regroup({{4, {0.1, 0.2}}}, Axis::Axial, dims, 2), RangeError);
  CHECK_THROWS(regroup({{1, {0.1}}}, Axis::Axial, dims, 2));
}

TEST_CASE("coverage counts") {
  CHECK(coverage_count(1, 10, 3) == 1);
  CHECK(coverage_count(2, 10, 3) == 2);
  CHECK(coverage_count(5, 10, 3) == 3);
  CHECK(coverage_count(10, 10, 3) == 1);
  CHECK(coverage_count(3, 5, 5) == 1);
  CHECK(coverage_count(3, 2, 3) == 0);
}

TEST_CASE("pad and crop") {
  Slice2D s{3, 3, {1, 2, 3, 4, 5, 6, 7, 8, 9}};
  CHECK(pad_or_crop(s, 3) == s);

  Slice2D t{2, 2, {1, 2, 3, 4}};
  const Slice2D p = pad_or_crop(t, 4);
  CHECK(p.values == std::vector<Real>{0, 0, 0, 0, 0, 1, 2, 0, 0, 3, 4, 0, 0, 0, 0, 0});

  for (auto [rows, cols, size] : {std::tuple{5, 7, 8}, {9, 6, 4}, {10, 3, 6}, {6, 6, 6}}) {
    PadCrop pc(rows, cols, size);
    const auto src = test::random_values(2 * rows * cols, rows * 31 + cols);
    const auto dst = pc.apply(src, 2);
    for (int ch = 0; ch < 2; ++ch)
      for (int r = 0; r < rows; ++r)
        for (int c = 0; c < cols; ++c) {
          auto [tr, tc] = pc.to_target(r, c);
          CHECK(pc.to_source(tr, tc) == std::pair{r, c});
          if (tr >= 0 && tr < size && tc >= 0 && tc < size)
            CHECK(dst[ch * size * size + tr * size + tc] == src[ch * rows * cols + r * cols + c]);
        }
    const auto back = pc.invert(dst, 2, Real(-7));
    for (int ch = 0; ch < 2; ++ch)
      for (int r = 0; r < rows; ++r)
        for (int c = 0; c < cols; ++c) {
          auto [tr, tc] = pc.to_target(r, c);
          const bool inside = tr >= 0 && tr < size && tc >= 0 && tc < size;
          CHECK(back[ch * rows * cols + r * cols + c] == (inside ? src[ch * rows * cols + r * cols + c] : -7));
        }
  }
}

TEST_CASE("kind invariants") {
  CHECK_NOTHROW(random_volume({2, 2, 2}, 6).validate());
  CHECK_NOTHROW(test::random_mask({2, 2, 2}, 6).validate());
  Volume p({1, 1, 2}, VolumeKind::Probability, {0.5, 1.5});
  CHECK_THROWS(p.validate());
  Volume m({1, 1, 2}, VolumeKind::Mask, {0, 0.5});
  CHECK_THROWS(m.validate());
  Volume i({1, 1, 2}, VolumeKind::Intensity, {-4, NAN});
  CHECK_THROWS(i.validate());
  CHECK_THROWS(Volume({0, 1, 1}, VolumeKind::Mask));
  CHECK_THROWS(Volume({1, 1, 2}, VolumeKind::Mask, {0}));
}

TEST_CASE("T2DV encode/decode") {
  const Volume v = random_volume({3, 4, 5}, 7);
  const auto bytes = encode_volume(v);
  CHECK(bytes.size() == 4 + 2 + 1 + 12 + 60 * 4 + 4);
  CHECK(std::string(bytes.begin(), bytes.begin() + 4) == "T2DV");
  CHECK(bytes[4] == 1);
  CHECK(bytes[5] == 0);
  CHECK(bytes[6] == 1);
  CHECK(bytes[7] == 3);
  const Volume back = decode_volume(bytes);
  CHECK(back.dims() == v.dims());
  CHECK(back.kind() == v.kind());
  for (std::size_t i = 0; i < v.voxels().size(); ++i)
    CHECK(back.voxels()[i] == static_cast<Real>(static_cast<float>(v.voxels()[i])));
  CHECK(encode_volume(back) == bytes);

  const Volume mask = test::random_mask({4, 4, 4}, 8);
  CHECK(decode_volume(encode_volume(mask)) == mask);
}

TEST_CASE("T2DV rejects corruption") {
  const auto bytes = encode_volume(random_volume({3, 4, 5}, 9));
  for (std::size_t at : {std::size_t{0}, std::size_t{5}, std::size_t{9}, bytes.size() / 2, bytes.size() - 1}) {
    auto bad = bytes;
    bad[at] ^= 0x01;
    CHECK_THROWS_AS(decode_volume(bad), io::FormatError);
  }
  auto truncated = bytes;
  truncated.resize(20);
  CHECK_THROWS_AS(decode_volume(truncated), io::FormatError);
  CHECK_THROWS_AS(decode_volume(std::vector<std::uint8_t>{}), io::FormatError);
}

TEST_CASE("T2DV file round trip") {
  const auto dir = std::filesystem::temp_directory_path() / "t2d_test_volume";
  std::filesystem::create_directories(dir);
  const Volume v = test::random_mask({5, 5, 5}, 10);
  write_volume(dir / "m.t2dv", v);
  CHECK(read_volume(dir / "m.t2dv") == v);
  const auto bytes = encode_volume(v);
  CHECK(io::crc32(bytes) == 0x2144DF1Cu);
  const std::uint32_t fp = io::file_crc(dir / "m.t2dv");
  CHECK(fp == io::crc32(std::span(bytes).first(bytes.size() - 4)));
  write_volume(dir / "n.t2dv", test::random_mask({5, 5, 5}, 11));
  CHECK(io::file_crc(dir / "n.t2dv") != fp);
  write_volume(dir / "n.t2dv", v);
  CHECK(io::file_crc(dir / "n.t2dv") == fp);
  CHECK_THROWS(read_volume(dir / "missing.t2dv"));
  std::filesystem::remove_all(dir);
}

TEST_CASE("crc32 reference value") {
  const std::string s = "123456789";
  CHECK(io::crc32({reinterpret_cast<const std::uint8_t*>(s.data()), s.size()}) == 0xCBF43926u);
}
