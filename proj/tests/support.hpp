#pragma once

#include <random>
#include <vector>

#include "t2d/tensor.hpp"
#include "t2d/volume.hpp"

namespace t2d::test {

inline std::vector<Real> random_values(std::size_t n, std::uint64_t seed, double lo = -1, double hi = 1) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(lo, hi);
  std::vector<Real> v(n);
  for (auto& x : v) x = static_cast<Real>(u(rng));
  return v;
}

inline Tensor random_tensor(Shape shape, std::uint64_t seed) {
  const auto n = numel(shape);
  return Tensor::from(std::move(shape), random_values(n, seed));
}

inline Tensor random_parameter(Shape shape, std::uint64_t seed) {
  const auto n = numel(shape);
  return Tensor::parameter(std::move(shape), random_values(n, seed));
}

inline Volume random_volume(Dims dims, std::uint64_t seed, VolumeKind kind = VolumeKind::Probability) {
  return Volume(dims, kind, random_values(dims.voxels(), seed, 0, 1));
}

inline Volume random_mask(Dims dims, std::uint64_t seed, double p = 0.3) {
  auto v = random_values(dims.voxels(), seed, 0, 1);
  for (auto& x : v) x = x < p ? 1 : 0;
  return Volume(dims, VolumeKind::Mask, std::move(v));
}

}  // namespace t2d::test
