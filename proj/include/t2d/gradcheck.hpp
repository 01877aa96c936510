#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "t2d/tensor.hpp"

namespace t2d {

struct GradCheckOptions {
  Real eps = Real(1e-5);
  /// 0 checks every coordinate; otherwise a seeded sample per tensor.
  std::size_t max_coords_per_tensor = 0;
  std::uint64_t seed = 1;
  /// Denominator floor of the elementwise relative error.
  Real floor = Real(1e-6);
};

struct GradCheckResult {
  Real max_rel_error = 0;
  std::size_t checked = 0;
  /// Coordinates whose ±eps probes changed some relu's active set.
  std::size_t skipped_kinks = 0;
  std::string worst;
};

/// Compares reverse-mode gradients of `loss_fn` w.r.t. the leaf tensors in
/// `wrt` against central differences. Probes that straddle a relu kink are
/// skipped rather than resolved with a subgradient convention.
GradCheckResult check_gradients(const std::function<Tensor()>& loss_fn, std::vector<Tensor> wrt,
                                const std::vector<std::string>& names = {},
                                GradCheckOptions opt = {});

}  // namespace t2d
