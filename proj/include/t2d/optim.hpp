#pragma once

#include <cstdint>
#include <vector>

#include "t2d/tensor.hpp"

namespace t2d {

struct SgdOptions {
  Real momentum = Real(0.9);
  Real weight_decay = Real(0.0005);
};

/// Momentum buffers for a fixed parameter list.
class OptimizerState {
 public:
  OptimizerState() = default;
  OptimizerState(const std::vector<Tensor>& params, SgdOptions opt);

  const SgdOptions& options() const { return opt_; }
  std::int64_t iteration() const { return iteration_; }
  const std::vector<std::vector<Real>>& velocity() const { return velocity_; }

 private:
  friend void sgd_step(std::vector<Tensor>& params, OptimizerState& state, Real lr);
  SgdOptions opt_;
  std::vector<std::vector<Real>> velocity_;
  std::int64_t iteration_ = 0;
};

/// v ← momentum·v + (grad + weight_decay·param);  param ← param − lr·v.
void sgd_step(std::vector<Tensor>& params, OptimizerState& state, Real lr);

/// Step schedule: base until 70% of `total`, base/10 until 90%, base/100 after.
Real lr_schedule(std::int64_t iteration, std::int64_t total, Real base_lr);

}  // namespace t2d
