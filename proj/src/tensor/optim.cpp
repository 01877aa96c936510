#include "t2d/optim.hpp"

namespace t2d {

OptimizerState::OptimizerState(const std::vector<Tensor>& params, SgdOptions opt) : opt_(opt) {
  velocity_.reserve(params.size());
  for (const auto& p : params) velocity_.emplace_back(p.size(), Real(0));
}

void sgd_step(std::vector<Tensor>& params, OptimizerState& state, Real lr) {
  if (!(lr > 0)) throw std::invalid_argument("sgd_step: learning rate must be positive");
  if (params.size() != state.velocity_.size()) {
    throw ShapeError("sgd_step: " + std::to_string(params.size()) + " parameters but " +
                     std::to_string(state.velocity_.size()) + " velocity buffers");
  }
  const Real mom = state.opt_.momentum, wd = state.opt_.weight_decay;
  for (std::size_t j = 0; j < params.size(); ++j) {
    auto& v = state.velocity_[j];
    auto p = params[j].mutable_data();
    if (v.size() != p.size()) {
      throw ShapeError("sgd_step: velocity buffer size mismatch for parameter " + std::to_string(j));
    }
    auto g = params[j].grad();
    const bool has_grad = g.size() == p.size();
    for (std::size_t i = 0; i < p.size(); ++i) {
      const Real gi = (has_grad ? g[i] : Real(0)) + wd * p[i];
      v[i] = mom * v[i] + gi;
      p[i] -= lr * v[i];
    }
  }
  ++state.iteration_;
}

Real lr_schedule(std::int64_t iteration, std::int64_t total, Real base_lr) {
  if (total <= 0 || iteration < 0 || iteration >= total) {
    throw std::out_of_range("lr_schedule: iteration " + std::to_string(iteration) +
                            " outside [0, " + std::to_string(total) + ")");
  }
  // Integer comparisons keep the 70k/90k breakpoints exact.
  if (iteration * 10 < total * 7) return base_lr;
  if (iteration * 10 < total * 9) return base_lr / Real(10);
  return base_lr / Real(100);
}

}  // namespace t2d
