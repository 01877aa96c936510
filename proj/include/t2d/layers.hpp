#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "t2d/ops.hpp"
#include "t2d/tensor.hpp"

namespace t2d::nn {

/// Ordered, named parameter registry. Each parameter is initialized from its
/// own generator derived from (seed, name), so a parameter's initial value
/// does not depend on which other parameters exist.
class ParamStore {
 public:
  explicit ParamStore(std::uint64_t seed = 0) : seed_(seed) {}

  /// Fan-in scaled uniform: U(-b, b), b = sqrt(6 / fan_in).
  Tensor uniform(const std::string& name, Shape shape, int fan_in);
  Tensor constant(const std::string& name, Shape shape, Real value);

  const std::vector<std::pair<std::string, Tensor>>& entries() const { return entries_; }
  std::vector<Tensor> tensors() const;
  const Tensor& get(const std::string& name) const;
  Tensor& get(const std::string& name);
  std::size_t count() const;

 private:
  Tensor add(const std::string& name, Shape shape, std::vector<Real> values);
  std::uint64_t seed_;
  std::vector<std::pair<std::string, Tensor>> entries_;
};

std::uint64_t derive_seed(std::uint64_t seed, std::string_view tag);

struct Conv {
  Tensor weight, bias;
  int stride = 1, pad = 0;

  static Conv make(ParamStore& ps, const std::string& name, int cin, int cout, int kernel,
                   int stride = 1);
  Tensor operator()(const Tensor& x) const {
    return ops::conv2d(x, weight, bias, {stride, pad});
  }
  int in_channels() const { return weight.dim(1); }
  int out_channels() const { return weight.dim(0); }
  int kernel() const { return weight.dim(2); }
};

/// Mixed instance/layer normalization with per-channel affine.
struct Norm {
  Tensor gamma, beta, mix;

  static Norm make(ParamStore& ps, const std::string& name, int channels, Real gamma_init = 1);
  Tensor operator()(const Tensor& x) const { return ops::switch_norm(x, gamma, beta, mix); }
};

/// y = shortcut(x) + norm2(conv2(relu(norm1(conv1(x))))); the shortcut is a
/// strided 1×1 projection when the shape changes and the identity otherwise.
struct ResBlock {
  Conv conv1, conv2;
  Norm norm1, norm2;
  std::optional<Conv> shortcut;

  static ResBlock make(ParamStore& ps, const std::string& name, int cin, int cout, int stride);
  Tensor operator()(const Tensor& x) const;
};

}  // namespace t2d::nn
