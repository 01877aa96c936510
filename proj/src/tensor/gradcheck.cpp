#include "t2d/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "t2d/ops.hpp"

namespace t2d {

GradCheckResult check_gradients(const std::function<Tensor()>& loss_fn, std::vector<Tensor> wrt,
                                const std::vector<std::string>& names, GradCheckOptions opt) {
  for (auto& t : wrt) {
    if (!t.is_leaf() || !t.requires_grad()) {
      throw std::invalid_argument("check_gradients: every checked tensor must be a gradient leaf");
    }
    t.zero_grad();
  }
  loss_fn().backward();
  std::vector<std::vector<Real>> analytic;
  for (auto& t : wrt) analytic.emplace_back(t.grad().begin(), t.grad().end());

  auto probe = [&](std::uint64_t& pattern) {
    NoGradGuard ng;
    ops::reset_relu_pattern();
    Real v = loss_fn().item();
    pattern = ops::relu_pattern();
    return v;
  };
  std::uint64_t base_pattern = 0;
  probe(base_pattern);

  GradCheckResult res;
  std::mt19937_64 rng(opt.seed);
  for (std::size_t j = 0; j < wrt.size(); ++j) {
    auto data = wrt[j].mutable_data();
    std::vector<std::size_t> coords(data.size());
    std::iota(coords.begin(), coords.end(), std::size_t{0});
    if (opt.max_coords_per_tensor && coords.size() > opt.max_coords_per_tensor) {
      std::shuffle(coords.begin(), coords.end(), rng);
      coords.resize(opt.max_coords_per_tensor);
      std::sort(coords.begin(), coords.end());
    }
    for (std::size_t i : coords) {
      const Real orig = data[i];
      std::uint64_t pp = 0, pm = 0;
      data[i] = orig + opt.eps;
      const Real fp = probe(pp);
      data[i] = orig - opt.eps;
      const Real fm = probe(pm);
      data[i] = orig;
      if (pp != base_pattern || pm != base_pattern) {
        ++res.skipped_kinks;
        continue;
      }
      const Real numeric = (fp - fm) / (Real(2) * opt.eps);
      const Real a = analytic[j][i];
      const Real denom = std::max({std::abs(a), std::abs(numeric), opt.floor});
      const Real rel = std::abs(a - numeric) / denom;
      ++res.checked;
      if (rel >= res.max_rel_error) {
        res.max_rel_error = rel;
        res.worst = (j < names.size() ? names[j] : "tensor " + std::to_string(j)) + "[" +
                    std::to_string(i) + "] analytic=" + std::to_string(a) +
                    " numeric=" + std::to_string(numeric);
      }
    }
  }
  ops::stop_relu_pattern();
  return res;
}

}  // namespace t2d
