#include "t2d/layers.hpp"

#include <cmath>
#include <random>
#include <stdexcept>

namespace t2d::nn {

std::uint64_t derive_seed(std::uint64_t seed, std::string_view tag) {
  std::uint64_t h = 1469598103934665603ull;
  for (char c : tag) h = (h ^ static_cast<unsigned char>(c)) * 1099511628211ull;
  // splitmix64 finalizer
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ull + h;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

Tensor ParamStore::add(const std::string& name, Shape shape, std::vector<Real> values) {
  for (const auto& [n, t] : entries_) {
    if (n == name) throw std::logic_error("duplicate parameter name " + name);
  }
  Tensor t = Tensor::parameter(std::move(shape), std::move(values));
  entries_.emplace_back(name, t);
  return t;
}

Tensor ParamStore::uniform(const std::string& name, Shape shape, int fan_in) {
  std::mt19937_64 rng(derive_seed(seed_, name));
  const double bound = std::sqrt(6.0 / static_cast<double>(fan_in));
  std::uniform_real_distribution<double> dist(-bound, bound);
  std::vector<Real> v(numel(shape));
  for (auto& x : v) x = static_cast<Real>(dist(rng));
  return add(name, std::move(shape), std::move(v));
}

Tensor ParamStore::constant(const std::string& name, Shape shape, Real value) {
  std::vector<Real> v(numel(shape), value);
  return add(name, std::move(shape), std::move(v));
}

std::vector<Tensor> ParamStore::tensors() const {
  std::vector<Tensor> out;
  out.reserve(entries_.size());
  for (const auto& [n, t] : entries_) out.push_back(t);
  return out;
}

const Tensor& ParamStore::get(const std::string& name) const {
  for (const auto& [n, t] : entries_) {
    if (n == name) return t;
  }
  throw std::out_of_range("no parameter named " + name);
}

Tensor& ParamStore::get(const std::string& name) {
  for (auto& [n, t] : entries_) {
    if (n == name) return t;
  }
  throw std::out_of_range("no parameter named " + name);
}

std::size_t ParamStore::count() const {
  std::size_t n = 0;
  for (const auto& [name, t] : entries_) n += t.size();
  return n;
}

Conv Conv::make(ParamStore& ps, const std::string& name, int cin, int cout, int kernel, int stride) {
  Conv c;
  c.weight = ps.uniform(name + ".weight", {cout, cin, kernel, kernel}, cin * kernel * kernel);
  c.bias = ps.constant(name + ".bias", {cout}, 0);
  c.stride = stride;
  c.pad = kernel / 2;
  return c;
}

Norm Norm::make(ParamStore& ps, const std::string& name, int channels, Real gamma_init) {
  Norm n;
  n.gamma = ps.constant(name + ".gamma", {channels}, gamma_init);
  n.beta = ps.constant(name + ".beta", {channels}, 0);
  n.mix = ps.constant(name + ".mix", {2}, 0);
  return n;
}

ResBlock ResBlock::make(ParamStore& ps, const std::string& name, int cin, int cout, int stride) {
  ResBlock b;
  b.conv1 = Conv::make(ps, name + ".conv1", cin, cout, 3, stride);
  b.norm1 = Norm::make(ps, name + ".norm1", cout);
  b.conv2 = Conv::make(ps, name + ".conv2", cout, cout, 3, 1);
  b.norm2 = Norm::make(ps, name + ".norm2", cout);
  if (cin != cout || stride != 1) b.shortcut = Conv::make(ps, name + ".shortcut", cin, cout, 1, stride);
  return b;
}

Tensor ResBlock::operator()(const Tensor& x) const {
  Tensor r = norm2(conv2(ops::relu(norm1(conv1(x)))));
  return ops::add(shortcut ? (*shortcut)(x) : x, r);
}

}  // namespace t2d::nn
