#include "t2d/training.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <random>
#include <sstream>

#include "t2d/checkpoint.hpp"
#include "t2d/layers.hpp"
#include "t2d/optim.hpp"

namespace t2d {

Tensor dsc_loss(const Tensor& p, const Tensor& y, Real eps) {
  if (p.shape() != y.shape()) {
    throw ShapeError("dsc_loss: prediction " + shape_str(p.shape()) + " vs label " + shape_str(y.shape()));
  }
  if (p.rank() != 3) throw ShapeError("dsc_loss: expected k×H×W, got " + shape_str(p.shape()));
  const int k = p.dim(0);
  const std::size_t plane = p.size() / k;
  auto pv = p.data();
  auto yv = y.data();
  std::vector<Real> inter(k, 0), denom(k, 0);
  Real loss = 0;
  for (int c = 0; c < k; ++c) {
    Real a = 0, b = 0;
    for (std::size_t i = c * plane; i < (c + 1) * plane; ++i) {
      a += yv[i] * pv[i];
      b += yv[i] + pv[i];
    }
    inter[c] = a;
    denom[c] = b;
    loss += Real(1) - (2 * a + eps) / (b + eps);
  }
  loss /= k;
  return Tensor::make_result({1}, {loss}, {p, y}, [=](Node& n) {
    if (!n.wants_grad(0)) return;
    auto& g = n.input(0)->grad;
    const auto& Y = n.input(1)->value;
    const Real up = n.grad[0] / k;
    for (int c = 0; c < k; ++c) {
      const Real num = 2 * inter[c] + eps;
      const Real den = denom[c] + eps;
      for (std::size_t i = c * plane; i < (c + 1) * plane; ++i) {
        g[i] -= up * (2 * Y[i] * den - num) / (den * den);
      }
    }
  });
}

void TrainConfig::validate() const {
  if (iterations <= 0) throw ConfigError("train.iterations", "must be > 0");
  if (batch_size < 1) throw ConfigError("train.batch_size", "must be >= 1");
  if (!(base_lr > 0)) throw ConfigError("train.base_lr", "must be > 0");
  if (momentum < 0 || momentum >= 1) throw ConfigError("train.momentum", "must lie in [0, 1)");
  if (weight_decay < 0) throw ConfigError("train.weight_decay", "must be >= 0");
  if (k < 1) throw ConfigError("train.k", "must be >= 1");
  if (eval_every < 1) throw ConfigError("train.eval_every", "must be >= 1");
}

void TrainConfig::to_kv(KvConfig& kv, const std::string& p) const {
  kv.set(p + "iterations", std::to_string(iterations));
  kv.set(p + "batch_size", std::to_string(batch_size));
  kv.set(p + "base_lr", format_real(base_lr));
  kv.set(p + "momentum", format_real(momentum));
  kv.set(p + "weight_decay", format_real(weight_decay));
  kv.set(p + "seed", std::to_string(seed));
  kv.set(p + "axis", to_string(axis));
  kv.set(p + "k", std::to_string(k));
  kv.set(p + "dataset", dataset);
  kv.set(p + "eval_every", std::to_string(eval_every));
}

TrainConfig TrainConfig::from_kv(const KvConfig& kv, const std::string& p) {
  TrainConfig c;
  c.iterations = kv.get_int(p + "iterations", c.iterations);
  c.batch_size = static_cast<int>(kv.get_int(p + "batch_size", c.batch_size));
  c.base_lr = kv.get_double(p + "base_lr", c.base_lr);
  c.momentum = kv.get_double(p + "momentum", c.momentum);
  c.weight_decay = kv.get_double(p + "weight_decay", c.weight_decay);
  c.seed = static_cast<std::uint64_t>(kv.get_int(p + "seed", static_cast<long long>(c.seed)));
  try {
    c.axis = parse_axis(kv.get_string(p + "axis", to_string(c.axis)));
  } catch (const std::invalid_argument& e) {
    throw ConfigError(p + "axis", e.what());
  }
  c.k = static_cast<int>(kv.get_int(p + "k", c.k));
  c.dataset = kv.get_string(p + "dataset", c.dataset);
  c.eval_every = static_cast<int>(kv.get_int(p + "eval_every", c.eval_every));
  return c;
}

GroupSampler::GroupSampler(const std::vector<LabeledVolume>& data, Axis axis, int k, std::uint64_t seed)
    : seed_(seed) {
  for (std::size_t v = 0; v < data.size(); ++v) {
    const int n = data[v].image.dims().extent(axis);
    for (int d = 1; d + k - 1 <= n; ++d) pairs_.emplace_back(v, d);
  }
  if (pairs_.empty()) {
    throw std::invalid_argument("sampler: no " + to_string(axis) + " group of thickness " +
                                std::to_string(k) + " fits the data");
  }
  reshuffle();
}

void GroupSampler::reshuffle() {
  order_ = pairs_;
  std::mt19937_64 rng(nn::derive_seed(seed_, "epoch." + std::to_string(epoch_)));
  std::shuffle(order_.begin(), order_.end(), rng);
  cursor_ = 0;
}

std::pair<std::size_t, int> GroupSampler::next() {
  if (cursor_ == order_.size()) {
    ++epoch_;
    reshuffle();
  }
  return order_[cursor_++];
}

SliceGroupBatch make_batch(const std::vector<LabeledVolume>& data,
                           const std::vector<std::pair<std::size_t, int>>& picks, Axis axis, int k,
                           int size) {
  SliceGroupBatch b;
  b.axis = axis;
  b.k = k;
  for (const auto& [v, d] : picks) {
    const auto& lv = data.at(v);
    if (!(lv.image.dims() == lv.label.dims())) {
      throw std::invalid_argument("volume " + std::to_string(v) + ": image and label dims differ");
    }
    SliceGroup x = extract_group(lv.image, axis, d, k);
    SliceGroup y = extract_group(lv.label, axis, d, k);
    PadCrop pc(x.rows, x.cols, size);
    b.starts.push_back(d);
    b.data.push_back(Tensor::from({k, size, size}, pc.apply(x.values, k)));
    b.labels.push_back(Tensor::from({k, size, size}, pc.apply(y.values, k)));
  }
  return b;
}

double evaluate_loss(const T2DNet& net, const SliceGroupBatch& batch) {
  NoGradGuard guard;
  double total = 0;
  for (std::size_t i = 0; i < batch.data.size(); ++i) {
    total += dsc_loss(net.forward(batch.data[i]), batch.labels[i]).item();
  }
  return total / static_cast<double>(batch.data.size());
}

void write_loss_csv(const std::filesystem::path& path, const std::vector<LossRecord>& curve) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream f(path);
  if (!f) throw std::runtime_error("cannot write " + path.string());
  f << "iteration,lr,loss\n";
  char buf[96];
  for (const auto& r : curve) {
    std::snprintf(buf, sizeof buf, "%lld,%.17g,%.17g\n", static_cast<long long>(r.iteration), r.lr, r.loss);
    f << buf;
  }
}

std::vector<LossRecord> read_loss_csv(const std::filesystem::path& path) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("cannot read " + path.string());
  std::string line;
  std::getline(f, line);
  std::vector<LossRecord> out;
  while (std::getline(f, line)) {
    if (line.empty()) continue;
    LossRecord r;
    char* end = nullptr;
    r.iteration = std::strtoll(line.c_str(), &end, 10);
    r.lr = std::strtod(end + 1, &end);
    r.loss = std::strtod(end + 1, &end);
    out.push_back(r);
  }
  return out;
}

TrainResult train(T2DNet& net, const std::vector<LabeledVolume>& data, const TrainConfig& cfg,
                  const std::optional<std::filesystem::path>& out_dir) {
  cfg.validate();
  if (cfg.k != net.config().k) {
    throw ConfigError("train.k", "is " + std::to_string(cfg.k) + " but the model expects k=" +
                                     std::to_string(net.config().k));
  }
  if (data.empty()) throw std::invalid_argument("train: no training volumes");

  GroupSampler sampler(data, cfg.axis, cfg.k, nn::derive_seed(cfg.seed, "sampler"));
  std::vector<Tensor> params = net.parameters();
  OptimizerState state(params, SgdOptions{static_cast<Real>(cfg.momentum), static_cast<Real>(cfg.weight_decay)});
  const int size = net.config().input_size;
  const Real inv_batch = Real(1) / cfg.batch_size;

  TrainResult result;
  result.curve.reserve(static_cast<std::size_t>(cfg.iterations));
  double window_sum = 0;
  for (std::int64_t it = 0; it < cfg.iterations; ++it) {
    const Real lr = lr_schedule(it, cfg.iterations, static_cast<Real>(cfg.base_lr));
    std::vector<std::pair<std::size_t, int>> picks;
    for (int i = 0; i < cfg.batch_size; ++i) picks.push_back(sampler.next());
    SliceGroupBatch batch = make_batch(data, picks, cfg.axis, cfg.k, size);

    net.zero_grad();
    double loss = 0;
    for (std::size_t i = 0; i < batch.data.size(); ++i) {
      Tensor l = dsc_loss(net.forward(batch.data[i]), batch.labels[i]);
      loss += l.item();
      ops::scale(l, inv_batch).backward();
    }
    loss *= inv_batch;
    if (!std::isfinite(loss)) {
      throw TrainingError("loss became non-finite at iteration " + std::to_string(it) + " (lr " +
                          format_real(lr) + "); lower train.base_lr and retry");
    }
    sgd_step(params, state, lr);
    result.curve.push_back({it, static_cast<double>(lr), loss});

    window_sum += loss;
    if (it >= cfg.eval_every) window_sum -= result.curve[it - cfg.eval_every].loss;
    if (it + 1 >= cfg.eval_every && (it + 1) % cfg.eval_every == 0) {
      const double avg = window_sum / cfg.eval_every;
      if (result.best_iteration < 0 || avg < result.best_loss) {
        result.best_loss = avg;
        result.best_iteration = it;
        if (out_dir) save_checkpoint(*out_dir / "best.t2dc", net);
      }
    }
  }
  if (out_dir) {
    if (result.best_iteration < 0) save_checkpoint(*out_dir / "best.t2dc", net);
    save_checkpoint(*out_dir / "final.t2dc", net);
    write_loss_csv(*out_dir / "loss.csv", result.curve);
  }
  return result;
}

}  // namespace t2d
