#include "t2d/inference.hpp"

#include <algorithm>
#include <cstdlib>
#include <thread>

namespace t2d {

int thread_count() {
  const char* env = std::getenv("T2D_THREADS");
  if (!env || !*env) return 1;
  char* end = nullptr;
  const long n = std::strtol(env, &end, 10);
  if (*end != '\0' || n < 1) return 1;
  return static_cast<int>(std::min<long>(n, 256));
}

Volume predict_axis(const GroupPredictor& predict, const Volume& vol, Axis axis, int k, int threads) {
  const int n = vol.dims().extent(axis);
  if (k < 1) throw std::invalid_argument("predict_axis: k must be >= 1");
  if (n < k) {
    throw RangeError("predict_axis: " + to_string(axis) + " extent " + std::to_string(n) +
                     " is smaller than k=" + std::to_string(k));
  }
  const int groups = n - k + 1;
  auto [rows, cols] = slice_extent(vol.dims(), axis);
  const std::size_t expect = static_cast<std::size_t>(k) * rows * cols;
  std::vector<GroupPrediction> preds(groups);

  auto run = [&](int begin, int end) {
    for (int i = begin; i < end; ++i) {
      SliceGroup g = extract_group(vol, axis, i + 1, k);
      preds[i].start = i + 1;
      preds[i].values = predict(g);
      if (preds[i].values.size() != expect) {
        throw ShapeError("predict_axis: predictor returned " + std::to_string(preds[i].values.size()) +
                         " values for a group of " + std::to_string(expect));
      }
    }
  };

  const int workers = std::clamp(threads, 1, groups);
  if (workers == 1) {
    run(0, groups);
  } else {
    std::vector<std::exception_ptr> errors(workers);
    std::vector<std::thread> pool;
    for (int t = 0; t < workers; ++t) {
      const int begin = static_cast<int>(static_cast<long long>(groups) * t / workers);
      const int end = static_cast<int>(static_cast<long long>(groups) * (t + 1) / workers);
      pool.emplace_back([&, t, begin, end] {
        try {
          run(begin, end);
        } catch (...) {
          errors[t] = std::current_exception();
        }
      });
    }
    for (auto& th : pool) th.join();
    for (auto& e : errors)
      if (e) std::rethrow_exception(e);
  }
  return regroup(preds, axis, vol.dims(), k);
}

Volume predict_axis(const T2DNet& net, const Volume& vol, Axis axis, int threads) {
  const auto& cfg = net.config();
  auto [rows, cols] = slice_extent(vol.dims(), axis);
  const PadCrop pc(rows, cols, cfg.input_size);
  const int s = cfg.input_size;
  GroupPredictor f = [&](const SliceGroup& g) {
    NoGradGuard guard;
    Tensor x = Tensor::from({g.k, s, s}, pc.apply(g.values, g.k));
    Tensor p = net.forward(x);
    return pc.invert(p.data(), g.k);
  };
  return predict_axis(f, vol, axis, cfg.k, threads);
}

Volume binarize(const Volume& p, Real threshold) {
  Volume out(p.dims(), VolumeKind::Mask);
  auto& dst = out.voxels();
  const auto& src = p.voxels();
  for (std::size_t i = 0; i < src.size(); ++i) dst[i] = src[i] >= threshold ? Real(1) : Real(0);
  return out;
}

namespace {
void require_same_dims(const Volume& a, const Volume& b, const Volume& c, const char* what) {
  if (!(a.dims() == b.dims()) || !(a.dims() == c.dims())) {
    throw std::invalid_argument(std::string(what) + ": volume dims differ");
  }
}
}  // namespace

Volume fuse_views(const Volume& zc, const Volume& zs, const Volume& za) {
  require_same_dims(zc, zs, za, "fuse_views");
  for (const Volume* z : {&zc, &zs, &za}) {
    if (z->kind() != VolumeKind::Mask) throw std::invalid_argument("fuse_views: inputs must be masks");
  }
  Volume out(zc.dims(), VolumeKind::Mask);
  auto& dst = out.voxels();
  for (std::size_t i = 0; i < dst.size(); ++i) {
    const int votes = (zc.voxels()[i] != 0) + (zs.voxels()[i] != 0) + (za.voxels()[i] != 0);
    dst[i] = votes >= 2 ? Real(1) : Real(0);
  }
  return out;
}

Volume fuse_mean(const Volume& pc, const Volume& ps, const Volume& pa) {
  require_same_dims(pc, ps, pa, "fuse_mean");
  Volume out(pc.dims(), VolumeKind::Probability);
  auto& dst = out.voxels();
  for (std::size_t i = 0; i < dst.size(); ++i) {
    dst[i] = (pc.voxels()[i] + ps.voxels()[i] + pa.voxels()[i]) / Real(3);
  }
  return out;
}

}  // namespace t2d
