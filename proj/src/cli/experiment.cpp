#include "t2d/experiment.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <limits>
#include <thread>

#include "t2d/binary_io.hpp"
#include "t2d/inference.hpp"
#include "t2d/volume_io.hpp"

namespace t2d {

ExperimentData make_phantom_data(const PhantomConfig& cfg, int n_train, int n_test, int threads) {
  const int n = n_train + n_test;
  std::vector<Phantom> ph(n);
  auto work = [&](int i) {
    PhantomConfig c = cfg;
    c.seed = cfg.seed + static_cast<std::uint64_t>(i);
    ph[i] = generate(c);
  };
  const int workers = std::clamp(threads, 1, std::max(1, n));
  std::vector<std::thread> pool;
  std::vector<std::exception_ptr> errors(workers);
  for (int t = 0; t < workers; ++t) {
    pool.emplace_back([&, t] {
      try {
        for (int i = t; i < n; i += workers) work(i);
      } catch (...) {
        errors[t] = std::current_exception();
      }
    });
  }
  for (auto& th : pool) th.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);

  ExperimentData d;
  for (int i = 0; i < n; ++i) {
    LabeledVolume lv{std::move(ph[i].image), std::move(ph[i].mask)};
    if (i < n_train) {
      d.train.push_back(std::move(lv));
    } else {
      d.test.push_back(std::move(lv));
      d.test_names.push_back("seed_" + std::to_string(cfg.seed + static_cast<std::uint64_t>(i)));
    }
  }
  return d;
}

ExperimentData load_dataset(const std::filesystem::path& dir) {
  const auto bytes = io::read_file(dir / "manifest.tsv");
  const auto entries = parse_manifest(std::string(bytes.begin(), bytes.end()));
  ExperimentData d;
  for (const auto& e : entries) {
    LabeledVolume lv{read_volume(image_path(dir, e.name)), read_volume(mask_path(dir, e.name))};
    if (e.train) {
      d.train.push_back(std::move(lv));
    } else {
      d.test.push_back(std::move(lv));
      d.test_names.push_back(e.name);
    }
  }
  return d;
}

namespace {
int axis_slot(Axis a) { return a == Axis::Coronal ? 0 : a == Axis::Sagittal ? 1 : 2; }
}  // namespace

ConfigOutcome run_config(const ExperimentData& data, const ModelConfig& model, const TrainConfig& train_cfg,
                         const std::vector<Axis>& axes, int threads,
                         const std::optional<std::filesystem::path>& out_dir) {
  const auto t0 = std::chrono::steady_clock::now();
  const double nan = std::numeric_limits<double>::quiet_NaN();
  ConfigOutcome out;
  out.model = model;
  out.dsc_view = {nan, nan, nan};
  if (axes.empty()) throw std::invalid_argument("run_config: no axes");

  const std::size_t nt = data.test.size();
  std::array<std::vector<Volume>, 3> masks;
  for (Axis axis : axes) {
    TrainConfig tc = train_cfg;
    tc.axis = axis;
    tc.k = model.k;
    T2DNet net = T2DNet::build(model);
    std::optional<std::filesystem::path> dir;
    if (out_dir) dir = *out_dir / to_string(axis);
    train(net, data.train, tc, dir);
    auto& m = masks[axis_slot(axis)];
    for (const auto& lv : data.test) m.push_back(binarize(predict_axis(net, lv.image, axis, threads)));
  }

  double fused_sum = 0, sim_fused = 0, sim_axial = 0;
  std::array<double, 3> view_sum{0, 0, 0};
  for (std::size_t i = 0; i < nt; ++i) {
    const Volume& gt = data.test[i].label;
    EvalRow row;
    row.volume = i < data.test_names.size() ? data.test_names[i] : std::to_string(i);
    double* cols[] = {&row.dsc_c, &row.dsc_s, &row.dsc_a};
    for (int s = 0; s < 3; ++s) {
      *cols[s] = masks[s].empty() ? nan : dsc(gt, masks[s][i]);
      if (!masks[s].empty()) view_sum[s] += *cols[s];
    }
    const Volume& first = masks[axis_slot(axes.front())][i];
    const Volume fused = axes.size() == 3 ? fuse_views(masks[0][i], masks[1][i], masks[2][i]) : first;
    row.dsc_f = dsc(gt, fused);
    row.similarity = inter_slice_similarity(fused, gt);
    row.similarity_normalized = inter_slice_similarity_normalized(fused, gt);
    const Dims& dm = gt.dims();
    for (Axis a : axes) {
      row.windows += static_cast<std::uint64_t>(dm.extent(a) - model.k + 1);
    }
    row.total_macs = row.windows * network_macs(model, model.input_size);
    fused_sum += row.dsc_f;
    sim_fused += row.similarity;
    if (!masks[2].empty()) sim_axial += inter_slice_similarity(masks[2][i], gt);
    out.rows.push_back(row);
  }
  const double n = static_cast<double>(std::max<std::size_t>(1, nt));
  for (int s = 0; s < 3; ++s)
    if (!masks[s].empty()) out.dsc_view[s] = view_sum[s] / n;
  out.dsc_fused = fused_sum / n;
  out.similarity_fused = sim_fused / n;
  out.similarity_axial = masks[2].empty() ? nan : sim_axial / n;
  out.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return out;
}

}  // namespace t2d
