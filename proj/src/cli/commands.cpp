#include "t2d/cli.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <random>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"
#include "t2d/binary_io.hpp"
#include "t2d/checkpoint.hpp"
#include "t2d/experiment.hpp"
#include "t2d/inference.hpp"
#include "t2d/metrics.hpp"
#include "t2d/phantom.hpp"
#include "t2d/training.hpp"
#include "t2d/volume_io.hpp"

namespace fs = std::filesystem;

namespace t2d {
namespace {

enum class Command { Generate, Train, Predict, Evaluate, Ablate, Bench };

KvConfig defaults_for(Command cmd) {
  KvConfig kv;
  kv.set("run.seed", "0");
  const bool phantom = cmd == Command::Generate || cmd == Command::Ablate;
  const bool model = cmd == Command::Train || cmd == Command::Ablate || cmd == Command::Bench;
  const bool training = cmd == Command::Train || cmd == Command::Ablate;
  if (phantom) PhantomConfig{}.to_kv(kv);
  if (model) ModelConfig{}.to_kv(kv);
  if (training) TrainConfig{}.to_kv(kv);
  switch (cmd) {
    case Command::Generate:
      kv.set("dataset.n", "50");
      kv.set("dataset.train_fraction", "0.8");
      break;
    case Command::Predict:
      kv.set("predict.checkpoint", "");
      kv.set("predict.checkpoint_coronal", "");
      kv.set("predict.checkpoint_sagittal", "");
      kv.set("predict.checkpoint_axial", "");
      kv.set("predict.volume", "");
      kv.set("predict.split", "test");
      kv.set("predict.view", "three");
      kv.set("predict.threshold", "0.5");
      kv.set("predict.fusion", "vote");
      break;
    case Command::Evaluate:
      kv.set("evaluate.pred", "");
      kv.set("evaluate.gt", "");
      kv.set("evaluate.split", "test");
      kv.set("evaluate.threshold", "0.5");
      break;
    case Command::Ablate:
      kv.set("ablate.train_volumes", "40");
      kv.set("ablate.test_volumes", "10");
      kv.set("ablate.modes", "plain,esm,esm_concat,esm_dot,esm_ssa");
      kv.set("ablate.ks", "3,6,9,12,15");
      kv.set("ablate.axes", "coronal,sagittal,axial");
      break;
    case Command::Bench:
      kv.set("bench.h", "512");
      kv.set("bench.w", "512");
      kv.set("bench.d", "394");
      kv.set("bench.patch_h", "128");
      kv.set("bench.patch_w", "128");
      kv.set("bench.patch_d", "64");
      kv.set("bench.stride_h", "32");
      kv.set("bench.stride_w", "32");
      kv.set("bench.stride_d", "16");
      kv.set("bench.k", "15");
      kv.set("bench.axis", "axial");
      kv.set("bench.measure", "false");
      break;
    default:
      break;
  }
  return kv;
}

struct Resolved {
  KvConfig kv;
  fs::path out;
};

Resolved resolve(Command cmd, const std::string& config_path, const std::optional<long long>& seed,
                 const std::string& out, const std::vector<std::string>& extras) {
  const KvConfig defaults = defaults_for(cmd);
  KvConfig user;
  if (!config_path.empty()) user.merge(KvConfig::load(config_path));
  for (const auto& arg : extras) {
    const auto eq = arg.find('=');
    if (arg.rfind("--", 0) != 0 || eq == std::string::npos || arg.find('.') > eq) {
      throw ConfigError(arg, "unrecognized argument (overrides take the form --section.key=value)");
    }
    user.set(arg.substr(2, eq - 2), arg.substr(eq + 1));
  }
  if (seed) user.set("run.seed", std::to_string(*seed));
  user.reject_unknown(defaults);

  Resolved r;
  r.kv = defaults;
  r.kv.merge(user);
  const long long base = r.kv.get_int("run.seed", 0);
  const std::pair<const char*, long long> fanout[] = {{"phantom.seed", 0}, {"model.seed", 1}, {"train.seed", 2}};
  for (const auto& [key, offset] : fanout) {
    if (defaults.has(key) && !user.has(key)) r.kv.set(key, std::to_string(base + offset));
  }
  if (defaults.has("train.k") && !user.has("train.k")) r.kv.set("train.k", r.kv.raw("model.k"));
  r.out = out;
  return r;
}

void write_snapshot(const Resolved& r) {
  fs::create_directories(r.out);
  std::ofstream(r.out / "resolved.cfg") << r.kv.to_text();
}

fs::path require_path(const KvConfig& kv, const std::string& key) {
  const std::string v = kv.get_string(key, "");
  if (v.empty()) throw ConfigError(key, "is required");
  if (!fs::exists(v)) throw ConfigError(key, "path \"" + v + "\" does not exist");
  return v;
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  for (std::string item; std::getline(ss, item, ',');) {
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

std::vector<Axis> parse_axes(const KvConfig& kv, const std::string& key) {
  std::vector<Axis> axes;
  for (const auto& a : split_list(kv.raw(key))) {
    try {
      axes.push_back(parse_axis(a));
    } catch (const std::invalid_argument& e) {
      throw ConfigError(key, e.what());
    }
  }
  if (axes.empty()) throw ConfigError(key, "lists no axis");
  return axes;
}

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4f", v);
  return buf;
}

int cmd_generate(const Resolved& r) {
  PhantomConfig pc = PhantomConfig::from_kv(r.kv);
  pc.validate();
  const int n = static_cast<int>(r.kv.get_int("dataset.n", 50));
  if (n < 2) throw ConfigError("dataset.n", "must be >= 2");
  const auto entries = make_dataset(n, pc, r.kv.get_double("dataset.train_fraction", 0.8));
  write_snapshot(r);
  write_dataset(r.out, entries, pc, thread_count());
  std::cout << "wrote " << entries.size() << " volumes to " << r.out.string() << "\n";
  return 0;
}

int cmd_train(const Resolved& r) {
  ModelConfig mc = ModelConfig::from_kv(r.kv);
  mc.validate();
  TrainConfig tc = TrainConfig::from_kv(r.kv);
  tc.validate();
  if (tc.k != mc.k) throw ConfigError("train.k", "must equal model.k");
  const fs::path data_dir = require_path(r.kv, "train.dataset");
  if (!fs::exists(data_dir / "manifest.tsv")) throw ConfigError("train.dataset", "has no manifest.tsv");
  write_snapshot(r);
  ExperimentData data = load_dataset(data_dir);
  T2DNet net = T2DNet::build(mc);
  std::cout << "model " << to_string(mc.fusion_mode) << " k=" << mc.k << " parameters=" << net.parameter_count()
            << "\n";
  const TrainResult res = train(net, data.train, tc, r.out);
  std::cout << "final loss " << fmt(res.curve.back().loss) << ", best moving average " << fmt(res.best_loss)
            << " at iteration " << res.best_iteration << "\n";
  return 0;
}

std::string stem_of(const fs::path& p) {
  std::string name = p.filename().string();
  for (const char* suffix : {".image.t2dv", ".t2dv"}) {
    const std::string s = suffix;
    if (name.size() > s.size() && name.compare(name.size() - s.size(), s.size(), s) == 0) {
      return name.substr(0, name.size() - s.size());
    }
  }
  return name;
}

int cmd_predict(const Resolved& r) {
  const fs::path input = require_path(r.kv, "predict.volume");
  const std::string view = r.kv.raw("predict.view");
  const std::string fusion = r.kv.raw("predict.fusion");
  if (fusion != "vote" && fusion != "mean") throw ConfigError("predict.fusion", "must be vote or mean");
  const double threshold = r.kv.get_double("predict.threshold", 0.5);
  std::vector<Axis> axes;
  if (view == "three") {
    axes.assign(kAllAxes.begin(), kAllAxes.end());
  } else {
    try {
      axes.push_back(parse_axis(view));
    } catch (const std::invalid_argument& e) {
      throw ConfigError("predict.view", e.what());
    }
  }
  std::vector<T2DNet> nets;
  for (Axis a : axes) {
    const std::string key = "predict.checkpoint_" + to_string(a);
    nets.push_back(load_checkpoint(r.kv.raw(key).empty() ? require_path(r.kv, "predict.checkpoint")
                                                            : require_path(r.kv, key)));
  }

  std::vector<std::pair<std::string, fs::path>> jobs;
  if (fs::is_directory(input)) {
    const auto bytes = io::read_file(input / "manifest.tsv");
    const std::string split = r.kv.raw("predict.split");
    if (split != "test" && split != "train" && split != "all") {
      throw ConfigError("predict.split", "must be test, train or all");
    }
    for (const auto& e : parse_manifest(std::string(bytes.begin(), bytes.end()))) {
      if (split == "all" || (split == "train") == e.train) jobs.emplace_back(e.name, image_path(input, e.name));
    }
  } else {
    jobs.emplace_back(stem_of(input), input);
  }

  write_snapshot(r);
  const int threads = thread_count();
  for (const auto& [name, path] : jobs) {
    const Volume vol = read_volume(path);
    std::vector<Volume> probs;
    CostReport cost;
    cost.scheme = "thick2d";
    for (std::size_t i = 0; i < axes.size(); ++i) {
      probs.push_back(predict_axis(nets[i], vol, axes[i], threads));
      write_volume(r.out / (name + "." + to_string(axes[i]) + ".prob.t2dv"), probs.back());
      const auto& mc = nets[i].config();
      const std::uint64_t windows = static_cast<std::uint64_t>(vol.dims().extent(axes[i]) - mc.k + 1);
      cost.windows += windows;
      cost.total_macs += windows * network_macs(mc, mc.input_size);
    }
    cost.macs_per_window = cost.windows ? cost.total_macs / cost.windows : 0;
    if (axes.size() == 3) {
      const Volume fused = fusion == "vote" ? fuse_views(binarize(probs[0], threshold), binarize(probs[1], threshold),
                                                         binarize(probs[2], threshold))
                                            : binarize(fuse_mean(probs[0], probs[1], probs[2]), threshold);
      write_volume(r.out / (name + ".fused.mask.t2dv"), fused);
    } else {
      write_volume(r.out / (name + "." + to_string(axes[0]) + ".mask.t2dv"), binarize(probs[0], threshold));
    }
    std::ofstream(r.out / (name + ".cost.json")) << cost.to_json() << "\n";
    std::cout << "predicted " << name << "\n";
  }
  return 0;
}

int cmd_evaluate(const Resolved& r) {
  const fs::path pred = require_path(r.kv, "evaluate.pred");
  const fs::path gt = require_path(r.kv, "evaluate.gt");
  const std::string split = r.kv.raw("evaluate.split");
  if (split != "test" && split != "train" && split != "all") {
    throw ConfigError("evaluate.split", "must be test, train or all");
  }
  const double threshold = r.kv.get_double("evaluate.threshold", 0.5);
  const auto bytes = io::read_file(gt / "manifest.tsv");
  write_snapshot(r);
  const double nan = std::numeric_limits<double>::quiet_NaN();
  EvalReport report;
  for (const auto& e : parse_manifest(std::string(bytes.begin(), bytes.end()))) {
    if (!(split == "all" || (split == "train") == e.train)) continue;
    const Volume label = read_volume(mask_path(gt, e.name));
    EvalRow row;
    row.volume = e.name;
    double* cols[] = {&row.dsc_c, &row.dsc_s, &row.dsc_a};
    std::optional<Volume> fallback;
    for (int s = 0; s < 3; ++s) {
      const fs::path p = pred / (e.name + "." + to_string(kAllAxes[s]) + ".prob.t2dv");
      if (!fs::exists(p)) {
        *cols[s] = nan;
        continue;
      }
      const Volume m = binarize(read_volume(p), threshold);
      *cols[s] = dsc(label, m);
      if (!fallback) fallback = m;
    }
    const fs::path fused = pred / (e.name + ".fused.mask.t2dv");
    Volume mask;
    if (fs::exists(fused)) {
      mask = read_volume(fused);
    } else if (fallback) {
      mask = *fallback;
    } else {
      throw std::runtime_error("no prediction for " + e.name + " in " + pred.string());
    }
    row.dsc_f = dsc(label, mask);
    row.similarity = inter_slice_similarity(mask, label);
    row.similarity_normalized = inter_slice_similarity_normalized(mask, label);
    const fs::path cost = pred / (e.name + ".cost.json");
    if (fs::exists(cost)) {
      std::ifstream in(cost);
      std::stringstream ss;
      ss << in.rdbuf();
      const CostReport c = CostReport::from_json(ss.str());
      row.windows = c.windows;
      row.total_macs = c.total_macs;
    }
    report.rows.push_back(row);
  }
  const std::string csv = report.to_csv();
  std::ofstream(r.out / "eval.csv") << csv;
  std::cout << csv;
  return 0;
}

int cmd_ablate(const Resolved& r) {
  PhantomConfig pc = PhantomConfig::from_kv(r.kv);
  pc.validate();
  ModelConfig base = ModelConfig::from_kv(r.kv);
  TrainConfig tc = TrainConfig::from_kv(r.kv);
  const int n_train = static_cast<int>(r.kv.get_int("ablate.train_volumes", 40));
  const int n_test = static_cast<int>(r.kv.get_int("ablate.test_volumes", 10));
  if (n_train < 1) throw ConfigError("ablate.train_volumes", "must be >= 1");
  if (n_test < 1) throw ConfigError("ablate.test_volumes", "must be >= 1");
  std::vector<FusionMode> modes;
  for (const auto& m : split_list(r.kv.raw("ablate.modes"))) {
    try {
      modes.push_back(parse_fusion_mode(m));
    } catch (const ConfigError& e) {
      throw ConfigError("ablate.modes", e.what());
    }
  }
  std::vector<int> ks;
  for (const auto& k : split_list(r.kv.raw("ablate.ks"))) {
    char* end = nullptr;
    const long v = std::strtol(k.c_str(), &end, 10);
    if (*end != '\0' || v < 1) throw ConfigError("ablate.ks", "\"" + k + "\" is not a positive integer");
    ks.push_back(static_cast<int>(v));
  }
  if (modes.empty() || ks.empty()) throw ConfigError("ablate.modes", "mode and k lists must be non-empty");
  const auto axes = parse_axes(r.kv, "ablate.axes");
  std::vector<ModelConfig> runs;
  for (FusionMode m : modes)
    for (int k : ks) {
      ModelConfig mc = base;
      mc.fusion_mode = m;
      mc.k = k;
      mc.validate();
      runs.push_back(mc);
    }
  tc.k = base.k;
  tc.validate();

  write_snapshot(r);
  const int threads = thread_count();
  const ExperimentData data = make_phantom_data(pc, n_train, n_test, threads);
  std::string csv = "mode,k,DSC_C,DSC_S,DSC_A,DSC_F,similarity_fused,similarity_axial\n";
  for (const auto& mc : runs) {
    const ConfigOutcome o = run_config(data, mc, tc, axes, threads);
    char line[256];
    std::snprintf(line, sizeof line, "%s,%d,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g\n", to_string(mc.fusion_mode).c_str(),
                  mc.k, o.dsc_view[0], o.dsc_view[1], o.dsc_view[2], o.dsc_fused, o.similarity_fused,
                  o.similarity_axial);
    csv += line;
    std::cout << to_string(mc.fusion_mode) << " k=" << mc.k << "  DSC_F " << fmt(o.dsc_fused) << "  ("
              << fmt(o.seconds) << " s)\n";
  }
  std::ofstream(r.out / "ablation.csv") << csv;
  return 0;
}

int cmd_bench(const Resolved& r) {
  ModelConfig mc = ModelConfig::from_kv(r.kv);
  const Dims dims{static_cast<int>(r.kv.get_int("bench.h", 512)), static_cast<int>(r.kv.get_int("bench.w", 512)),
                  static_cast<int>(r.kv.get_int("bench.d", 394))};
  if (dims.h < 1 || dims.w < 1 || dims.d < 1) throw ConfigError("bench.h", "volume extents must be positive");
  Axis axis;
  try {
    axis = parse_axis(r.kv.raw("bench.axis"));
  } catch (const std::invalid_argument& e) {
    throw ConfigError("bench.axis", e.what());
  }
  WindowScheme s2, t2, p3;
  s2.kind = SchemeKind::Slice2d;
  s2.axis = t2.axis = axis;
  t2.kind = SchemeKind::Thick2d;
  t2.k = static_cast<int>(r.kv.get_int("bench.k", 15));
  if (t2.k < 1 || t2.k > dims.extent(axis)) throw ConfigError("bench.k", "must lie in [1, axis extent]");
  if (mc.fusion_mode != FusionMode::Plain && t2.k % mc.g != 0) {
    throw ConfigError("bench.k", "must be a multiple of model.g for fusion mode " + to_string(mc.fusion_mode));
  }
  p3.kind = SchemeKind::Patch3d;
  const char* axes_names[] = {"h", "w", "d"};
  const int extents[] = {dims.h, dims.w, dims.d};
  for (int a = 0; a < 3; ++a) {
    p3.patch[a] = static_cast<int>(r.kv.get_int(std::string("bench.patch_") + axes_names[a], 0));
    p3.stride[a] = static_cast<int>(r.kv.get_int(std::string("bench.stride_") + axes_names[a], 0));
    if (p3.patch[a] < 1 || p3.patch[a] > extents[a]) {
      throw ConfigError(std::string("bench.patch_") + axes_names[a], "must lie in [1, volume extent]");
    }
    if (p3.stride[a] < 1) throw ConfigError(std::string("bench.stride_") + axes_names[a], "must be >= 1");
  }
  write_snapshot(r);

  std::vector<CostReport> reports;
  for (const auto& s : {s2, t2, p3}) reports.push_back(estimate_cost(dims, s, mc));
  if (r.kv.get_bool("bench.measure", false)) {
    // Wall time of one desk-size forward, scaled by each 2D scheme's window count.
    for (int i = 0; i < 2; ++i) {
      ModelConfig c = mc;
      if (i == 0) {
        c.fusion_mode = FusionMode::Plain;
        c.k = 1;
      } else {
        c.k = t2.k;
      }
      const T2DNet net = T2DNet::build(c);
      std::mt19937_64 rng(1);
      std::uniform_real_distribution<double> u(0, 1);
      std::vector<Real> x(static_cast<std::size_t>(c.k) * c.input_size * c.input_size);
      for (auto& v : x) v = static_cast<Real>(u(rng));
      NoGradGuard guard;
      const auto t0 = std::chrono::steady_clock::now();
      net.forward(Tensor::from({c.k, c.input_size, c.input_size}, x));
      const double ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
      reports[i].wall_ms = ms * static_cast<double>(reports[i].windows);
    }
  }
  nlohmann::ordered_json arr = nlohmann::ordered_json::array();
  for (const auto& rep : reports) arr.push_back(nlohmann::ordered_json::parse(rep.to_json()));
  std::ofstream(r.out / "bench.json") << arr.dump(2) << "\n";
  char line[128];
  std::snprintf(line, sizeof line, "%-8s %10s %18s %22s\n", "scheme", "windows", "macs_per_window", "total_macs");
  std::cout << line;
  for (const auto& rep : reports) {
    std::snprintf(line, sizeof line, "%-8s %10llu %18llu %22llu\n", rep.scheme.c_str(),
                  static_cast<unsigned long long>(rep.windows), static_cast<unsigned long long>(rep.macs_per_window),
                  static_cast<unsigned long long>(rep.total_macs));
    std::cout << line;
  }
  std::cout << "thick2d single view " << (reports[1].total_macs < reports[2].total_macs ? "<" : ">=")
            << " patch3d in total MACs\n";
  return 0;
}

}  // namespace

int run_cli(int argc, char** argv) {
  CLI::App app{"t2d: thickened-2D volumetric segmentation on synthetic phantoms"};
  app.require_subcommand(1);
  std::string config_path;
  std::optional<long long> seed;
  std::string out = "out";

  struct Sub {
    Command cmd;
    CLI::App* app;
  };
  std::vector<Sub> subs;
  const std::pair<const char*, const char*> names[] = {
      {"generate", "write a phantom dataset"},
      {"train", "train one network on a dataset"},
      {"predict", "predict probability and mask volumes"},
      {"evaluate", "score predictions against ground truth"},
      {"ablate", "train and score fusion modes over slice thicknesses"},
      {"bench", "compare sliding-window cost models"}};
  for (int i = 0; i < 6; ++i) {
    CLI::App* s = app.add_subcommand(names[i].first, names[i].second);
    s->allow_extras();
    s->add_option("--config", config_path, "key=value configuration file");
    s->add_option("--seed", seed, "top-level seed");
    s->add_option("--out", out, "output directory");
    subs.push_back({static_cast<Command>(i), s});
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    for (const auto& s : subs) {
      if (!s.app->parsed()) continue;
      const Resolved r = resolve(s.cmd, config_path, seed, out, s.app->remaining());
      switch (s.cmd) {
        case Command::Generate: return cmd_generate(r);
        case Command::Train: return cmd_train(r);
        case Command::Predict: return cmd_predict(r);
        case Command::Evaluate: return cmd_evaluate(r);
        case Command::Ablate: return cmd_ablate(r);
        case Command::Bench: return cmd_bench(r);
      }
    }
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 1;
}

}  // namespace t2d
