#pragma once

#include <array>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "t2d/metrics.hpp"
#include "t2d/model.hpp"
#include "t2d/phantom.hpp"
#include "t2d/training.hpp"

namespace t2d {

struct ExperimentData {
  std::vector<LabeledVolume> train, test;
  std::vector<std::string> test_names;
};

/// Phantoms with seeds cfg.seed + i, the first n_train for training.
ExperimentData make_phantom_data(const PhantomConfig& cfg, int n_train, int n_test, int threads = 1);
/// Reads a directory written by write_dataset.
ExperimentData load_dataset(const std::filesystem::path& dir);

struct ConfigOutcome {
  ModelConfig model;
  /// Mean DSC over the test set per view (NaN for views not run) and fused.
  std::array<double, 3> dsc_view{};
  double dsc_fused = 0;
  /// Mean inter-slice similarity along the axial axis, for the fused mask
  /// and for the axial-view mask.
  double similarity_fused = 0, similarity_axial = 0;
  std::vector<EvalRow> rows;
  double seconds = 0;
};

/// Trains one network per axis in `axes` with `train_cfg` (its axis field
/// is overridden), predicts every test volume along that axis, and scores
/// the majority-fused masks. With a single axis the fused mask is that
/// view's mask. Checkpoints and loss curves go to out_dir/<axis>/ if given.
ConfigOutcome run_config(const ExperimentData& data, const ModelConfig& model, const TrainConfig& train_cfg,
                         const std::vector<Axis>& axes, int threads = 1,
                         const std::optional<std::filesystem::path>& out_dir = std::nullopt);

}  // namespace t2d
