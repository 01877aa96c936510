#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "t2d/kv_config.hpp"
#include "t2d/model.hpp"
#include "t2d/volume.hpp"

namespace t2d {

/// 1 − (2·ΣYP + ε)/(ΣY + ΣP + ε) for each of the k slices, averaged over
/// slices. Differentiable in P; Y is a constant k×S×S tensor.
Tensor dsc_loss(const Tensor& p, const Tensor& y, Real eps = Real(1));

struct TrainConfig {
  std::int64_t iterations = 2000;
  int batch_size = 8;
  double base_lr = 0.005;
  double momentum = 0.9;
  double weight_decay = 0.0005;
  std::uint64_t seed = 0;
  Axis axis = Axis::Axial;
  int k = 3;
  /// Directory holding the training volumes (cli only).
  std::string dataset;
  /// Window of the moving-average loss used to pick the best checkpoint.
  int eval_every = 50;

  void validate() const;
  void to_kv(KvConfig& kv, const std::string& prefix = "train.") const;
  static TrainConfig from_kv(const KvConfig& kv, const std::string& prefix = "train.");
};

/// Image and ground-truth mask of one volume.
struct LabeledVolume {
  Volume image;
  Volume label;
};

/// Uniform draws over (volume, group start) pairs. Each epoch visits every
/// pair once in an order shuffled by a generator derived from the seed and
/// the epoch number.
class GroupSampler {
 public:
  GroupSampler(const std::vector<LabeledVolume>& data, Axis axis, int k, std::uint64_t seed);
  /// (volume index, 1-based start)
  std::pair<std::size_t, int> next();
  std::size_t epoch_size() const { return pairs_.size(); }
  std::int64_t epoch() const { return epoch_; }

 private:
  void reshuffle();
  std::vector<std::pair<std::size_t, int>> pairs_;
  std::vector<std::pair<std::size_t, int>> order_;
  std::size_t cursor_ = 0;
  std::int64_t epoch_ = 0;
  std::uint64_t seed_;
};

/// Groups of one volume padded or cropped to size×size, with labels.
SliceGroupBatch make_batch(const std::vector<LabeledVolume>& data,
                           const std::vector<std::pair<std::size_t, int>>& picks, Axis axis, int k,
                           int size);

struct LossRecord {
  std::int64_t iteration = 0;
  double lr = 0;
  double loss = 0;
};

struct TrainResult {
  std::vector<LossRecord> curve;
  std::int64_t best_iteration = -1;
  double best_loss = 0;
};

class TrainingError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Writes loss.csv, final.t2dc and best.t2dc into `out_dir` when given.
TrainResult train(T2DNet& net, const std::vector<LabeledVolume>& data, const TrainConfig& cfg,
                  const std::optional<std::filesystem::path>& out_dir = std::nullopt);

/// Mean loss of one forward over a batch, without recording a graph.
double evaluate_loss(const T2DNet& net, const SliceGroupBatch& batch);

void write_loss_csv(const std::filesystem::path& path, const std::vector<LossRecord>& curve);
std::vector<LossRecord> read_loss_csv(const std::filesystem::path& path);

}  // namespace t2d
