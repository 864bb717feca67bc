#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

#include "nsx/codec/model.hpp"

namespace nsx {

/// Training produced a non-finite loss. The model holds the parameters of
/// the last completed epoch when this is thrown.
class DivergenceError : public std::runtime_error {
 public:
  DivergenceError(const std::string& what, int epoch) : std::runtime_error(what), epoch_(epoch) {}
  int epoch() const { return epoch_; }

 private:
  int epoch_;
};

struct TrainConfig {
  int stage = 1;
  int epochs = 500;
  double lr = 1e-4;
  /// After milestones[i] completed epochs the rate is lr * multipliers[i].
  std::vector<int> milestones;
  std::vector<double> multipliers;
  int batch_size = 8;
  int patch_size = 64;
  int views = 1;  // augmented samples drawn per image each epoch
  std::uint64_t seed = 1;
  bool augment = true;  // flips and quarter turns, plus half-resolution when it still covers a patch
  double clip_norm = 1.0;  // global gradient norm limit; 0 disables

  double lr_at(int epoch) const;
  /// Throws std::invalid_argument naming the offending field.
  void validate() const;
  /// Returns false for an unknown key; throws on a malformed value.
  bool set(const std::string& key, const std::string& value);
  std::string to_text() const;

  /// Desk schedules: the long-run milestone fractions applied to `epochs`.
  /// Stage I draws 8 augmented views of every image per epoch.
  static TrainConfig desk_stage1(int epochs = 250);
  static TrainConfig desk_stage2(int epochs = 200);
  /// 5000 epochs at 1e-4, halved after 4000, 4500 and 4750.
  static TrainConfig full_stage1();
  /// 1500 epochs, half and quarter rate after 1200 and 1350.
  static TrainConfig full_stage2();
};

struct EpochStats {
  int epoch = 0;  // 1-based
  double loss = 0;
  double mse = 0;
  double bpp = 0;
  double lr = 0;
};

using EpochCallback = std::function<void(const EpochStats&)>;

/// One epoch is `views` shuffled passes over the images. Optimises
/// the R-D loss with noise quantisation over all stage-I parameters.
std::vector<EpochStats> train_stage1(Model& model, const std::vector<Tensor>& images, const TrainConfig& config,
                                     const EpochCallback& on_epoch = {});

/// Fits the post-processing network to the decoder's own reconstructions
/// with an MSE loss. Stage-I parameters are frozen and verified unchanged.
std::vector<EpochStats> train_stage2(Model& model, const std::vector<Tensor>& images, const TrainConfig& config,
                                     const EpochCallback& on_epoch = {});

/// Scales all gradients down so their joint L2 norm is at most max_norm.
/// Returns the norm before clipping.
double clip_grad_norm(const std::vector<Tensor>& params, double max_norm);

/// Image under one of the 8 symmetries of the square; transform 0 is identity.
Tensor dihedral(const Tensor& image, int transform);
/// 2x box-filter downsampling; odd trailing rows and columns are dropped.
Tensor downsample_half(const Tensor& image);

/// A checkpoint file plus its configuration in `<path>.cfg`.
void save_model(const Model& model, const std::filesystem::path& path);
std::unique_ptr<Model> load_model(const std::filesystem::path& path);

}  // namespace nsx
