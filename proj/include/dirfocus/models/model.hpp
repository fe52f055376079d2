#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <string_view>

#include "dirfocus/nn/layers.hpp"

namespace dirfocus::models {

using nn::Index;
using nn::Tensor;

enum class ModelKind { EegCnn, SpEegCnn, EegLsmCnn, SpEegLsmCnn };

std::string to_string(ModelKind kind);
ModelKind parse_model_kind(std::string_view name);

/// Virtual electrode grid of the spatial mapping.
struct LsmConfig {
  Index rows = 5;
  Index cols = 5;
};

struct ModelSpec {
  ModelKind kind = ModelKind::EegCnn;
  int n_classes = 14;
  Index window_samples = 128;
  Index eeg_channels = 32;
  Index spectrum_bins = 181;
  LsmConfig lsm;
  /// Channel-spanning kernels of the EEG-CNN head and their time extent.
  Index cnn_kernels = 5;
  Index cnn_kernel_time = 17;
  /// 3-D kernels over (grid rows, grid cols, time); the grid axes are padded
  /// to keep their size.
  Index conv3d_kernels = 8;
  std::array<Index, 3> conv3d_kernel = {3, 3, 9};
  /// Average pooling over time; a trailing partial window is kept.
  Index pool_window = 8;
  Index pool_stride = 8;
  Index hidden_units = 32;

  bool uses_spectrum() const { return kind == ModelKind::SpEegCnn || kind == ModelKind::SpEegLsmCnn; }
  bool uses_lsm() const { return kind == ModelKind::EegLsmCnn || kind == ModelKind::SpEegLsmCnn; }
  /// Width of the fusion FC: grid size for LSM variants, channel count otherwise.
  Index fusion_width() const { return uses_lsm() ? lsm.rows * lsm.cols : eeg_channels; }
  void validate() const;
};

/// Learnable spatial mapping: a bias-free 1 x 1 convolution from C channels to
/// rows * cols virtual channels, batch-normalized per virtual channel, then
/// laid row-major on the grid: virtual channel k lands at (k / cols, k % cols).
class Lsm {
 public:
  Lsm() = default;
  Lsm(nn::ParameterStore& store, const std::string& name, Index channels, LsmConfig grid, Rng& rng);
  /// [B, C, T] -> [B, rows, cols, T].
  Tensor forward(const Tensor& x, bool training);
  nn::Conv mapping;  // weight [rows * cols, C, 1]
  nn::BatchNorm norm;

 private:
  LsmConfig grid_;
};

/// FC projection of a spatial spectrum appended to a feature tensor as one
/// extra slice along the time axis.
class FusionBlock {
 public:
  FusionBlock() = default;
  FusionBlock(nn::ParameterStore& store, const std::string& name, Index spectrum_bins, Index width, Rng& rng);
  /// z [B, ..., T] with prod(...) == width, p [B, bins] -> [B, ..., T + 1].
  Tensor forward(const Tensor& z, const Tensor& p) const;
  nn::Linear fc;
};

class Model {
 public:
  Model(const ModelSpec& spec, std::uint64_t seed);
  Model(Model&&) = default;
  Model& operator=(Model&&) = default;

  /// eeg [B, C, T]; spectrum [B, bins] for the Sp variants (ignored otherwise).
  /// Returns logits [B, n_classes].
  Tensor forward(const Tensor& eeg, const Tensor& spectrum, bool training);

  const ModelSpec& spec() const { return spec_; }
  nn::ParameterStore& parameters() { return store_; }
  const nn::ParameterStore& parameters() const { return store_; }

 private:
  ModelSpec spec_;
  nn::ParameterStore store_;
  Lsm lsm_;
  FusionBlock fusion_;
  nn::Conv conv_;
  nn::BatchNorm conv_norm_;
  nn::Linear fc1_, fc2_;
};

/// Length of the time axis entering the first temporal convolution.
Index feature_time_length(const ModelSpec& spec);

}  // namespace dirfocus::models
