#include "dirfocus/models/model.hpp"

#include "dirfocus/error.hpp"

namespace dirfocus::models {

std::string to_string(ModelKind kind) {
  switch (kind) {
    case ModelKind::EegCnn: return "EEG-CNN";
    case ModelKind::SpEegCnn: return "Sp-EEG-CNN";
    case ModelKind::EegLsmCnn: return "EEG-LSM-CNN";
    case ModelKind::SpEegLsmCnn: return "Sp-EEG-LSM-CNN";
  }
  return "?";
}

ModelKind parse_model_kind(std::string_view name) {
  for (auto k : {ModelKind::EegCnn, ModelKind::SpEegCnn, ModelKind::EegLsmCnn, ModelKind::SpEegLsmCnn})
    if (name == to_string(k)) return k;
  throw ParameterError("unknown model kind '" + std::string(name) +
                       "' (expected EEG-CNN, Sp-EEG-CNN, EEG-LSM-CNN or Sp-EEG-LSM-CNN)");
}

Index feature_time_length(const ModelSpec& spec) { return spec.window_samples + (spec.uses_spectrum() ? 1 : 0); }

namespace {
// Ceil-mode pooling keeps the last conv output, the only one that sees a fused slice.
Index pooled_length(Index conv_out, const ModelSpec& spec) {
  return (conv_out - spec.pool_window + spec.pool_stride - 1) / spec.pool_stride + 1;
}
}  // namespace

void ModelSpec::validate() const {
  if (n_classes < 2) throw ParameterError("n_classes must be >= 2");
  if (window_samples < 1 || eeg_channels < 1 || spectrum_bins < 1) throw ParameterError("model dimensions must be >= 1");
  if (lsm.rows < 1 || lsm.cols < 1) throw ParameterError("LSM grid must be at least 1 x 1");
  if (cnn_kernels < 1 || conv3d_kernels < 1 || hidden_units < 1) throw ParameterError("layer widths must be >= 1");
  if (pool_window < 1 || pool_stride < 1) throw ParameterError("pooling window and stride must be >= 1");
  const Index kt = uses_lsm() ? conv3d_kernel[2] : cnn_kernel_time;
  const Index conv_out = feature_time_length(*this) - kt + 1;
  if (kt < 1 || conv_out < pool_window) {
    throw ParameterError("window of " + std::to_string(window_samples) + " samples is too short for a temporal kernel of " +
                         std::to_string(kt) + " and pooling window " + std::to_string(pool_window));
  }
  if (uses_lsm() && (conv3d_kernel[0] % 2 == 0 || conv3d_kernel[1] % 2 == 0 || conv3d_kernel[0] < 1 || conv3d_kernel[1] < 1))
    throw ParameterError("grid extents of the 3-D kernel must be odd");
}

Lsm::Lsm(nn::ParameterStore& store, const std::string& name, Index channels, LsmConfig grid, Rng& rng)
    : mapping(store, name + ".map", channels, grid.rows * grid.cols, {1}, rng, {}, false),
      norm(store, name + ".bn", grid.rows * grid.cols),
      grid_(grid) {}

Tensor Lsm::forward(const Tensor& x, bool training) {
  if (x.rank() != 3 || x.dim(1) != mapping.weight.dim(1)) {
    throw ShapeError("LSM input " + nn::shape_string(x.shape()) + " does not match mapping kernel " +
                     nn::shape_string(mapping.weight.shape()));
  }
  const Tensor z = norm.forward(mapping.forward(x), training);
  return nn::reshape(z, {x.dim(0), grid_.rows, grid_.cols, x.dim(2)});
}

FusionBlock::FusionBlock(nn::ParameterStore& store, const std::string& name, Index spectrum_bins, Index width, Rng& rng)
    : fc(store, name + ".fc", spectrum_bins, width, rng) {}

Tensor FusionBlock::forward(const Tensor& z, const Tensor& p) const {
  if (z.rank() < 3) throw ShapeError("fusion input " + nn::shape_string(z.shape()) + " needs [B, ..., T]");
  nn::Shape slice = z.shape();
  slice.back() = 1;
  const Index width = nn::numel(slice) / slice[0];
  if (width != fc.out_features()) {
    throw ShapeError("fusion FC width " + std::to_string(fc.out_features()) + " cannot be reshaped to slice " +
                     nn::shape_string(slice));
  }
  if (p.rank() != 2 || p.dim(0) != z.dim(0)) {
    throw ShapeError("spectrum batch " + nn::shape_string(p.shape()) + " does not match features " +
                     nn::shape_string(z.shape()));
  }
  return nn::concat_last(z, nn::reshape(fc.forward(p), slice));
}

Model::Model(const ModelSpec& spec, std::uint64_t seed) : spec_(spec) {
  spec_.validate();
  Rng rng(seed);
  const Index t = feature_time_length(spec_);
  Index flat = 0;
  if (spec_.uses_lsm()) {
    lsm_ = Lsm(store_, "lsm", spec_.eeg_channels, spec_.lsm, rng);
    if (spec_.uses_spectrum()) fusion_ = FusionBlock(store_, "fusion", spec_.spectrum_bins, spec_.fusion_width(), rng);
    const auto& k = spec_.conv3d_kernel;
    conv_ = nn::Conv(store_, "conv3d", 1, spec_.conv3d_kernels, {k[0], k[1], k[2]}, rng, {k[0] / 2, k[1] / 2, 0}, false);
    conv_norm_ = nn::BatchNorm(store_, "conv3d.bn", spec_.conv3d_kernels);
    const Index pooled = pooled_length(t - k[2] + 1, spec_);
    flat = spec_.conv3d_kernels * spec_.lsm.rows * spec_.lsm.cols * pooled;
  } else {
    if (spec_.uses_spectrum()) fusion_ = FusionBlock(store_, "fusion", spec_.spectrum_bins, spec_.fusion_width(), rng);
    conv_ = nn::Conv(store_, "conv", 1, spec_.cnn_kernels, {spec_.eeg_channels, spec_.cnn_kernel_time}, rng, {}, false);
    conv_norm_ = nn::BatchNorm(store_, "conv.bn", spec_.cnn_kernels);
    const Index pooled = pooled_length(t - spec_.cnn_kernel_time + 1, spec_);
    flat = spec_.cnn_kernels * pooled;
  }
  fc1_ = nn::Linear(store_, "fc1", flat, spec_.hidden_units, rng);
  fc2_ = nn::Linear(store_, "fc2", spec_.hidden_units, spec_.n_classes, rng);
}

Tensor Model::forward(const Tensor& eeg, const Tensor& spectrum, bool training) {
  if (eeg.rank() != 3 || eeg.dim(1) != spec_.eeg_channels || eeg.dim(2) != spec_.window_samples) {
    throw ShapeError("EEG batch " + nn::shape_string(eeg.shape()) + " does not match [B, " +
                     std::to_string(spec_.eeg_channels) + ", " + std::to_string(spec_.window_samples) + "]");
  }
  const Index b = eeg.dim(0);
  Tensor h;
  if (spec_.uses_lsm()) {
    Tensor z = lsm_.forward(eeg, training);
    if (spec_.uses_spectrum()) z = fusion_.forward(z, spectrum);
    h = conv_.forward(nn::reshape(z, {b, 1, spec_.lsm.rows, spec_.lsm.cols, z.dim(-1)}));
  } else {
    Tensor z = spec_.uses_spectrum() ? fusion_.forward(eeg, spectrum) : eeg;
    h = conv_.forward(nn::reshape(z, {b, 1, spec_.eeg_channels, z.dim(-1)}));
  }
  h = nn::flatten(nn::avg_pool_last(nn::relu(conv_norm_.forward(h, training)), spec_.pool_window, spec_.pool_stride, true));
  return fc2_.forward(nn::relu(fc1_.forward(h)));
}

}  // namespace dirfocus::models
