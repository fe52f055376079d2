#pragma once

#include <vector>

#include "dirfocus/dataset/trial.hpp"
#include "dirfocus/models/model.hpp"
#include "dirfocus/nn/optim.hpp"

namespace dirfocus::models {

using SampleRefs = std::vector<const dataset::Sample*>;

struct Batch {
  Tensor eeg;       // [B, C, T]
  Tensor spectrum;  // [B, bins], each row scaled to unit maximum
  std::vector<int> labels;
};

/// Stacks samples [first, first + count) of `samples` into model inputs.
Batch make_batch(const SampleRefs& samples, std::size_t first, std::size_t count, const ModelSpec& spec);

struct EpochRecord {
  int epoch = 0;
  double train_loss = 0.0;
  double val_loss = 0.0;
  double val_balanced_acc = 0.0;
  double learning_rate = 0.0;
};

struct TrainResult {
  std::vector<EpochRecord> history;
  int best_epoch = 0;
  double best_val_balanced_acc = 0.0;
};

/// Adam training with plateau halving on validation loss, per-epoch lr_decay
/// and early stopping on validation balanced accuracy (over the classes the
/// validation set contains). The model ends up holding the weights of the
/// best validation epoch. Throws ParameterError on an empty split.
TrainResult train_fold(Model& model, const SampleRefs& train, const SampleRefs& validation,
                       const nn::TrainConfig& config);

/// Class probabilities [N, n_classes] in evaluation mode.
Eigen::MatrixXd predict_proba(Model& model, const SampleRefs& samples, int batch_size = 64);

/// Probability vector of one sample.
Eigen::VectorXd predict(Model& model, const dataset::Sample& sample);

/// Row-wise argmax.
std::vector<int> argmax_rows(const Eigen::MatrixXd& probabilities);

}  // namespace dirfocus::models
