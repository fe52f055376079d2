#include "dirfocus/models/train.hpp"

#include <algorithm>
#include <numeric>

#include "dirfocus/error.hpp"
#include "dirfocus/eval/metrics.hpp"

namespace dirfocus::models {

Batch make_batch(const SampleRefs& samples, std::size_t first, std::size_t count, const ModelSpec& spec) {
  const Index c = spec.eeg_channels, t = spec.window_samples, bins = spec.spectrum_bins;
  const auto n = static_cast<Index>(count);
  Eigen::VectorXd eeg(n * c * t);
  Eigen::VectorXd spec_values = Eigen::VectorXd::Zero(spec.uses_spectrum() ? n * bins : 0);
  Batch batch;
  for (Index i = 0; i < n; ++i) {
    const auto& s = *samples[first + static_cast<std::size_t>(i)];
    if (s.eeg.rows() != c || s.eeg.cols() != t) {
      throw ShapeError("sample of trial " + std::to_string(s.trial_id) + " has EEG " + std::to_string(s.eeg.rows()) +
                       " x " + std::to_string(s.eeg.cols()) + ", model expects " + std::to_string(c) + " x " +
                       std::to_string(t));
    }
    Eigen::Map<Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(eeg.data() + i * c * t, c, t) =
        s.eeg;
    if (spec.uses_spectrum()) {
      if (!s.spectrum || s.spectrum->size() != bins) {
        throw ShapeError("sample of trial " + std::to_string(s.trial_id) + " lacks a " + std::to_string(bins) +
                         "-point spectrum");
      }
      const double peak = s.spectrum->maxCoeff();
      spec_values.segment(i * bins, bins) = peak > 0 ? Eigen::VectorXd(*s.spectrum / peak) : *s.spectrum;
    }
    batch.labels.push_back(s.label);
  }
  batch.eeg = Tensor::from({n, c, t}, std::move(eeg));
  if (spec.uses_spectrum()) batch.spectrum = Tensor::from({n, bins}, std::move(spec_values));
  return batch;
}

namespace {

struct Evaluation {
  double loss = 0.0;
  double balanced_acc = 0.0;
};

Evaluation evaluate(Model& model, const SampleRefs& samples, int batch_size) {
  nn::NoGradGuard no_grad;
  double loss = 0;
  std::vector<int> pred, labels;
  for (std::size_t i = 0; i < samples.size(); i += static_cast<std::size_t>(batch_size)) {
    const auto count = std::min<std::size_t>(static_cast<std::size_t>(batch_size), samples.size() - i);
    const auto batch = make_batch(samples, i, count, model.spec());
    const auto ce = nn::softmax_cross_entropy(model.forward(batch.eeg, batch.spectrum, false), batch.labels);
    loss += ce.loss.item() * static_cast<double>(count);
    const auto p = argmax_rows(ce.probabilities);
    pred.insert(pred.end(), p.begin(), p.end());
    labels.insert(labels.end(), batch.labels.begin(), batch.labels.end());
  }
  return {loss / static_cast<double>(samples.size()),
          eval::balanced_accuracy_present(pred, labels, model.spec().n_classes).balanced_acc};
}

}  // namespace

TrainResult train_fold(Model& model, const SampleRefs& train, const SampleRefs& validation,
                       const nn::TrainConfig& config) {
  config.validate();
  if (train.empty()) throw ParameterError("empty training split");
  if (validation.empty()) throw ParameterError("empty validation split");

  auto& store = model.parameters();
  nn::Adam adam(store.trainable(), config.learning_rate, config.l2_lambda);
  nn::PlateauScheduler plateau(config.plateau_patience, config.plateau_factor);
  nn::EarlyStopping stopper(config.early_stop_patience);
  nn::ParameterStore best = store.clone();
  Rng rng(config.rng_seed);

  TrainResult result;
  std::vector<std::size_t> order(train.size());
  std::iota(order.begin(), order.end(), 0);
  SampleRefs shuffled(train.size());
  for (int epoch = 1; epoch <= config.max_epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    for (std::size_t i = 0; i < order.size(); ++i) shuffled[i] = train[order[i]];
    double train_loss = 0;
    for (std::size_t i = 0; i < shuffled.size(); i += static_cast<std::size_t>(config.batch_size)) {
      const auto count = std::min<std::size_t>(static_cast<std::size_t>(config.batch_size), shuffled.size() - i);
      // A single-sample batch has no batch statistics to normalize with.
      if (count < 2 && i > 0) break;
      const auto batch = make_batch(shuffled, i, count, model.spec());
      adam.zero_grad();
      const auto ce = nn::softmax_cross_entropy(model.forward(batch.eeg, batch.spectrum, true), batch.labels);
      nn::check_finite(ce.loss, "training loss");
      nn::backward(ce.loss);
      adam.step();
      train_loss += ce.loss.item() * static_cast<double>(count);
    }
    const auto val = evaluate(model, validation, std::max(config.batch_size, 64));
    result.history.push_back({epoch, train_loss / static_cast<double>(train.size()), val.loss, val.balanced_acc,
                              adam.learning_rate()});
    if (stopper.observe(val.balanced_acc)) {
      best.load_values(store);
      result.best_epoch = epoch;
      result.best_val_balanced_acc = val.balanced_acc;
    }
    if (stopper.should_stop()) break;
    adam.set_learning_rate(adam.learning_rate() * plateau.observe(val.loss) * config.lr_decay);
  }
  store.load_values(best);
  return result;
}

Eigen::MatrixXd predict_proba(Model& model, const SampleRefs& samples, int batch_size) {
  nn::NoGradGuard no_grad;
  Eigen::MatrixXd out(static_cast<Index>(samples.size()), model.spec().n_classes);
  for (std::size_t i = 0; i < samples.size(); i += static_cast<std::size_t>(batch_size)) {
    const auto count = std::min<std::size_t>(static_cast<std::size_t>(batch_size), samples.size() - i);
    const auto batch = make_batch(samples, i, count, model.spec());
    const auto logits = model.forward(batch.eeg, batch.spectrum, false);
    out.middleRows(static_cast<Index>(i), static_cast<Index>(count)) =
        nn::softmax_rows(Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(
            logits.value().data(), static_cast<Index>(count), model.spec().n_classes));
  }
  return out;
}

Eigen::VectorXd predict(Model& model, const dataset::Sample& sample) {
  return predict_proba(model, SampleRefs{&sample}).row(0).transpose();
}

std::vector<int> argmax_rows(const Eigen::MatrixXd& probabilities) {
  std::vector<int> out;
  for (Index r = 0; r < probabilities.rows(); ++r) {
    Index k = 0;
    probabilities.row(r).maxCoeff(&k);
    out.push_back(static_cast<int>(k));
  }
  return out;
}

}  // namespace dirfocus::models
