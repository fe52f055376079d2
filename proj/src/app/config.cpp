#include "dirfocus/app/config.hpp"

#include <fstream>
#include <initializer_list>

#include "dirfocus/dataset/segment.hpp"
#include "dirfocus/error.hpp"

namespace dirfocus::app {

using nlohmann::json;

namespace {

void check_keys(const json& j, std::initializer_list<const char*> allowed, const std::string& where) {
  if (!j.is_object()) throw ParameterError(where + " must be a JSON object");
  for (const auto& [key, value] : j.items()) {
    bool known = false;
    for (const char* a : allowed) known = known || key == a;
    if (!known) throw ParameterError("unknown key '" + key + "' in " + where);
  }
}

template <typename T>
void read(const json& j, const char* key, T& out, const std::string& where) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw ParameterError("bad value for '" + std::string(key) + "' in " + where + ": " + e.what());
  }
}

}  // namespace

spatial::SpectrumPipeline parse_pipeline(const json& doc) {
  const std::string where = "spectrum settings";
  check_keys(doc, {"analysis_rate", "window_len", "hop", "grid_step_deg", "spacing", "speed_of_sound", "loading"}, where);
  spatial::SpectrumPipeline p;
  read(doc, "analysis_rate", p.analysis_rate, where);
  read(doc, "window_len", p.window_len, where);
  read(doc, "hop", p.hop, where);
  read(doc, "grid_step_deg", p.grid_step_deg, where);
  read(doc, "spacing", p.geometry.spacing, where);
  read(doc, "speed_of_sound", p.geometry.speed_of_sound, where);
  read(doc, "loading", p.mvdr.loading, where);
  p.geometry.validate();
  return p;
}

json to_json(const spatial::SpectrumPipeline& p) {
  return {{"analysis_rate", p.analysis_rate}, {"window_len", p.window_len},          {"hop", p.hop},
          {"grid_step_deg", p.grid_step_deg}, {"spacing", p.geometry.spacing},       {"speed_of_sound", p.geometry.speed_of_sound},
          {"loading", p.mvdr.loading}};
}

dataset::SynthConfig parse_synth(const json& doc) {
  const std::string where = "synth settings";
  check_keys(doc,
             {"n_subjects", "trials_per_subject", "trial_seconds", "snr_db", "planted_eeg_gain", "signature",
              "subject_variability", "n_stimuli", "audio_seconds", "rear_shadow_hz", "rear_delay_scale", "keep_audio"},
             where);
  dataset::SynthConfig c;
  read(doc, "n_subjects", c.n_subjects, where);
  read(doc, "trials_per_subject", c.trials_per_subject, where);
  read(doc, "trial_seconds", c.trial_seconds, where);
  read(doc, "snr_db", c.snr_db, where);
  read(doc, "planted_eeg_gain", c.planted_eeg_gain, where);
  if (doc.contains("signature")) c.signature = dataset::parse_eeg_signature(doc.at("signature").get<std::string>());
  read(doc, "subject_variability", c.subject_variability, where);
  read(doc, "n_stimuli", c.n_stimuli, where);
  read(doc, "audio_seconds", c.audio_seconds, where);
  read(doc, "rear_shadow_hz", c.rear_shadow_hz, where);
  read(doc, "rear_delay_scale", c.rear_delay_scale, where);
  read(doc, "keep_audio", c.keep_audio, where);
  c.validate();
  return c;
}

json to_json(const dataset::SynthConfig& c) {
  return {{"n_subjects", c.n_subjects},
          {"trials_per_subject", c.trials_per_subject},
          {"trial_seconds", c.trial_seconds},
          {"snr_db", c.snr_db},
          {"planted_eeg_gain", c.planted_eeg_gain},
          {"signature", dataset::to_string(c.signature)},
          {"subject_variability", c.subject_variability},
          {"n_stimuli", c.n_stimuli},
          {"audio_seconds", c.audio_seconds},
          {"rear_shadow_hz", c.rear_shadow_hz},
          {"rear_delay_scale", c.rear_delay_scale},
          {"keep_audio", c.keep_audio}};
}

models::ModelSpec parse_model(const json& doc) {
  const std::string where = "model settings";
  check_keys(doc,
             {"kind", "lsm_rows", "lsm_cols", "cnn_kernels", "cnn_kernel_time", "conv3d_kernels", "conv3d_kernel",
              "pool_window", "pool_stride", "hidden_units", "n_classes", "window_samples", "eeg_channels",
              "spectrum_bins"},
             where);
  // n_classes, window_samples, eeg_channels and spectrum_bins are written for
  // reference and recomputed by ExperimentConfig::finalize.
  models::ModelSpec s;
  if (doc.contains("kind")) s.kind = models::parse_model_kind(doc.at("kind").get<std::string>());
  read(doc, "lsm_rows", s.lsm.rows, where);
  read(doc, "lsm_cols", s.lsm.cols, where);
  read(doc, "cnn_kernels", s.cnn_kernels, where);
  read(doc, "cnn_kernel_time", s.cnn_kernel_time, where);
  read(doc, "conv3d_kernels", s.conv3d_kernels, where);
  read(doc, "conv3d_kernel", s.conv3d_kernel, where);
  read(doc, "pool_window", s.pool_window, where);
  read(doc, "pool_stride", s.pool_stride, where);
  read(doc, "hidden_units", s.hidden_units, where);
  return s;
}

json to_json(const models::ModelSpec& s) {
  return {{"kind", models::to_string(s.kind)},
          {"n_classes", s.n_classes},
          {"window_samples", s.window_samples},
          {"eeg_channels", s.eeg_channels},
          {"spectrum_bins", s.spectrum_bins},
          {"lsm_rows", s.lsm.rows},
          {"lsm_cols", s.lsm.cols},
          {"cnn_kernels", s.cnn_kernels},
          {"cnn_kernel_time", s.cnn_kernel_time},
          {"conv3d_kernels", s.conv3d_kernels},
          {"conv3d_kernel", s.conv3d_kernel},
          {"pool_window", s.pool_window},
          {"pool_stride", s.pool_stride},
          {"hidden_units", s.hidden_units}};
}

nn::TrainConfig parse_train(const json& doc) {
  const std::string where = "train settings";
  check_keys(doc,
             {"learning_rate", "lr_decay", "l2_lambda", "batch_size", "max_epochs", "early_stop_patience",
              "plateau_patience", "plateau_factor"},
             where);
  nn::TrainConfig t;
  read(doc, "learning_rate", t.learning_rate, where);
  read(doc, "lr_decay", t.lr_decay, where);
  read(doc, "l2_lambda", t.l2_lambda, where);
  read(doc, "batch_size", t.batch_size, where);
  read(doc, "max_epochs", t.max_epochs, where);
  read(doc, "early_stop_patience", t.early_stop_patience, where);
  read(doc, "plateau_patience", t.plateau_patience, where);
  read(doc, "plateau_factor", t.plateau_factor, where);
  t.validate();
  return t;
}

json to_json(const nn::TrainConfig& t) {
  return {{"learning_rate", t.learning_rate},     {"lr_decay", t.lr_decay},
          {"l2_lambda", t.l2_lambda},             {"batch_size", t.batch_size},
          {"max_epochs", t.max_epochs},           {"early_stop_patience", t.early_stop_patience},
          {"plateau_patience", t.plateau_patience}, {"plateau_factor", t.plateau_factor}};
}

void ExperimentConfig::finalize() {
  if (dataset.has_value() == synth.has_value())
    throw ParameterError("experiment '" + name + "' needs exactly one of \"dataset\" and \"synth\"");
  if (dataset && !std::filesystem::is_directory(*dataset))
    throw DataError("dataset directory " + dataset->string() + " does not exist");
  if (!(window_seconds > 0)) throw ParameterError("window_seconds must be positive");
  model.n_classes = dataset::class_count(labels);
  model.window_samples = dataset::window_samples(window_seconds);
  model.eeg_channels = dataset::kEegChannels;
  model.spectrum_bins = spatial::scan_grid(pipeline.grid_step_deg).size();
  model.validate();
  train.validate();
  if (synth) {
    synth->pipeline = pipeline;
    synth->validate();
  }
  if (eval.n_boot < 1000) throw ParameterError("eval.n_boot must be at least 1000");
  if (!(eval.alpha > 0 && eval.alpha < 1)) throw ParameterError("eval.alpha must lie in (0, 1)");
  if (!(eval.binary_chance > 0 && eval.binary_chance < 1)) throw ParameterError("eval.binary_chance must lie in (0, 1)");
  if (eval.reference_model) {
    auto ref = model;
    ref.kind = *eval.reference_model;
    if (ref.uses_spectrum()) throw ParameterError("the reference model must be an EEG-only architecture");
    ref.validate();
  }
}

ExperimentConfig parse_experiment(const json& doc, const std::filesystem::path& base_dir) {
  const std::string where = "experiment config";
  check_keys(doc,
             {"name", "seed", "dataset", "synth", "spectrum", "labels", "cv", "split", "window_seconds", "model",
              "train", "eval", "out"},
             where);
  ExperimentConfig c;
  read(doc, "name", c.name, where);
  read(doc, "seed", c.seed, where);
  if (doc.contains("dataset")) {
    std::filesystem::path p = doc.at("dataset").get<std::string>();
    c.dataset = p.is_absolute() ? p : base_dir / p;
  }
  if (doc.contains("synth")) c.synth = parse_synth(doc.at("synth"));
  if (doc.contains("spectrum")) c.pipeline = parse_pipeline(doc.at("spectrum"));
  if (doc.contains("labels")) c.labels = dataset::parse_label_paradigm(doc.at("labels").get<std::string>());
  if (doc.contains("cv")) c.cv = dataset::parse_cv_paradigm(doc.at("cv").get<std::string>());
  if (doc.contains("split")) {
    const auto& s = doc.at("split");
    check_keys(s, {"test_per_subject", "val_per_subject", "max_folds"}, "split settings");
    read(s, "test_per_subject", c.split.test_per_subject, "split settings");
    read(s, "val_per_subject", c.split.val_per_subject, "split settings");
    read(s, "max_folds", c.split.max_folds, "split settings");
  }
  c.split.labels = c.labels;
  read(doc, "window_seconds", c.window_seconds, where);
  if (doc.contains("model")) c.model = parse_model(doc.at("model"));
  if (doc.contains("train")) c.train = parse_train(doc.at("train"));
  if (doc.contains("eval")) {
    const auto& e = doc.at("eval");
    check_keys(e, {"n_boot", "alpha", "reference_model", "binary_chance"}, "eval settings");
    read(e, "n_boot", c.eval.n_boot, "eval settings");
    read(e, "alpha", c.eval.alpha, "eval settings");
    read(e, "binary_chance", c.eval.binary_chance, "eval settings");
    if (e.contains("reference_model") && !e.at("reference_model").is_null())
      c.eval.reference_model = models::parse_model_kind(e.at("reference_model").get<std::string>());
  }
  if (doc.contains("out")) {
    std::filesystem::path p = doc.at("out").get<std::string>();
    c.out_dir = p.is_absolute() ? p : base_dir / p;
  } else {
    c.out_dir = base_dir / "results";
  }
  c.train.rng_seed = c.seed;
  c.finalize();
  return c;
}

ExperimentConfig load_experiment(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open experiment config " + path.string());
  json doc;
  try {
    in >> doc;
  } catch (const json::exception& e) {
    throw DataError("malformed experiment config " + path.string() + ": " + e.what());
  }
  return parse_experiment(doc, path.parent_path());
}

json to_json(const ExperimentConfig& c) {
  json j = {{"name", c.name},
            {"seed", c.seed},
            {"spectrum", to_json(c.pipeline)},
            {"labels", dataset::to_string(c.labels)},
            {"cv", dataset::to_string(c.cv)},
            {"split",
             {{"test_per_subject", c.split.test_per_subject},
              {"val_per_subject", c.split.val_per_subject},
              {"max_folds", c.split.max_folds}}},
            {"window_seconds", c.window_seconds},
            {"model", to_json(c.model)},
            {"train", to_json(c.train)},
            {"eval",
             {{"n_boot", c.eval.n_boot},
              {"alpha", c.eval.alpha},
              {"binary_chance", c.eval.binary_chance},
              {"reference_model", c.eval.reference_model ? json(models::to_string(*c.eval.reference_model)) : json()}}}};
  if (c.dataset) j["dataset"] = c.dataset->string();
  if (c.synth) j["synth"] = to_json(*c.synth);
  return j;
}

}  // namespace dirfocus::app
