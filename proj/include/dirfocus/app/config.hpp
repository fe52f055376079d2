#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <json.hpp>

#include "dirfocus/dataset/splits.hpp"
#include "dirfocus/dataset/synth.hpp"
#include "dirfocus/models/model.hpp"
#include "dirfocus/nn/optim.hpp"

namespace dirfocus::app {

struct EvalConfig {
  int n_boot = 10000;
  double alpha = 0.05;
  /// EEG-only model trained on the same folds for the dual-null comparison.
  std::optional<models::ModelKind> reference_model;
  /// Accuracy of the binary random decoder used by the dual-null test.
  double binary_chance = 0.5;
};

struct ExperimentConfig {
  std::string name = "experiment";
  std::uint64_t seed = 0;
  /// Exactly one of dataset / synth is set.
  std::optional<std::filesystem::path> dataset;
  std::optional<dataset::SynthConfig> synth;
  spatial::SpectrumPipeline pipeline;
  dataset::LabelParadigm labels = dataset::LabelParadigm::Full14;
  dataset::CvParadigm cv = dataset::CvParadigm::LOSO;
  dataset::SplitOptions split;
  double window_seconds = 1.0;
  models::ModelSpec model;
  nn::TrainConfig train;
  EvalConfig eval;
  std::filesystem::path out_dir = "results";

  /// Fills the derived model fields (class count, window length) and checks
  /// every value; throws ParameterError / DataError.
  void finalize();
};

/// Parses an experiment document. Relative paths resolve against `base_dir`.
/// Unknown keys are rejected so that typos do not silently fall back to
/// defaults.
ExperimentConfig parse_experiment(const nlohmann::json& doc, const std::filesystem::path& base_dir);
ExperimentConfig load_experiment(const std::filesystem::path& path);
nlohmann::json to_json(const ExperimentConfig& config);

dataset::SynthConfig parse_synth(const nlohmann::json& doc);
nlohmann::json to_json(const dataset::SynthConfig& config);
models::ModelSpec parse_model(const nlohmann::json& doc);
nlohmann::json to_json(const models::ModelSpec& spec);
nn::TrainConfig parse_train(const nlohmann::json& doc);
nlohmann::json to_json(const nn::TrainConfig& config);
spatial::SpectrumPipeline parse_pipeline(const nlohmann::json& doc);
nlohmann::json to_json(const spatial::SpectrumPipeline& pipeline);

}  // namespace dirfocus::app
