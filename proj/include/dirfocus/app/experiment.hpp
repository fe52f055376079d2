#pragma once

#include <map>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "dirfocus/app/config.hpp"
#include "dirfocus/eval/stats.hpp"
#include "dirfocus/models/train.hpp"

namespace dirfocus::app {

/// Hands out the samples of a fold and counts every read, so that a run can
/// prove each test set was read exactly once and never while fitting.
class AuditedSamples {
 public:
  explicit AuditedSamples(const std::vector<dataset::Sample>& samples);

  /// Training or validation samples of the given trials.
  models::SampleRefs fit_split(int fold, const std::vector<int>& trial_ids);
  /// Test samples of the given trials; counted as one test read of `fold`.
  models::SampleRefs test_split(int fold, const std::vector<int>& trial_ids);
  void mark_resumed(int fold);

  /// Empty when every non-resumed fold read its test set once and no test
  /// trial of a fold was fetched for fitting in that fold.
  std::vector<std::string> audit(int n_folds) const;

  int test_reads(int fold) const;

 private:
  models::SampleRefs collect(const std::vector<int>& trial_ids) const;

  std::map<int, std::vector<const dataset::Sample*>> by_trial_;
  mutable std::mutex mutex_;
  std::map<int, int> test_reads_;
  std::map<int, std::set<int>> fit_trials_, test_trials_;
  std::set<int> resumed_;
};

struct FoldResult {
  int fold = 0;
  int n_train = 0, n_validation = 0, n_test = 0;  // samples
  double balanced_acc = 0.0;
  int classes_present = 0;
  std::vector<double> per_class_acc;  // NaN for classes missing from the test set
  std::vector<std::vector<int>> confusion;
  std::vector<int> predictions, labels;
  std::optional<double> reference_acc;
  int best_epoch = 0, epochs_run = 0;
  std::vector<models::EpochRecord> history;
  std::string error;  // non-empty when the fold failed
};

struct ExperimentResult {
  ExperimentConfig config;
  std::vector<FoldResult> folds;
  double balanced_acc_mean = 0.0;
  double balanced_acc_std = 0.0;
  /// Balanced accuracy of all test predictions pooled over folds.
  double pooled_balanced_acc = 0.0;
  std::vector<double> chance_draws, binary_draws;
  std::optional<eval::StatTestResult> versus_chance;
  std::optional<eval::DualNullResult> dual_null;
  std::optional<double> reference_acc_mean;
  std::string stars;
  std::vector<std::string> audit_violations;
  std::string statistics_note;

  bool failed() const;
};

struct RunOptions {
  int jobs = 1;
  bool resume = false;
  bool write_checkpoints = true;
  bool quiet = false;
};

/// Loads or synthesizes the data, trains one model per fold (plus the
/// reference model when configured), evaluates each test set once, runs the
/// statistics and writes results.json, results.csv, folds/ and checkpoints/
/// under config.out_dir. Folds that fail are recorded, not thrown.
ExperimentResult run_experiment(const ExperimentConfig& config, const RunOptions& options = {});

/// Runs on in-memory trials instead of reading config.dataset / config.synth.
ExperimentResult run_experiment_on(const ExperimentConfig& config, const std::vector<dataset::EegTrial>& trials,
                                   const RunOptions& options = {});

nlohmann::json to_json(const FoldResult& fold);
FoldResult fold_from_json(const nlohmann::json& doc);
nlohmann::json to_json(const ExperimentResult& result);

/// Table layout: one row per model, one column per "<CV> <window> s" cell,
/// cells formatted as "53.50%***".
std::string results_csv(const std::vector<nlohmann::json>& results);

}  // namespace dirfocus::app
