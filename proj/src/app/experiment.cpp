#include "dirfocus/app/experiment.hpp"

#include <atomic>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <numeric>
#include <sstream>
#include <thread>

#include "dirfocus/dataset/dataset_io.hpp"
#include "dirfocus/dataset/segment.hpp"
#include "dirfocus/error.hpp"
#include "dirfocus/eval/metrics.hpp"
#include "dirfocus/nn/checkpoint.hpp"

namespace dirfocus::app {

using nlohmann::json;
namespace fs = std::filesystem;

AuditedSamples::AuditedSamples(const std::vector<dataset::Sample>& samples) {
  for (const auto& s : samples) by_trial_[s.trial_id].push_back(&s);
}

models::SampleRefs AuditedSamples::collect(const std::vector<int>& trial_ids) const {
  models::SampleRefs out;
  for (int id : trial_ids) {
    const auto it = by_trial_.find(id);
    if (it != by_trial_.end()) out.insert(out.end(), it->second.begin(), it->second.end());
  }
  return out;
}

models::SampleRefs AuditedSamples::fit_split(int fold, const std::vector<int>& trial_ids) {
  {
    std::lock_guard lock(mutex_);
    fit_trials_[fold].insert(trial_ids.begin(), trial_ids.end());
  }
  return collect(trial_ids);
}

models::SampleRefs AuditedSamples::test_split(int fold, const std::vector<int>& trial_ids) {
  {
    std::lock_guard lock(mutex_);
    ++test_reads_[fold];
    test_trials_[fold].insert(trial_ids.begin(), trial_ids.end());
  }
  return collect(trial_ids);
}

void AuditedSamples::mark_resumed(int fold) {
  std::lock_guard lock(mutex_);
  resumed_.insert(fold);
}

int AuditedSamples::test_reads(int fold) const {
  std::lock_guard lock(mutex_);
  const auto it = test_reads_.find(fold);
  return it == test_reads_.end() ? 0 : it->second;
}

std::vector<std::string> AuditedSamples::audit(int n_folds) const {
  std::lock_guard lock(mutex_);
  std::vector<std::string> out;
  for (int f = 0; f < n_folds; ++f) {
    const auto reads = test_reads_.count(f) ? test_reads_.at(f) : 0;
    const int expected = resumed_.count(f) ? 0 : 1;
    if (reads != expected) {
      out.push_back("fold " + std::to_string(f) + ": test set read " + std::to_string(reads) + " times, expected " +
                    std::to_string(expected));
    }
    if (!fit_trials_.count(f) || !test_trials_.count(f)) continue;
    for (int id : test_trials_.at(f)) {
      if (fit_trials_.at(f).count(id))
        out.push_back("fold " + std::to_string(f) + ": test trial " + std::to_string(id) + " was also used for fitting");
    }
  }
  return out;
}

bool ExperimentResult::failed() const {
  for (const auto& f : folds)
    if (!f.error.empty()) return true;
  return !audit_violations.empty();
}

namespace {

json history_json(const std::vector<models::EpochRecord>& h) {
  json out = json::array();
  for (const auto& e : h) {
    out.push_back({{"epoch", e.epoch},
                   {"train_loss", e.train_loss},
                   {"val_loss", e.val_loss},
                   {"val_balanced_acc", e.val_balanced_acc},
                   {"learning_rate", e.learning_rate}});
  }
  return out;
}

json nullable(double v) { return std::isfinite(v) ? json(v) : json(); }

std::string fold_stem(int fold) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "fold_%03d", fold);
  return buf;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw DataError("cannot write " + path.string());
  out << text;
}

struct FoldJob {
  const ExperimentConfig* config;
  const dataset::Fold* fold;
  int index;
  AuditedSamples* samples;
  bool write_checkpoints;
};

FoldResult run_fold(const FoldJob& job) {
  const auto& cfg = *job.config;
  FoldResult r;
  r.fold = job.index;
  const auto train = job.samples->fit_split(job.index, job.fold->train);
  const auto val = job.samples->fit_split(job.index, job.fold->validation);
  r.n_train = static_cast<int>(train.size());
  r.n_validation = static_cast<int>(val.size());

  auto train_cfg = cfg.train;
  train_cfg.rng_seed = derive_seed(cfg.seed, 2000 + static_cast<std::uint64_t>(job.index));
  models::Model model(cfg.model, derive_seed(cfg.seed, 1000 + static_cast<std::uint64_t>(job.index)));
  const auto trained = models::train_fold(model, train, val, train_cfg);
  r.best_epoch = trained.best_epoch;
  r.epochs_run = static_cast<int>(trained.history.size());
  r.history = trained.history;

  std::optional<models::Model> reference;
  if (cfg.eval.reference_model) {
    auto spec = cfg.model;
    spec.kind = *cfg.eval.reference_model;
    auto ref_cfg = train_cfg;
    ref_cfg.rng_seed = derive_seed(cfg.seed, 4000 + static_cast<std::uint64_t>(job.index));
    reference.emplace(spec, derive_seed(cfg.seed, 3000 + static_cast<std::uint64_t>(job.index)));
    models::train_fold(*reference, train, val, ref_cfg);
  }

  // The only read of this fold's test set.
  const auto test = job.samples->test_split(job.index, job.fold->test);
  r.n_test = static_cast<int>(test.size());
  if (test.empty()) throw ParameterError("fold " + std::to_string(job.index) + " has an empty test split");
  r.predictions = models::argmax_rows(models::predict_proba(model, test));
  for (const auto* s : test) r.labels.push_back(s->label);
  const auto ev = eval::balanced_accuracy_present(r.predictions, r.labels, cfg.model.n_classes);
  r.balanced_acc = ev.balanced_acc;
  r.classes_present = ev.classes_present;
  r.per_class_acc.assign(ev.per_class_acc.data(), ev.per_class_acc.data() + ev.per_class_acc.size());
  for (Eigen::Index i = 0; i < ev.confusion.rows(); ++i) {
    r.confusion.emplace_back();
    for (Eigen::Index j = 0; j < ev.confusion.cols(); ++j) r.confusion.back().push_back(ev.confusion(i, j));
  }
  if (reference) {
    const auto ref_pred = models::argmax_rows(models::predict_proba(*reference, test));
    r.reference_acc = eval::balanced_accuracy_present(ref_pred, r.labels, cfg.model.n_classes).balanced_acc;
  }
  if (job.write_checkpoints) nn::save_checkpoint(model.parameters(), cfg.out_dir / "checkpoints" / fold_stem(job.index));
  return r;
}

}  // namespace

json to_json(const FoldResult& f) {
  json per_class = json::array();
  for (double v : f.per_class_acc) per_class.push_back(nullable(v));
  json j = {{"fold", f.fold},
            {"n_train", f.n_train},
            {"n_validation", f.n_validation},
            {"n_test", f.n_test},
            {"balanced_acc", f.balanced_acc},
            {"classes_present", f.classes_present},
            {"per_class_acc", per_class},
            {"confusion", f.confusion},
            {"predictions", f.predictions},
            {"labels", f.labels},
            {"reference_acc", f.reference_acc ? json(*f.reference_acc) : json()},
            {"best_epoch", f.best_epoch},
            {"epochs_run", f.epochs_run},
            {"history", history_json(f.history)}};
  if (!f.error.empty()) j["error"] = f.error;
  return j;
}

FoldResult fold_from_json(const json& j) {
  FoldResult f;
  f.fold = j.at("fold").get<int>();
  f.n_train = j.at("n_train").get<int>();
  f.n_validation = j.at("n_validation").get<int>();
  f.n_test = j.at("n_test").get<int>();
  f.balanced_acc = j.at("balanced_acc").get<double>();
  f.classes_present = j.at("classes_present").get<int>();
  for (const auto& v : j.at("per_class_acc")) f.per_class_acc.push_back(v.is_null() ? std::nan("") : v.get<double>());
  f.confusion = j.at("confusion").get<std::vector<std::vector<int>>>();
  f.predictions = j.at("predictions").get<std::vector<int>>();
  f.labels = j.at("labels").get<std::vector<int>>();
  if (!j.at("reference_acc").is_null()) f.reference_acc = j.at("reference_acc").get<double>();
  f.best_epoch = j.at("best_epoch").get<int>();
  f.epochs_run = j.at("epochs_run").get<int>();
  for (const auto& e : j.at("history")) {
    f.history.push_back({e.at("epoch").get<int>(), e.at("train_loss").get<double>(), e.at("val_loss").get<double>(),
                         e.at("val_balanced_acc").get<double>(), e.at("learning_rate").get<double>()});
  }
  if (j.contains("error")) f.error = j.at("error").get<std::string>();
  return f;
}

json to_json(const ExperimentResult& r) {
  json folds = json::array();
  for (const auto& f : r.folds) folds.push_back(to_json(f));
  json j = {{"format", "dirfocus-results"},
            {"version", 1},
            {"name", r.config.name},
            {"model", models::to_string(r.config.model.kind)},
            {"paradigm", dataset::to_string(r.config.cv)},
            {"labels", dataset::to_string(r.config.labels)},
            {"window_seconds", r.config.window_seconds},
            {"n_class", r.config.model.n_classes},
            {"chance_level", 1.0 / r.config.model.n_classes},
            {"balanced_acc_mean", r.balanced_acc_mean},
            {"balanced_acc_std", r.balanced_acc_std},
            {"pooled_balanced_acc", r.pooled_balanced_acc},
            {"chance_draws", r.chance_draws},
            {"binary_draws", r.binary_draws},
            {"stars", r.stars},
            {"audit_violations", r.audit_violations},
            {"config", to_json(r.config)},
            {"folds", folds}};
  j["p_value"] = r.versus_chance ? json(r.versus_chance->p_value) : json();
  j["p95"] = r.versus_chance ? json(r.versus_chance->p95_bootstrap) : json();
  j["significant"] = r.versus_chance ? json(r.versus_chance->significant) : json();
  j["reference_model"] =
      r.config.eval.reference_model ? json(models::to_string(*r.config.eval.reference_model)) : json();
  j["reference_acc_mean"] = r.reference_acc_mean ? json(*r.reference_acc_mean) : json();
  if (r.dual_null) {
    j["dual_null"] = {{"p_value", r.dual_null->p_value},
                      {"versus_reference_p", r.dual_null->versus_reference.p_value},
                      {"versus_binary_p95", r.dual_null->versus_chance.p95_bootstrap},
                      {"significant", r.dual_null->significant}};
  } else {
    j["dual_null"] = json();
  }
  if (!r.statistics_note.empty()) j["statistics_note"] = r.statistics_note;
  return j;
}

ExperimentResult run_experiment_on(const ExperimentConfig& config, const std::vector<dataset::EegTrial>& trials,
                                   const RunOptions& options) {
  ExperimentResult result;
  result.config = config;
  const auto plan = dataset::make_splits(std::span<const dataset::EegTrial>(trials), config.cv, config.seed, config.split);
  const auto samples = dataset::segment_trials(trials, config.window_seconds, config.labels);
  AuditedSamples audited(samples);

  const json config_doc = to_json(config);
  fs::create_directories(config.out_dir / "folds");
  if (options.write_checkpoints) fs::create_directories(config.out_dir / "checkpoints");

  const int n_folds = static_cast<int>(plan.folds.size());
  result.folds.resize(static_cast<std::size_t>(n_folds));
  std::vector<bool> done(static_cast<std::size_t>(n_folds), false);
  if (options.resume) {
    for (int f = 0; f < n_folds; ++f) {
      const auto path = config.out_dir / "folds" / (fold_stem(f) + ".json");
      if (!fs::exists(path)) continue;
      std::ifstream in(path);
      json doc;
      try {
        in >> doc;
      } catch (const json::exception&) {
        continue;
      }
      if (doc.value("config", json()) != config_doc || doc.contains("result") == false) continue;
      auto fold = fold_from_json(doc.at("result"));
      if (!fold.error.empty()) continue;
      result.folds[static_cast<std::size_t>(f)] = std::move(fold);
      done[static_cast<std::size_t>(f)] = true;
      audited.mark_resumed(f);
    }
  }

  std::atomic<int> next{0};
  std::mutex log_mutex;
  auto worker = [&] {
    for (int f = next++; f < n_folds; f = next++) {
      if (done[static_cast<std::size_t>(f)]) continue;
      FoldResult r;
      try {
        r = run_fold({&config, &plan.folds[static_cast<std::size_t>(f)], f, &audited, options.write_checkpoints});
      } catch (const std::exception& e) {
        r = FoldResult{};
        r.fold = f;
        r.error = e.what();
      }
      write_text(config.out_dir / "folds" / (fold_stem(f) + ".json"),
                 json{{"config", config_doc}, {"result", to_json(r)}}.dump(1) + "\n");
      if (!options.quiet) {
        std::lock_guard lock(log_mutex);
        std::cerr << config.name << " fold " << f + 1 << "/" << n_folds << ": "
                  << (r.error.empty() ? "balanced accuracy " + std::to_string(r.balanced_acc) : "FAILED " + r.error)
                  << "\n";
      }
      result.folds[static_cast<std::size_t>(f)] = std::move(r);
    }
  };
  const int jobs = std::max(1, std::min(options.jobs, n_folds));
  std::vector<std::thread> pool;
  for (int j = 1; j < jobs; ++j) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();

  result.audit_violations = audited.audit(n_folds);

  std::vector<double> acc, ref;
  std::vector<int> sizes, pooled_pred, pooled_labels;
  for (const auto& f : result.folds) {
    if (!f.error.empty()) continue;
    acc.push_back(f.balanced_acc);
    sizes.push_back(f.n_test);
    if (f.reference_acc) ref.push_back(*f.reference_acc);
    pooled_pred.insert(pooled_pred.end(), f.predictions.begin(), f.predictions.end());
    pooled_labels.insert(pooled_labels.end(), f.labels.begin(), f.labels.end());
  }
  if (!acc.empty()) {
    result.balanced_acc_mean = std::accumulate(acc.begin(), acc.end(), 0.0) / acc.size();
    double ss = 0;
    for (double a : acc) ss += (a - result.balanced_acc_mean) * (a - result.balanced_acc_mean);
    result.balanced_acc_std = acc.size() > 1 ? std::sqrt(ss / (acc.size() - 1)) : 0.0;
    result.pooled_balanced_acc =
        eval::balanced_accuracy_present(pooled_pred, pooled_labels, config.model.n_classes).balanced_acc;
    result.chance_draws = eval::chance_baseline(sizes, 1.0 / config.model.n_classes, derive_seed(config.seed, 5));
    result.binary_draws = eval::chance_baseline(sizes, config.eval.binary_chance, derive_seed(config.seed, 6));
  }
  if (!ref.empty()) result.reference_acc_mean = std::accumulate(ref.begin(), ref.end(), 0.0) / ref.size();
  if (acc.size() >= 5) {
    result.versus_chance = eval::bootstrap_significance(acc, result.chance_draws, config.eval.n_boot,
                                                        derive_seed(config.seed, 7), config.eval.alpha);
    result.stars = result.versus_chance->significant ? eval::stars(result.versus_chance->p95_bootstrap) : "";
    if (ref.size() == acc.size()) {
      result.dual_null = eval::dual_null_test(acc, ref, result.binary_draws, config.eval.n_boot,
                                              derive_seed(config.seed, 8), config.eval.alpha);
      result.stars = result.dual_null->significant ? eval::stars(result.dual_null->p_value) : "";
    }
  } else {
    result.statistics_note = "significance tests need at least 5 completed folds";
  }

  write_text(config.out_dir / "results.json", to_json(result).dump(2) + "\n");
  write_text(config.out_dir / "results.csv", results_csv({to_json(result)}));
  return result;
}

ExperimentResult run_experiment(const ExperimentConfig& config, const RunOptions& options) {
  std::vector<dataset::EegTrial> trials;
  if (config.dataset) {
    if (!fs::is_directory(*config.dataset)) throw DataError("dataset directory " + config.dataset->string() + " does not exist");
    trials = dataset::load_dataset(*config.dataset, config.pipeline);
  } else if (config.synth) {
    trials = dataset::synth_generate(*config.synth, config.seed);
  } else {
    throw ParameterError("experiment '" + config.name + "' has neither a dataset nor synth settings");
  }
  return run_experiment_on(config, trials, options);
}

std::string results_csv(const std::vector<json>& results) {
  std::vector<std::string> models_order, columns;
  std::map<std::pair<std::string, std::string>, std::string> cells;
  auto add_unique = [](std::vector<std::string>& v, const std::string& s) {
    if (std::find(v.begin(), v.end(), s) == v.end()) v.push_back(s);
  };
  for (const auto& r : results) {
    const auto model = r.at("model").get<std::string>();
    std::ostringstream col;
    col << r.at("paradigm").get<std::string>() << " " << r.at("labels").get<std::string>() << " "
        << r.at("window_seconds").get<double>() << " s";
    add_unique(models_order, model);
    add_unique(columns, col.str());
    char cell[64];
    std::snprintf(cell, sizeof cell, "%.2f%%%s", 100 * r.at("balanced_acc_mean").get<double>(),
                  r.at("stars").get<std::string>().c_str());
    cells[{model, col.str()}] = cell;
  }
  std::string out = "model";
  for (const auto& c : columns) out += "," + c;
  out += "\n";
  for (const auto& m : models_order) {
    out += m;
    for (const auto& c : columns) {
      const auto it = cells.find({m, c});
      out += "," + (it == cells.end() ? std::string() : it->second);
    }
    out += "\n";
  }
  return out;
}

}  // namespace dirfocus::app
