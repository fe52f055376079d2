#include <catch_amalgamated.hpp>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <map>
#include <numbers>
#include <set>

#include "dirfocus/dataset/dataset_io.hpp"
#include "dirfocus/dataset/labels.hpp"
#include "dirfocus/dataset/segment.hpp"
#include "dirfocus/dataset/splits.hpp"
#include "dirfocus/dataset/synth.hpp"
#include "dirfocus/error.hpp"
#include "dirfocus/spatial/mvdr.hpp"

using namespace dirfocus;
using namespace dirfocus::dataset;

namespace {

SynthConfig small_config() {
  SynthConfig c;
  c.n_subjects = 3;
  c.trials_per_subject = 14;
  c.trial_seconds = 3.0;
  c.audio_seconds = 1.0;
  return c;
}

SynthConfig roster_config() {
  SynthConfig c;
  c.n_subjects = 21;
  c.trials_per_subject = 32;
  return c;
}

std::set<int> as_set(const std::vector<int>& v) { return {v.begin(), v.end()}; }

// Independent invariant check written against the definitions, not the audit.
void check_fold_invariants(const FoldPlan& plan, const std::vector<TrialMeta>& trials, CvParadigm paradigm,
                           LabelParadigm labels) {
  std::map<int, TrialMeta> by_id;
  for (const auto& t : trials) by_id[t.trial_id] = t;
  auto key_of = [&](int id) {
    const auto& t = by_id.at(id);
    return paradigm == CvParadigm::LOATO ? t.attended_audio_id : *label_trial(t.attended_direction, labels);
  };
  std::set<int> union_test;
  std::set<int> union_keys;
  for (const auto& f : plan.folds) {
    const auto tr = as_set(f.train), va = as_set(f.validation), te = as_set(f.test);
    REQUIRE_FALSE(te.empty());
    for (int id : tr) CHECK((va.count(id) == 0 && te.count(id) == 0));
    for (int id : va) CHECK(te.count(id) == 0);
    for (int id : te) union_test.insert(id);

    if (paradigm == CvParadigm::LOSO) {
      std::set<int> train_subj, held_subj;
      for (int id : tr) train_subj.insert(by_id.at(id).subject_id);
      for (int id : va) held_subj.insert(by_id.at(id).subject_id);
      for (int id : te) held_subj.insert(by_id.at(id).subject_id);
      for (int s : held_subj) CHECK(train_subj.count(s) == 0);
    }
    if (paradigm == CvParadigm::LOMTO) {
      for (int id : tr) {
        const auto& t = by_id.at(id);
        for (int h : va) {
          const auto& u = by_id.at(h);
          CHECK_FALSE((u.subject_id == t.subject_id && std::abs(u.trial_order - t.trial_order) == 1));
        }
        for (int h : te) {
          const auto& u = by_id.at(h);
          CHECK_FALSE((u.subject_id == t.subject_id && std::abs(u.trial_order - t.trial_order) == 1));
        }
      }
    }
    if (paradigm == CvParadigm::LOCTO || paradigm == CvParadigm::LOATO) {
      std::map<int, std::set<int>> test_keys;
      for (int id : te) test_keys[by_id.at(id).subject_id].insert(key_of(id));
      for (const auto& [s, keys] : test_keys) {
        CHECK(keys.size() == 1);
        union_keys.insert(*keys.begin());
        for (int id : tr) {
          if (by_id.at(id).subject_id == s) CHECK(key_of(id) != *keys.begin());
        }
      }
    }
  }
  if (paradigm == CvParadigm::LOSO || paradigm == CvParadigm::LOTO) {
    std::set<int> all;
    for (const auto& t : trials)
      if (label_trial(t.attended_direction, labels)) all.insert(t.trial_id);
    CHECK(union_test == all);
  }
  if (paradigm == CvParadigm::LOCTO) CHECK(static_cast<int>(union_keys.size()) == class_count(labels));
  if (paradigm == CvParadigm::LOATO) {
    std::set<int> audio;
    for (const auto& t : trials) audio.insert(t.attended_audio_id);
    CHECK(union_keys == audio);
  }
}

}  // namespace

TEST_CASE("label paradigms", "[labels]") {
  CHECK(class_count(LabelParadigm::Full14) == 14);
  CHECK(class_count(LabelParadigm::Octal8) == 8);
  CHECK(class_count(LabelParadigm::Quaternary4) == 4);
  CHECK(class_count(LabelParadigm::Binary2) == 2);

  CHECK(label_trial(-135, LabelParadigm::Full14) == 0);
  CHECK(label_trial(135, LabelParadigm::Full14) == 13);
  CHECK(label_trial(15, LabelParadigm::Full14) == 7);
  CHECK(label_trial(45, LabelParadigm::Quaternary4) == 2);
  CHECK(label_trial(-120, LabelParadigm::Quaternary4) == 1);
  CHECK(label_trial(120, LabelParadigm::Quaternary4) == 3);
  CHECK(label_trial(-60, LabelParadigm::Quaternary4) == 0);
  CHECK(label_trial(-15, LabelParadigm::Binary2) == 0);
  CHECK_FALSE(label_trial(30, LabelParadigm::Octal8).has_value());
  CHECK_FALSE(label_trial(-90, LabelParadigm::Quaternary4).has_value());
  CHECK_THROWS_AS(label_trial(0, LabelParadigm::Full14), ParameterError);
  CHECK_THROWS_AS(label_trial(150, LabelParadigm::Binary2), ParameterError);

  for (int d : kDirections) {
    CHECK(label_trial(-d, LabelParadigm::Binary2) != label_trial(d, LabelParadigm::Binary2));
  }
  std::set<int> octal;
  for (int d : kDirections)
    if (auto l = label_trial(d, LabelParadigm::Octal8)) octal.insert(*l);
  CHECK(octal.size() == 8);
  CHECK(parse_label_paradigm(to_string(LabelParadigm::Quaternary4)) == LabelParadigm::Quaternary4);
  CHECK_THROWS_AS(parse_label_paradigm("five"), ParameterError);
}

TEST_CASE("segmentation", "[segment]") {
  EegTrial t;
  t.attended_direction = 45;
  t.unattended_direction = -45;
  t.eeg = Eigen::MatrixXd::Random(kEegChannels, 110 * 128);
  t.spectrum.grid = spatial::scan_grid();
  t.spectrum.power = Eigen::VectorXd::Constant(181, 2.0);
  CHECK(segment_trial(t, 10.0, LabelParadigm::Full14).size() == 11);
  const auto s1 = segment_trial(t, 1.0, LabelParadigm::Full14);
  REQUIRE(s1.size() == 110);
  for (const auto& s : s1) {
    CHECK(s.spectrum.get() == s1.front().spectrum.get());
    CHECK(*s.spectrum == t.spectrum.power);
    CHECK(s.label == 9);
    CHECK(s.eeg.cols() == 128);
  }
  CHECK(s1[3].eeg == t.eeg.middleCols(3 * 128, 128));

  t.eeg = Eigen::MatrixXd::Random(kEegChannels, 1000);
  CHECK(segment_trial(t, 2.0, LabelParadigm::Full14).size() == 1000 / 256);
  CHECK_THROWS_AS(segment_trial(t, 10.0, LabelParadigm::Full14), ParameterError);
  t.attended_direction = 30;
  t.unattended_direction = -30;
  CHECK(segment_trial(t, 1.0, LabelParadigm::Octal8).empty());
}

TEST_CASE("synthetic roster is balanced and reproducible", "[synth]") {
  const auto cfg = roster_config();
  const auto a = synth_roster(cfg, 3);
  const auto b = synth_roster(cfg, 3);
  REQUIRE(a.size() == 21 * 32);
  std::map<int, std::map<int, int>> counts;
  std::map<int, std::set<int>> audio;
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i].trial_id == b[i].trial_id);
    CHECK(a[i].attended_direction == b[i].attended_direction);
    CHECK(a[i].attended_audio_id == b[i].attended_audio_id);
    counts[a[i].subject_id][a[i].attended_direction]++;
    audio[a[i].subject_id].insert(a[i].attended_audio_id);
  }
  for (const auto& [s, c] : counts) {
    CHECK(c.size() == 14);
    for (const auto& [d, n] : c) CHECK(n >= 2);
    CHECK(audio[s].size() == 32);
  }
  const auto c = synth_roster(cfg, 4);
  bool differs = false;
  for (std::size_t i = 0; i < a.size(); ++i) differs |= a[i].attended_direction != c[i].attended_direction;
  CHECK(differs);
}

TEST_CASE("synth_generate is bit-identical for a fixed seed", "[synth]") {
  const auto cfg = small_config();
  const auto a = synth_generate(cfg, 12);
  const auto b = synth_generate(cfg, 12);
  REQUIRE(a.size() == b.size());
  const auto roster = synth_roster(cfg, 12);
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i].eeg == b[i].eeg);
    CHECK(a[i].spectrum.power == b[i].spectrum.power);
    CHECK(a[i].attended_direction == roster[i].attended_direction);
    CHECK(a[i].unattended_direction == -a[i].attended_direction);
    CHECK(a[i].eeg.rows() == kEegChannels);
    CHECK(a[i].eeg.cols() == 3 * 128);
    a[i].validate();
  }
}

TEST_CASE("synthetic spectra peak at the direction pair", "[synth]") {
  auto cfg = small_config();
  cfg.audio_seconds = 4.0;
  const auto trials = synth_generate(cfg, 5);
  int checked = 0;
  for (const auto& t : trials) {
    const int mag = std::abs(t.attended_direction);
    if (mag == 90) continue;
    // Rear sources alias onto the front half-plane, with a stretched delay.
    const double mirrored = mag > 90 ? 180.0 - mag : mag;
    const double stretch = mag > 90 ? cfg.rear_delay_scale : 1.0;
    const double expected =
        std::asin(std::min(1.0, stretch * std::sin(mirrored * std::numbers::pi / 180.0))) * 180.0 / std::numbers::pi;
    // Shadowed rear sources give broader, less exact peaks.
    const double tolerance = mag > 90 ? 4.0 : 3.0;
    const auto peaks = t.spectrum.local_maxima();
    REQUIRE(peaks.size() >= 2);
    const double a = t.spectrum.grid[peaks[0]], b = t.spectrum.grid[peaks[1]];
    CHECK(std::abs(std::max(a, b) - expected) <= tolerance);
    CHECK(std::abs(std::min(a, b) + expected) <= tolerance);
    ++checked;
  }
  CHECK(checked == 36);
}

TEST_CASE("rear delay scale moves the rear peak", "[synth]") {
  SceneOptions options;
  Rng rng(4);
  const Eigen::VectorXd src = speech_like_source(16000, options.sample_rate, 150.0, rng);
  auto peak_of = [&](double scale) {
    options.rear_delay_scale = scale;
    return spatial::spatial_spectrum_from_audio(render_scene({{src, 135.0}}, options, rng)).peak_angle();
  };
  CHECK(std::abs(peak_of(1.0) - 45.0) <= 3.0);
  CHECK(std::abs(peak_of(1.1) - 51.06) <= 3.0);
  SceneOptions bad;
  bad.rear_delay_scale = 0.0;
  CHECK_THROWS_AS(render_scene({{src, 135.0}}, bad, rng), ParameterError);
}

TEST_CASE("planted gain zero leaves EEG label-free", "[synth]") {
  auto cfg = small_config();
  cfg.planted_eeg_gain = 0.0;
  const auto a = synth_generate(cfg, 8);
  cfg.signature = EegSignature::Side;
  const auto b = synth_generate(cfg, 8);
  for (std::size_t i = 0; i < a.size(); ++i) CHECK(a[i].eeg == b[i].eeg);
}

TEST_CASE("fractional delay shifts a band-limited signal", "[synth]") {
  Rng rng(1);
  const auto x = speech_like_source(4000, 8000, 150.0, rng);
  const auto y = fractional_delay(x, 3.0);
  CHECK((y.segment(3, 3000) - x.segment(0, 3000)).cwiseAbs().maxCoeff() < 1e-9);
  Eigen::VectorXd tone(4000), shifted(4000);
  for (Index i = 0; i < 4000; ++i) {
    tone[i] = std::sin(2 * std::numbers::pi * 300.0 * static_cast<double>(i) / 8000.0);
    shifted[i] = std::sin(2 * std::numbers::pi * 300.0 * (static_cast<double>(i) - 0.37) / 8000.0);
  }
  const auto delayed = fractional_delay(tone, 0.37);
  CHECK((delayed.segment(500, 3000) - shifted.segment(500, 3000)).cwiseAbs().maxCoeff() < 2e-3);
}

TEST_CASE("LOSO folds on the 21 x 32 roster", "[splits]") {
  const auto roster = synth_roster(roster_config(), 1);
  const auto plan = make_splits(std::span<const TrialMeta>(roster), CvParadigm::LOSO, 99);
  REQUIRE(plan.folds.size() == 21);
  for (std::size_t k = 0; k < plan.folds.size(); ++k) {
    std::set<int> subj;
    for (int id : plan.folds[k].test) subj.insert(roster[static_cast<std::size_t>(id)].subject_id);
    CHECK(subj.size() == 1);
    CHECK(plan.folds[k].test.size() == 32);
  }
  check_fold_invariants(plan, roster, CvParadigm::LOSO, LabelParadigm::Full14);
  CHECK(audit_fold_plan(plan, roster).empty());
}

TEST_CASE("every paradigm satisfies its invariants", "[splits]") {
  const auto roster = synth_roster(roster_config(), 2);
  for (auto labels : {LabelParadigm::Full14, LabelParadigm::Octal8, LabelParadigm::Quaternary4, LabelParadigm::Binary2}) {
    for (auto paradigm : {CvParadigm::LOTO, CvParadigm::LOSO, CvParadigm::LOMTO, CvParadigm::LOCTO, CvParadigm::LOATO}) {
      SplitOptions opt;
      opt.labels = labels;
      const auto plan = make_splits(std::span<const TrialMeta>(roster), paradigm, 7, opt);
      INFO(to_string(paradigm) << " " << to_string(labels));
      check_fold_invariants(plan, roster, paradigm, labels);
      const auto problems = audit_fold_plan(plan, roster, opt);
      CHECK(problems.empty());
    }
  }
}

TEST_CASE("LOMTO removes neighbours of held-out trials", "[splits]") {
  const auto roster = synth_roster(roster_config(), 3);
  const auto plan = make_splits(std::span<const TrialMeta>(roster), CvParadigm::LOMTO, 1);
  bool found = false;
  for (const auto& f : plan.folds) {
    for (int id : f.test) {
      const auto& t = roster[static_cast<std::size_t>(id)];
      if (t.trial_order != 7) continue;
      found = true;
      for (int tr : f.train) {
        const auto& u = roster[static_cast<std::size_t>(tr)];
        if (u.subject_id == t.subject_id) CHECK((u.trial_order != 6 && u.trial_order != 8));
      }
    }
  }
  CHECK(found);
}

TEST_CASE("splits are seeded", "[splits]") {
  const auto roster = synth_roster(roster_config(), 4);
  for (auto paradigm : {CvParadigm::LOTO, CvParadigm::LOCTO, CvParadigm::LOATO}) {
    const auto a = make_splits(std::span<const TrialMeta>(roster), paradigm, 5);
    const auto b = make_splits(std::span<const TrialMeta>(roster), paradigm, 5);
    REQUIRE(a.folds.size() == b.folds.size());
    for (std::size_t k = 0; k < a.folds.size(); ++k) {
      CHECK(a.folds[k].test == b.folds[k].test);
      CHECK(a.folds[k].train == b.folds[k].train);
    }
  }
}

TEST_CASE("LOCTO and LOATO audits hold over 100 regenerations", "[splits]") {
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    const auto roster = synth_roster(roster_config(), 1000 + seed);
    for (auto paradigm : {CvParadigm::LOCTO, CvParadigm::LOATO}) {
      const auto plan = make_splits(std::span<const TrialMeta>(roster), paradigm, seed);
      const auto problems = audit_fold_plan(plan, roster);
      INFO("seed " << seed << " " << to_string(paradigm) << (problems.empty() ? "" : ": " + problems.front()));
      REQUIRE(problems.empty());
    }
  }
}

TEST_CASE("infeasible splits are reported", "[splits]") {
  std::vector<TrialMeta> one_subject;
  for (int i = 0; i < 14; ++i) one_subject.push_back({0, i, i, kDirections[static_cast<std::size_t>(i)], i});
  CHECK_THROWS_AS(make_splits(std::span<const TrialMeta>(one_subject), CvParadigm::LOSO, 1), InfeasibleSplitError);

  auto roster = synth_roster(roster_config(), 6);
  // A class held by a single trial cannot be both excluded from training and tested elsewhere.
  std::vector<TrialMeta> sparse;
  for (const auto& t : roster) {
    if (t.attended_direction != 15 || (t.subject_id == 0 && sparse.end() == std::find_if(sparse.begin(), sparse.end(), [](const TrialMeta& m) { return m.attended_direction == 15; })))
      sparse.push_back(t);
  }
  try {
    make_splits(std::span<const TrialMeta>(sparse), CvParadigm::LOCTO, 1);
    FAIL("expected InfeasibleSplitError");
  } catch (const InfeasibleSplitError& e) {
    CHECK(std::string(e.what()).size() > 10);
  }
}

TEST_CASE("audit flags a leaking plan", "[splits]") {
  const auto roster = synth_roster(roster_config(), 8);
  auto plan = make_splits(std::span<const TrialMeta>(roster), CvParadigm::LOSO, 2);
  plan.folds[0].train.push_back(plan.folds[0].test.front());
  std::sort(plan.folds[0].train.begin(), plan.folds[0].train.end());
  CHECK_FALSE(audit_fold_plan(plan, roster).empty());
}

TEST_CASE("dataset round trip through disk", "[dataset_io]") {
  auto cfg = small_config();
  cfg.n_subjects = 1;
  cfg.keep_audio = true;
  const auto trials = synth_generate(cfg, 31);
  const auto root = std::filesystem::temp_directory_path() / "dirfocus_test_dataset";
  std::filesystem::remove_all(root);
  WriteOptions opt;
  opt.write_audio = true;
  write_dataset(root, trials, opt);
  const auto back = load_dataset(root);
  REQUIRE(back.size() == trials.size());
  for (std::size_t i = 0; i < trials.size(); ++i) {
    CHECK(back[i].trial_id == trials[i].trial_id);
    CHECK(back[i].attended_direction == trials[i].attended_direction);
    CHECK((back[i].eeg - trials[i].eeg).cwiseAbs().maxCoeff() < 1e-5 * (1 + trials[i].eeg.cwiseAbs().maxCoeff()));
    CHECK(back[i].spectrum.power == trials[i].spectrum.power);
  }

  // Without spectrum files the spectra are recomputed from the stored audio.
  const auto root2 = root.string() + "_audio_only";
  std::filesystem::remove_all(root2);
  opt.write_spectra = false;
  write_dataset(root2, trials, opt);
  const auto recomputed = load_dataset(root2);
  for (std::size_t i = 0; i < trials.size(); ++i) {
    CHECK(recomputed[i].spectrum.peak_angle() == trials[i].spectrum.peak_angle());
  }
  std::filesystem::remove_all(root);
  std::filesystem::remove_all(root2);
}

TEST_CASE("load_dataset names the broken trial", "[dataset_io]") {
  auto cfg = small_config();
  cfg.n_subjects = 1;
  cfg.trials_per_subject = 2;
  const auto trials = synth_generate(cfg, 2);
  const auto root = std::filesystem::temp_directory_path() / "dirfocus_test_broken";
  std::filesystem::remove_all(root);
  write_dataset(root, trials);

  std::ifstream in(root / "manifest.json");
  std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  in.close();
  const auto pos = text.find("\"attended_direction\": " + std::to_string(trials[1].attended_direction));
  REQUIRE(pos != std::string::npos);
  std::string broken = text;
  broken.replace(pos, std::string("\"attended_direction\": " + std::to_string(trials[1].attended_direction)).size(),
                 "\"attended_direction\": 7");
  std::ofstream(root / "manifest.json") << broken;
  try {
    load_dataset(root);
    FAIL("expected DataError");
  } catch (const DataError& e) {
    CHECK(std::string(e.what()).find("trial " + std::to_string(trials[1].trial_id)) != std::string::npos);
  }

  std::ofstream(root / "manifest.json") << "{ not json";
  CHECK_THROWS_AS(load_dataset(root), DataError);
  std::filesystem::remove_all(root);
}
