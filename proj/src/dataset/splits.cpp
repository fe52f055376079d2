#include "dirfocus/dataset/splits.hpp"

#include <algorithm>
#include <functional>
#include <map>
#include <set>
#include <unordered_map>

#include "dirfocus/error.hpp"
#include "dirfocus/rng.hpp"

namespace dirfocus::dataset {
namespace {

struct Roster {
  std::vector<TrialMeta> trials;                    // retained trials
  std::map<int, std::vector<TrialMeta>> by_subject;  // ordered by subject id
  std::vector<int> labels;                          // parallel to trials
  std::unordered_map<int, int> label_of;            // trial id -> label
};

Roster build_roster(std::span<const TrialMeta> trials, LabelParadigm labels) {
  Roster r;
  std::set<int> seen;
  for (const auto& t : trials) {
    if (!seen.insert(t.trial_id).second)
      throw ParameterError("duplicate trial id " + std::to_string(t.trial_id));
    const auto label = label_trial(t.attended_direction, labels);
    if (!label) continue;
    r.trials.push_back(t);
    r.labels.push_back(*label);
    r.label_of[t.trial_id] = *label;
    r.by_subject[t.subject_id].push_back(t);
  }
  for (auto& [subject, list] : r.by_subject) {
    std::sort(list.begin(), list.end(), [](const TrialMeta& a, const TrialMeta& b) { return a.trial_id < b.trial_id; });
  }
  return r;
}

void finish(Fold& f) {
  std::sort(f.train.begin(), f.train.end());
  std::sort(f.validation.begin(), f.validation.end());
  std::sort(f.test.begin(), f.test.end());
}

int cap_folds(int natural, const SplitOptions& o) { return o.max_folds > 0 ? std::min(natural, o.max_folds) : natural; }

std::vector<Fold> trial_level_folds(const Roster& r, Rng& rng, const SplitOptions& o, bool drop_adjacent) {
  if (o.test_per_subject < 1 || o.val_per_subject < 1)
    throw ParameterError("test_per_subject and val_per_subject must be >= 1");
  const int held = o.test_per_subject + o.val_per_subject;

  std::map<int, std::vector<TrialMeta>> shuffled;
  int natural = -1;
  for (const auto& [subject, list] : r.by_subject) {
    if (static_cast<int>(list.size()) < held + 1) {
      throw InfeasibleSplitError("trial-level split: subject " + std::to_string(subject) + " has " +
                                 std::to_string(list.size()) + " trial(s), needs at least " +
                                 std::to_string(held + 1) + " for disjoint train/validation/test");
    }
    auto copy = list;
    std::shuffle(copy.begin(), copy.end(), rng);
    const int chunks = (static_cast<int>(copy.size()) + o.test_per_subject - 1) / o.test_per_subject;
    natural = std::max(natural, chunks);
    shuffled.emplace(subject, std::move(copy));
  }
  if (natural <= 0) throw InfeasibleSplitError("trial-level split: no trials left after labeling");

  std::vector<Fold> folds(static_cast<std::size_t>(cap_folds(natural, o)));
  for (std::size_t k = 0; k < folds.size(); ++k) {
    Fold& fold = folds[k];
    for (const auto& [subject, list] : shuffled) {
      const int n = static_cast<int>(list.size());
      std::vector<char> role(list.size(), 0);  // 0 train, 1 val, 2 test
      const int start = static_cast<int>(k) * o.test_per_subject;
      // A subject whose chunks are used up sits this fold out (all training).
      if (start < n) {
        const int stop = std::min(n, start + o.test_per_subject);
        for (int j = start; j < stop; ++j) role[static_cast<std::size_t>(j)] = 2;
        for (int j = 0; j < o.val_per_subject; ++j) role[static_cast<std::size_t>((stop + j) % n)] = 1;
      }

      std::set<int> held_orders;
      for (std::size_t i = 0; i < list.size(); ++i)
        if (role[i] != 0) held_orders.insert(list[i].trial_order);

      for (std::size_t i = 0; i < list.size(); ++i) {
        const auto& t = list[i];
        if (role[i] == 2) {
          fold.test.push_back(t.trial_id);
        } else if (role[i] == 1) {
          fold.validation.push_back(t.trial_id);
        } else if (!drop_adjacent ||
                   (!held_orders.count(t.trial_order - 1) && !held_orders.count(t.trial_order + 1))) {
          fold.train.push_back(t.trial_id);
        }
      }
    }
    if (fold.train.empty()) throw InfeasibleSplitError("trial-level split: fold " + std::to_string(k) + " has no training trials");
    finish(fold);
  }
  return folds;
}

std::vector<Fold> subject_folds(const Roster& r, const SplitOptions& o) {
  std::vector<int> subjects;
  for (const auto& [s, list] : r.by_subject) subjects.push_back(s);
  if (subjects.size() < 3) {
    throw InfeasibleSplitError("LOSO: needs at least 3 subjects (train, validation, test), got " +
                               std::to_string(subjects.size()));
  }
  const int n = static_cast<int>(subjects.size());
  std::vector<Fold> folds(static_cast<std::size_t>(cap_folds(n, o)));
  for (std::size_t k = 0; k < folds.size(); ++k) {
    const int test_subject = subjects[k];
    const int val_subject = subjects[(k + 1) % static_cast<std::size_t>(n)];
    Fold& fold = folds[k];
    for (const auto& [s, list] : r.by_subject) {
      auto& dst = s == test_subject ? fold.test : s == val_subject ? fold.validation : fold.train;
      for (const auto& t : list) dst.push_back(t.trial_id);
    }
    finish(fold);
  }
  return folds;
}

/// Held-out key per (fold, subject) for LOCTO/LOATO.
struct KeyAssignment {
  int test = -1;
  int val = -1;
};

std::vector<Fold> keyed_folds(const Roster& r, CvParadigm paradigm, Rng& rng, const SplitOptions& o) {
  const bool by_class = paradigm == CvParadigm::LOCTO;
  const std::string tag = to_string(paradigm);
  const std::string noun = by_class ? "class" : "attended audio";
  auto key_of = [&](const TrialMeta& t) { return by_class ? r.label_of.at(t.trial_id) : t.attended_audio_id; };

  std::set<int> universe_set;
  std::map<int, std::set<int>> subjects_with_key;
  std::map<int, std::map<int, int>> count;  // subject -> key -> trials
  for (const auto& t : r.trials) {
    universe_set.insert(key_of(t));
    subjects_with_key[key_of(t)].insert(t.subject_id);
    ++count[t.subject_id][key_of(t)];
  }
  const std::vector<int> universe(universe_set.begin(), universe_set.end());
  const int n_keys = static_cast<int>(universe.size());

  if (by_class && n_keys < class_count(o.labels)) {
    throw InfeasibleSplitError(tag + ": only " + std::to_string(n_keys) + " of " +
                               std::to_string(class_count(o.labels)) +
                               " classes occur in the data; the test sets cannot cover every class");
  }
  for (const auto& [key, subjects] : subjects_with_key) {
    if (subjects.size() < 2) {
      throw InfeasibleSplitError(tag + ": " + noun + " " + std::to_string(key) +
                                 " occurs for a single subject only; holding it out leaves no training trial of it");
    }
  }
  for (const auto& [subject, keys] : count) {
    if (keys.size() < 2) {
      throw InfeasibleSplitError(tag + ": subject " + std::to_string(subject) + " has a single " + noun +
                                 " value; holding it out leaves nothing to train on");
    }
    if (keys.size() == 2 && std::none_of(keys.begin(), keys.end(), [](const auto& kv) { return kv.second >= 2; })) {
      throw InfeasibleSplitError(tag + ": subject " + std::to_string(subject) + " has two " + noun +
                                 " values with one trial each; validation and test cannot share a held-out value");
    }
  }

  std::vector<int> order;
  for (const auto& [s, list] : r.by_subject) order.push_back(s);
  std::shuffle(order.begin(), order.end(), rng);
  std::map<int, int> offset;
  for (std::size_t i = 0; i < order.size(); ++i) offset[order[i]] = static_cast<int>(i) % n_keys;

  const int n_folds = cap_folds(n_keys, o);
  std::vector<std::map<int, KeyAssignment>> plan(static_cast<std::size_t>(n_folds));
  std::map<int, std::set<int>> tested_by;  // subject -> keys already used as its test key

  for (int k = 0; k < n_folds; ++k) {
    std::set<int> used_in_fold;
    for (int s : order) {
      const auto& have = count[s];
      auto pick = [&](const std::vector<std::function<bool(int)>>& levels, int exclude) {
        for (const auto& accept : levels) {
          for (int j = 0; j < n_keys; ++j) {
            const int key = universe[static_cast<std::size_t>((offset[s] + k + j) % n_keys)];
            if (key == exclude || !have.count(key)) continue;
            if (accept(key)) return key;
          }
        }
        return -1;
      };
      // With only two values, validation and test split the held-out value's
      // trials, so that value needs at least two of them.
      const bool split_held = have.size() == 2;
      auto usable = [&](int c) { return !split_held || have.at(c) >= 2; };
      const int test = pick({[&](int c) { return usable(c) && !tested_by[s].count(c) && !used_in_fold.count(c); },
                             [&](int c) { return usable(c) && !tested_by[s].count(c); },
                             [&](int c) { return usable(c) && !used_in_fold.count(c); }, usable},
                            -1);
      const int val =
          split_held ? test : pick({[&](int c) { return !used_in_fold.count(c); }, [](int) { return true; }}, test);
      plan[static_cast<std::size_t>(k)][s] = {test, val};
      tested_by[s].insert(test);
      used_in_fold.insert(test);
      used_in_fold.insert(val);
    }
  }

  // Repair coverage: every key must be some subject's test key in some fold.
  std::map<int, int> test_uses;
  for (const auto& fold : plan)
    for (const auto& [s, a] : fold) ++test_uses[a.test];
  for (int key : universe) {
    if (test_uses[key] > 0) continue;
    bool placed = false;
    for (auto& fold : plan) {
      for (auto& [s, a] : fold) {
        if (!count[s].count(key) || test_uses[a.test] < 2) continue;
        const bool split_held = count[s].size() == 2;
        if (split_held && count[s].at(key) < 2) continue;
        --test_uses[a.test];
        if (split_held) a.val = key;
        else if (a.val == key) a.val = a.test;
        a.test = key;
        ++test_uses[key];
        placed = true;
        break;
      }
      if (placed) break;
    }
    if (!placed) {
      throw InfeasibleSplitError(tag + ": " + noun + " " + std::to_string(key) + " cannot be placed in any test set of " +
                                 std::to_string(n_folds) + " fold(s); raise max_folds or add subjects");
    }
  }

  std::vector<Fold> folds(static_cast<std::size_t>(n_folds));
  for (int k = 0; k < n_folds; ++k) {
    Fold& fold = folds[static_cast<std::size_t>(k)];
    for (const auto& [s, list] : r.by_subject) {
      const auto a = plan[static_cast<std::size_t>(k)].at(s);
      int held_seen = 0;
      for (const auto& t : list) {
        const int key = key_of(t);
        if (key == a.test && a.val == a.test) {
          (held_seen++ % 2 == 0 ? fold.test : fold.validation).push_back(t.trial_id);
        } else {
          (key == a.test ? fold.test : key == a.val ? fold.validation : fold.train).push_back(t.trial_id);
        }
      }
    }
    finish(fold);
  }
  return folds;
}

}  // namespace

std::string to_string(CvParadigm paradigm) {
  switch (paradigm) {
    case CvParadigm::LOTO: return "LOTO";
    case CvParadigm::LOSO: return "LOSO";
    case CvParadigm::LOMTO: return "LOMTO";
    case CvParadigm::LOCTO: return "LOCTO";
    case CvParadigm::LOATO: return "LOATO";
  }
  throw ParameterError("unknown CV paradigm");
}

CvParadigm parse_cv_paradigm(std::string_view name) {
  for (auto p : {CvParadigm::LOTO, CvParadigm::LOSO, CvParadigm::LOMTO, CvParadigm::LOCTO, CvParadigm::LOATO}) {
    if (name == to_string(p)) return p;
  }
  throw ParameterError("unknown CV paradigm '" + std::string(name) + "' (expected LOTO, LOSO, LOMTO, LOCTO or LOATO)");
}

FoldPlan make_splits(std::span<const TrialMeta> trials, CvParadigm paradigm, std::uint64_t seed,
                     const SplitOptions& options) {
  const Roster roster = build_roster(trials, options.labels);
  if (roster.trials.empty()) throw InfeasibleSplitError("no labeled trials to split");
  Rng rng = make_rng(seed, static_cast<std::uint64_t>(paradigm) + 101);

  FoldPlan plan;
  plan.paradigm = paradigm;
  plan.labels = options.labels;
  switch (paradigm) {
    case CvParadigm::LOTO: plan.folds = trial_level_folds(roster, rng, options, false); break;
    case CvParadigm::LOMTO: plan.folds = trial_level_folds(roster, rng, options, true); break;
    case CvParadigm::LOSO: plan.folds = subject_folds(roster, options); break;
    case CvParadigm::LOCTO:
    case CvParadigm::LOATO: plan.folds = keyed_folds(roster, paradigm, rng, options); break;
  }
  return plan;
}

FoldPlan make_splits(std::span<const EegTrial> trials, CvParadigm paradigm, std::uint64_t seed,
                     const SplitOptions& options) {
  std::vector<TrialMeta> metas;
  metas.reserve(trials.size());
  for (const auto& t : trials) metas.push_back(t.meta());
  return make_splits(metas, paradigm, seed, options);
}

std::vector<std::string> audit_fold_plan(const FoldPlan& plan, std::span<const TrialMeta> trials,
                                         const SplitOptions& options) {
  std::vector<std::string> problems;
  auto fail = [&](std::size_t k, const std::string& what) {
    problems.push_back("fold " + std::to_string(k) + ": " + what);
  };

  std::unordered_map<int, TrialMeta> meta;
  std::set<int> retained;
  for (const auto& t : trials) {
    meta[t.trial_id] = t;
    if (label_trial(t.attended_direction, plan.labels)) retained.insert(t.trial_id);
  }
  const bool by_class = plan.paradigm == CvParadigm::LOCTO;
  auto key_of = [&](int id) {
    const auto& t = meta.at(id);
    return by_class ? *label_trial(t.attended_direction, plan.labels) : t.attended_audio_id;
  };

  std::set<int> tested_all;
  std::set<int> test_keys_all;
  for (std::size_t k = 0; k < plan.folds.size(); ++k) {
    const Fold& f = plan.folds[k];
    std::map<int, int> role;  // trial -> 0 train 1 val 2 test
    bool unknown = false;
    auto mark = [&](const std::vector<int>& ids, int r, const char* name) {
      for (int id : ids) {
        if (!retained.count(id)) {
          fail(k, std::string(name) + " holds unknown or excluded trial " + std::to_string(id));
          unknown = true;
          continue;
        }
        if (!role.emplace(id, r).second) fail(k, "trial " + std::to_string(id) + " appears in more than one set");
      }
    };
    mark(f.train, 0, "train");
    mark(f.validation, 1, "validation");
    mark(f.test, 2, "test");
    if (f.train.empty() || f.validation.empty() || f.test.empty()) fail(k, "empty train, validation or test set");
    if (unknown) continue;
    for (int id : f.test) tested_all.insert(id);

    std::set<int> train_subjects, eval_subjects, val_subjects, test_subjects;
    for (int id : f.train) train_subjects.insert(meta[id].subject_id);
    for (int id : f.validation) val_subjects.insert(meta[id].subject_id);
    for (int id : f.test) test_subjects.insert(meta[id].subject_id);
    eval_subjects = val_subjects;
    eval_subjects.insert(test_subjects.begin(), test_subjects.end());

    switch (plan.paradigm) {
      case CvParadigm::LOSO:
        for (int s : eval_subjects)
          if (train_subjects.count(s)) fail(k, "subject " + std::to_string(s) + " is in training and evaluation");
        for (int s : val_subjects)
          if (test_subjects.count(s)) fail(k, "subject " + std::to_string(s) + " is in validation and test");
        break;
      case CvParadigm::LOMTO: {
        std::map<int, std::set<int>> held;
        for (const auto& [id, r] : role)
          if (r != 0) held[meta[id].subject_id].insert(meta[id].trial_order);
        for (int id : f.train) {
          const auto& t = meta[id];
          const auto& h = held[t.subject_id];
          if (h.count(t.trial_order - 1) || h.count(t.trial_order + 1))
            fail(k, "training trial " + std::to_string(id) + " is adjacent to a held-out trial");
        }
        break;
      }
      case CvParadigm::LOCTO:
      case CvParadigm::LOATO: {
        std::map<int, std::set<int>> test_keys, eval_keys;
        for (int id : f.test) {
          test_keys[meta[id].subject_id].insert(key_of(id));
          test_keys_all.insert(key_of(id));
        }
        for (const auto& [id, r] : role)
          if (r != 0) eval_keys[meta[id].subject_id].insert(key_of(id));
        for (const auto& [s, keys] : test_keys) {
          if (keys.size() != 1)
            fail(k, "subject " + std::to_string(s) + " has " + std::to_string(keys.size()) + " distinct test keys");
        }
        for (int id : f.train) {
          const auto& t = meta[id];
          const auto it = eval_keys.find(t.subject_id);
          if (it != eval_keys.end() && it->second.count(key_of(id)))
            fail(k, "training trial " + std::to_string(id) + " shares a held-out key with its subject's evaluation trials");
        }
        break;
      }
      case CvParadigm::LOTO: break;
    }
  }

  const bool partitions = plan.paradigm == CvParadigm::LOSO || plan.paradigm == CvParadigm::LOTO ||
                          plan.paradigm == CvParadigm::LOMTO;
  if (options.max_folds == 0 && partitions && tested_all != retained)
    problems.push_back("union of " + to_string(plan.paradigm) + " test sets does not equal the trial set");
  if (plan.paradigm == CvParadigm::LOCTO || plan.paradigm == CvParadigm::LOATO) {
    std::set<int> universe;
    for (int id : retained) universe.insert(key_of(id));
    if (test_keys_all != universe) {
      problems.push_back("test sets cover " + std::to_string(test_keys_all.size()) + " of " +
                         std::to_string(universe.size()) + " keys");
    }
    if (by_class && static_cast<int>(test_keys_all.size()) != class_count(plan.labels))
      problems.push_back("test sets do not cover all classes");
  }
  return problems;
}

}  // namespace dirfocus::dataset
