#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "dirfocus/dataset/labels.hpp"
#include "dirfocus/dataset/trial.hpp"

namespace dirfocus::dataset {

/// Leave-one-{trial, subject, moment+trial, class+trial, audio+trial}-out.
enum class CvParadigm { LOTO, LOSO, LOMTO, LOCTO, LOATO };

std::string to_string(CvParadigm paradigm);
CvParadigm parse_cv_paradigm(std::string_view name);

/// Trial ids of one fold, each list sorted ascending.
struct Fold {
  std::vector<int> train;
  std::vector<int> validation;
  std::vector<int> test;
};

struct FoldPlan {
  CvParadigm paradigm = CvParadigm::LOTO;
  LabelParadigm labels = LabelParadigm::Full14;
  std::vector<Fold> folds;
};

struct SplitOptions {
  LabelParadigm labels = LabelParadigm::Full14;
  /// Trial-level paradigms (LOTO, LOMTO): held-out trials per subject per fold.
  int test_per_subject = 1;
  int val_per_subject = 1;
  /// Upper bound on the number of folds; 0 keeps the full family.
  int max_folds = 0;
};

/// Builds the fold family of a paradigm. Trials whose direction the label
/// paradigm excludes are dropped first.
///
/// LOTO: each subject's trials are shuffled once and walked in chunks; fold k
///   tests chunk k and validates on the next chunk, so every trial is tested
///   exactly once over the full family. Subjects with fewer chunks than the
///   longest one contribute only training trials to the surplus folds.
/// LOSO: fold k tests subject k and validates on subject k+1 (cyclic); the
///   training set holds only the remaining subjects.
/// LOMTO: LOTO, then any training trial whose trial_order is adjacent (+-1) to a
///   validation or test trial of the same subject is dropped.
/// LOCTO / LOATO: per fold every subject holds out all its trials of one class
///   (attended audio) for test and of another for validation. Assignment is a
///   seeded round-robin with fallbacks, followed by a repair pass that makes
///   the union of test keys cover every key in the data. A subject with only
///   two values (e.g. Binary2 classes) splits the held-out value's trials
///   between validation and test.
///
/// Throws InfeasibleSplitError naming the violated constraint.
FoldPlan make_splits(std::span<const TrialMeta> trials, CvParadigm paradigm, std::uint64_t seed,
                     const SplitOptions& options = {});

FoldPlan make_splits(std::span<const EegTrial> trials, CvParadigm paradigm, std::uint64_t seed,
                     const SplitOptions& options = {});

/// Checks a plan against every paradigm invariant; returns one message per
/// violation (empty when the plan is sound).
std::vector<std::string> audit_fold_plan(const FoldPlan& plan, std::span<const TrialMeta> trials,
                                         const SplitOptions& options = {});

}  // namespace dirfocus::dataset
