#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace petl {

// Rows = actual class, columns = predicted class.
struct ConfusionMatrix {
  std::vector<std::string> classes;
  std::vector<std::int64_t> counts;  // C*C row-major

  explicit ConfusionMatrix(std::vector<std::string> cls)
      : classes(std::move(cls)),
        counts(classes.size() * classes.size(), 0) {}

  std::int64_t& at(int actual, int predicted) {
    return counts[static_cast<std::size_t>(actual) * classes.size() + predicted];
  }
  std::int64_t at(int actual, int predicted) const {
    return counts[static_cast<std::size_t>(actual) * classes.size() + predicted];
  }
  std::int64_t total() const;
  std::int64_t trace() const;
  double accuracy() const { return total() ? static_cast<double>(trace()) / total() : 0.0; }
  std::vector<std::int64_t> row_sums() const;
  std::string to_text() const;
  std::string to_csv() const;
};

struct Fold {
  std::vector<std::string> train_subjects;
  std::vector<std::string> test_subjects;
};

using FoldPlan = std::vector<Fold>;

// Subjects sorted ascending, chunked into k test groups of group_size (the
// last group takes the remainder). Subject-independent by construction.
FoldPlan make_kfold_by_subject(std::vector<std::string> subjects, int k, int group_size);

// One fold per subject.
FoldPlan make_loso(std::vector<std::string> subjects);

// Tallies name-keyed predictions against actual labels over a shared class
// list.
ConfusionMatrix evaluate(const std::vector<std::string>& predicted,
                         const std::vector<std::string>& actual,
                         const std::vector<std::string>& classes);

struct CrossDatasetReport {
  ConfusionMatrix matrix;
  std::int64_t dropped = 0;  // target samples whose class the source lacks
};

// Evaluation over the source class list; target samples with labels the
// source vocabulary lacks are dropped and counted. Mapping is by class name.
CrossDatasetReport cross_dataset_eval(const std::vector<std::string>& predicted,
                                      const std::vector<std::string>& actual,
                                      const std::vector<std::string>& source_classes,
                                      const std::vector<std::string>& target_classes);

// Element-wise sum; class lists must match.
ConfusionMatrix aggregate_folds(const std::vector<ConfusionMatrix>& matrices);

// Accuracy table with the Baseline / FTL / per-part / EL column layout.
struct AccuracyRow {
  std::string label;  // e.g. a dataset or fold name
  double baseline = -1, ftl = -1;
  double eyebrows = -1, eyes = -1, nose = -1, mouth = -1, jaw = -1;
  double ensemble = -1;
};

std::string accuracy_table_text(const std::vector<AccuracyRow>& rows);
std::string accuracy_table_csv(const std::vector<AccuracyRow>& rows);

}  // namespace petl
