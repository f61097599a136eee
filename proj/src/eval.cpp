#include "petl/eval.hpp"

#include <algorithm>
#include <iomanip>
#include <set>
#include <sstream>
#include <stdexcept>

namespace petl {

std::int64_t ConfusionMatrix::total() const {
  std::int64_t t = 0;
  for (auto c : counts) t += c;
  return t;
}

std::int64_t ConfusionMatrix::trace() const {
  std::int64_t t = 0;
  for (std::size_t i = 0; i < classes.size(); ++i)
    t += counts[i * classes.size() + i];
  return t;
}

std::vector<std::int64_t> ConfusionMatrix::row_sums() const {
  std::vector<std::int64_t> r(classes.size(), 0);
  for (std::size_t i = 0; i < classes.size(); ++i)
    for (std::size_t j = 0; j < classes.size(); ++j)
      r[i] += counts[i * classes.size() + j];
  return r;
}

std::string ConfusionMatrix::to_text() const {
  std::size_t w = 8;
  for (const auto& c : classes) w = std::max(w, c.size() + 1);
  std::ostringstream os;
  os << std::setw(static_cast<int>(w)) << "actual\\pred";
  for (const auto& c : classes) os << std::setw(static_cast<int>(w)) << c;
  os << "\n";
  for (std::size_t i = 0; i < classes.size(); ++i) {
    os << std::setw(static_cast<int>(w)) << classes[i];
    for (std::size_t j = 0; j < classes.size(); ++j)
      os << std::setw(static_cast<int>(w)) << counts[i * classes.size() + j];
    os << "\n";
  }
  os << "accuracy = " << std::fixed << std::setprecision(4) << accuracy() << " (" << trace()
     << "/" << total() << ")\n";
  return os.str();
}

std::string ConfusionMatrix::to_csv() const {
  std::ostringstream os;
  os << "actual\\pred";
  for (const auto& c : classes) os << "," << c;
  os << "\n";
  for (std::size_t i = 0; i < classes.size(); ++i) {
    os << classes[i];
    for (std::size_t j = 0; j < classes.size(); ++j)
      os << "," << counts[i * classes.size() + j];
    os << "\n";
  }
  return os.str();
}

FoldPlan make_kfold_by_subject(std::vector<std::string> subjects, int k, int group_size) {
  std::sort(subjects.begin(), subjects.end());
  subjects.erase(std::unique(subjects.begin(), subjects.end()), subjects.end());
  const int n = static_cast<int>(subjects.size());
  if (k < 1 || k > n)
    throw std::invalid_argument("make_kfold_by_subject: k=" + std::to_string(k) +
                                " exceeds subject count " + std::to_string(n));
  if (group_size < 1) throw std::invalid_argument("make_kfold_by_subject: bad group size");
  if (static_cast<std::int64_t>(k - 1) * group_size >= n)
    throw std::invalid_argument(
        "make_kfold_by_subject: group size leaves an empty final fold");
  FoldPlan plan(static_cast<std::size_t>(k));
  for (int f = 0; f < k; ++f) {
    const int lo = f * group_size;
    const int hi = (f == k - 1) ? n : std::min(n, lo + group_size);
    for (int i = 0; i < n; ++i) {
      if (i >= lo && i < hi)
        plan[f].test_subjects.push_back(subjects[i]);
      else
        plan[f].train_subjects.push_back(subjects[i]);
    }
  }
  return plan;
}

FoldPlan make_loso(std::vector<std::string> subjects) {
  std::sort(subjects.begin(), subjects.end());
  subjects.erase(std::unique(subjects.begin(), subjects.end()), subjects.end());
  if (subjects.size() < 2) throw std::invalid_argument("make_loso: need >= 2 subjects");
  return make_kfold_by_subject(subjects, static_cast<int>(subjects.size()), 1);
}

namespace {

int index_of(const std::vector<std::string>& classes, const std::string& name) {
  const auto it = std::find(classes.begin(), classes.end(), name);
  if (it == classes.end())
    throw std::invalid_argument("evaluate: class '" + name + "' not in class list");
  return static_cast<int>(it - classes.begin());
}

}  // namespace

ConfusionMatrix evaluate(const std::vector<std::string>& predicted,
                         const std::vector<std::string>& actual,
                         const std::vector<std::string>& classes) {
  if (predicted.size() != actual.size())
    throw std::invalid_argument("evaluate: prediction/label count mismatch");
  if (predicted.empty()) throw std::invalid_argument("evaluate: empty evaluation slice");
  ConfusionMatrix cm(classes);
  for (std::size_t i = 0; i < predicted.size(); ++i)
    ++cm.at(index_of(classes, actual[i]), index_of(classes, predicted[i]));
  return cm;
}

CrossDatasetReport cross_dataset_eval(const std::vector<std::string>& predicted,
                                      const std::vector<std::string>& actual,
                                      const std::vector<std::string>& source_classes,
                                      const std::vector<std::string>& target_classes) {
  std::set<std::string> src(source_classes.begin(), source_classes.end());
  bool any_common = false;
  for (const auto& c : target_classes) any_common |= src.count(c) > 0;
  if (!any_common)
    throw std::invalid_argument(
        "cross_dataset_eval: source and target class sets share no names");
  CrossDatasetReport rep{ConfusionMatrix(source_classes), 0};
  if (predicted.size() != actual.size())
    throw std::invalid_argument("cross_dataset_eval: prediction/label count mismatch");
  for (std::size_t i = 0; i < actual.size(); ++i) {
    if (!src.count(actual[i])) {
      ++rep.dropped;
      continue;
    }
    ++rep.matrix.at(index_of(source_classes, actual[i]),
                    index_of(source_classes, predicted[i]));
  }
  return rep;
}

ConfusionMatrix aggregate_folds(const std::vector<ConfusionMatrix>& matrices) {
  if (matrices.empty()) throw std::invalid_argument("aggregate_folds: no matrices");
  ConfusionMatrix out(matrices.front().classes);
  for (const auto& m : matrices) {
    if (m.classes != out.classes)
      throw std::invalid_argument("aggregate_folds: class list mismatch");
    for (std::size_t i = 0; i < out.counts.size(); ++i) out.counts[i] += m.counts[i];
  }
  return out;
}

namespace {

std::string fmt_acc(double a) {
  if (a < 0) return "-";
  std::ostringstream os;
  os << std::fixed << std::setprecision(2) << a * 100.0;
  return os.str();
}

}  // namespace

std::string accuracy_table_text(const std::vector<AccuracyRow>& rows) {
  static const char* cols[] = {"Baseline", "FTL",  "Eyebrows", "Eyes", "Nose",
                               "Mouth",    "Jaw",  "EL"};
  std::ostringstream os;
  os << std::left << std::setw(16) << "Run";
  for (const char* c : cols) os << std::right << std::setw(10) << c;
  os << "\n";
  for (const auto& r : rows) {
    os << std::left << std::setw(16) << r.label;
    for (double v : {r.baseline, r.ftl, r.eyebrows, r.eyes, r.nose, r.mouth, r.jaw,
                     r.ensemble})
      os << std::right << std::setw(10) << fmt_acc(v);
    os << "\n";
  }
  return os.str();
}

std::string accuracy_table_csv(const std::vector<AccuracyRow>& rows) {
  std::ostringstream os;
  os << "run,Baseline,FTL,Eyebrows,Eyes,Nose,Mouth,Jaw,EL\n";
  for (const auto& r : rows) {
    os << r.label;
    for (double v : {r.baseline, r.ftl, r.eyebrows, r.eyes, r.nose, r.mouth, r.jaw,
                     r.ensemble})
      os << "," << fmt_acc(v);
    os << "\n";
  }
  return os.str();
}

}  // namespace petl
