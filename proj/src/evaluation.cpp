#include "jif/evaluation.hpp"

#include <map>

#include "jif/rng.hpp"

namespace jif {

ConfusionMatrix confusion(std::span<const int> y_true, std::span<const int> y_pred, int num_classes) {
  if (y_true.size() != y_pred.size()) {
    throw DimensionError("confusion: " + std::to_string(y_true.size()) + " labels vs " +
                         std::to_string(y_pred.size()) + " predictions");
  }
  ConfusionMatrix cm = ConfusionMatrix::Zero(num_classes, num_classes);
  for (std::size_t i = 0; i < y_true.size(); ++i) {
    const int t = y_true[i], p = y_pred[i];
    if (t < 0 || t >= num_classes || p < 0 || p >= num_classes) {
      throw DataError("confusion: label pair (" + std::to_string(t) + ", " + std::to_string(p) +
                      ") at sample " + std::to_string(i) + " outside [0, " +
                      std::to_string(num_classes) + ")");
    }
    ++cm(t, p);
  }
  return cm;
}

Eigen::VectorXd per_class_recall(const ConfusionMatrix& cm) {
  Eigen::VectorXd recall(cm.rows());
  for (Eigen::Index c = 0; c < cm.rows(); ++c) {
    const auto support = cm.row(c).sum();
    recall[c] = support == 0 ? std::numeric_limits<double>::quiet_NaN()
                             : static_cast<double>(cm(c, c)) / static_cast<double>(support);
  }
  return recall;
}

double balanced_accuracy(const ConfusionMatrix& cm) {
  const Eigen::VectorXd recall = per_class_recall(cm);
  double total = 0.0;
  int present = 0;
  for (Eigen::Index c = 0; c < recall.size(); ++c) {
    if (std::isnan(recall[c])) continue;
    total += recall[c];
    ++present;
  }
  if (present == 0) throw DataError("balanced_accuracy: empty confusion matrix");
  return total / present;
}

double accuracy(const ConfusionMatrix& cm) {
  const auto n = cm.sum();
  if (n == 0) throw DataError("accuracy: empty confusion matrix");
  return static_cast<double>(cm.trace()) / static_cast<double>(n);
}

FoldSplit stratified_kfold(std::span<const int> labels, int k, std::uint64_t seed) {
  if (k < 2) throw ConfigError("stratified_kfold: k must be at least 2");
  if (static_cast<std::size_t>(k) > labels.size()) {
    throw ConfigError("stratified_kfold: k = " + std::to_string(k) + " exceeds " +
                      std::to_string(labels.size()) + " samples");
  }
  std::map<int, std::vector<int>> by_class;
  for (std::size_t i = 0; i < labels.size(); ++i) by_class[labels[i]].push_back(static_cast<int>(i));

  FoldSplit split;
  split.folds.resize(static_cast<std::size_t>(k));
  Rng rng(seed);
  std::size_t next_fold = 0;
  for (auto& [label, members] : by_class) {
    if (members.size() < static_cast<std::size_t>(k)) {
      split.warnings.push_back("class " + std::to_string(label) + " has " +
                               std::to_string(members.size()) + " samples, fewer than " +
                               std::to_string(k) + " folds");
    }
    rng.shuffle(std::span<int>(members));
    for (int idx : members) {
      split.folds[next_fold].push_back(idx);
      next_fold = (next_fold + 1) % static_cast<std::size_t>(k);
    }
  }
  for (auto& fold : split.folds) std::sort(fold.begin(), fold.end());
  return split;
}

}  // namespace jif
