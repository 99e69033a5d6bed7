#pragma once

// Classification metrics and the stratified k-fold splitter.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <cstdint>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "jif/errors.hpp"

namespace jif {

// Rows are ground truth, columns are predictions.
using ConfusionMatrix = Eigen::Matrix<std::int64_t, Eigen::Dynamic, Eigen::Dynamic>;

ConfusionMatrix confusion(std::span<const int> y_true, std::span<const int> y_pred, int num_classes);

// Recall per class; NaN for classes without true samples.
Eigen::VectorXd per_class_recall(const ConfusionMatrix& cm);

// Mean recall over classes that have at least one true sample.
double balanced_accuracy(const ConfusionMatrix& cm);
double accuracy(const ConfusionMatrix& cm);

// One-vs-rest AUC of a single score column, computed from average ranks
// (Mann-Whitney U). Returns NaN if either side is empty.
template <typename Derived>
double auc_one_vs_rest(const Eigen::MatrixBase<Derived>& scores, std::span<const int> y_true,
                       int positive) {
  const Eigen::Index n = scores.size();
  std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  std::sort(order.begin(), order.end(),
            [&](Eigen::Index a, Eigen::Index b) { return scores(a) < scores(b); });
  double pos_rank_sum = 0.0;
  double n_pos = 0.0;
  for (Eigen::Index i = 0; i < n;) {
    Eigen::Index j = i;
    while (j + 1 < n && scores(order[j + 1]) == scores(order[i])) ++j;
    const double rank = 0.5 * static_cast<double>(i + j) + 1.0;
    for (Eigen::Index t = i; t <= j; ++t) {
      if (y_true[static_cast<std::size_t>(order[t])] == positive) {
        pos_rank_sum += rank;
        n_pos += 1.0;
      }
    }
    i = j + 1;
  }
  const double n_neg = static_cast<double>(n) - n_pos;
  if (n_pos == 0.0 || n_neg == 0.0) return std::numeric_limits<double>::quiet_NaN();
  return (pos_rank_sum - n_pos * (n_pos + 1.0) / 2.0) / (n_pos * n_neg);
}

struct AucResult {
  double macro = 0.0;
  std::vector<double> per_class;  // NaN for skipped classes
  std::vector<int> skipped;       // classes absent from y_true
};

// Macro average of one-vs-rest AUCs over classes present in y_true.
template <typename Derived>
AucResult auc_macro_ovr_detail(const Eigen::MatrixBase<Derived>& scores,
                               std::span<const int> y_true) {
  if (scores.rows() != static_cast<Eigen::Index>(y_true.size())) {
    throw DimensionError("auc: " + std::to_string(scores.rows()) + " score rows for " +
                         std::to_string(y_true.size()) + " labels");
  }
  AucResult r;
  double total = 0.0;
  int used = 0;
  for (int c = 0; c < static_cast<int>(scores.cols()); ++c) {
    const double auc = auc_one_vs_rest(scores.col(c), y_true, c);
    r.per_class.push_back(auc);
    if (std::isnan(auc)) {
      r.skipped.push_back(c);
      continue;
    }
    total += auc;
    ++used;
  }
  if (used == 0) throw DataError("auc: no class has both positive and negative samples");
  r.macro = total / used;
  return r;
}

template <typename Derived>
double auc_macro_ovr(const Eigen::MatrixBase<Derived>& scores, std::span<const int> y_true) {
  return auc_macro_ovr_detail(scores, y_true).macro;
}

struct FoldSplit {
  std::vector<std::vector<int>> folds;
  std::vector<std::string> warnings;
};

// Per class: seeded shuffle, then round-robin dealing. The dealing position
// carries over between classes so fold sizes stay balanced as well.
FoldSplit stratified_kfold(std::span<const int> labels, int k, std::uint64_t seed);

}  // namespace jif
