#include <cmath>
#include <set>

#include "doctest.h"
#include "jif/evaluation.hpp"
#include "jif/rng.hpp"

using namespace jif;

namespace {

// Brute-force pair counting: positives ranked above negatives, ties count half.
double pair_count_auc(const Eigen::VectorXd& s, const std::vector<int>& y, int positive) {
  double wins = 0.0, pairs = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    if (y[i] != positive) continue;
    for (std::size_t j = 0; j < y.size(); ++j) {
      if (y[j] == positive) continue;
      pairs += 1.0;
      const double a = s[static_cast<Eigen::Index>(i)], b = s[static_cast<Eigen::Index>(j)];
      wins += a > b ? 1.0 : (a == b ? 0.5 : 0.0);
    }
  }
  return wins / pairs;
}

}  // namespace

TEST_CASE("confusion matrix") {
  const std::vector<int> y{0, 1, 2, 1};
  const ConfusionMatrix diag = confusion(y, y, 3);
  CHECK(diag(1, 1) == 2);
  CHECK(diag.sum() == 4);
  CHECK(diag.trace() == 4);

  const std::vector<int> t{1}, p{0};
  const ConfusionMatrix one = confusion(t, p, 2);
  CHECK(one(1, 0) == 1);
  CHECK(one.sum() == 1);

  const std::vector<int> bad{3};
  CHECK_THROWS_AS(confusion(bad, p, 2), DataError);
  CHECK_THROWS_AS(confusion(y, p, 3), DimensionError);
}

TEST_CASE("balanced accuracy examples") {
  const std::vector<int> y{0, 1, 1, 2};
  CHECK(balanced_accuracy(confusion(y, y, 3)) == 1.0);

  const std::vector<int> two{0, 0, 1, 1, 1};
  const std::vector<int> zeros(5, 0);
  CHECK(balanced_accuracy(confusion(two, zeros, 2)) == 0.5);

  // recalls 9/10, 3/5, 3/4
  ConfusionMatrix cm(3, 3);
  cm << 9, 1, 0, 1, 3, 1, 0, 1, 3;
  CHECK(balanced_accuracy(cm) == doctest::Approx(0.75).epsilon(1e-15));

  // A class without true samples is excluded.
  ConfusionMatrix gap(3, 3);
  gap << 2, 0, 0, 0, 0, 0, 1, 0, 1;
  CHECK(balanced_accuracy(gap) == doctest::Approx(0.75));
  CHECK(std::isnan(per_class_recall(gap)[1]));

  CHECK_THROWS_AS(balanced_accuracy(ConfusionMatrix::Zero(2, 2)), DataError);
}

TEST_CASE("BAC properties: duplication invariance and equality with ACC on uniform classes") {
  Rng rng(3);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<int> y, p;
    for (int c = 0; c < 4; ++c)
      for (int i = 0; i < 10; ++i) {
        y.push_back(c);
        p.push_back(static_cast<int>(rng.below(4)));
      }
    const ConfusionMatrix cm = confusion(y, p, 4);
    CHECK(balanced_accuracy(cm) == doctest::Approx(accuracy(cm)).epsilon(1e-14));

    std::vector<int> y2 = y, p2 = p;
    for (std::size_t i = 0; i < y.size(); ++i)
      if (y[i] == 2) {
        y2.push_back(y[i]);
        p2.push_back(p[i]);
      }
    CHECK(balanced_accuracy(confusion(y2, p2, 4)) == doctest::Approx(balanced_accuracy(cm)).epsilon(1e-14));
    CHECK(accuracy(cm) <= 1.0);
  }
}

TEST_CASE("accuracy of uniform random predictions is close to 1/N") {
  Rng rng(7);
  const int n = 30000, classes = 5;
  std::vector<int> y(n), p(n);
  for (int i = 0; i < n; ++i) {
    y[static_cast<std::size_t>(i)] = static_cast<int>(rng.below(classes));
    p[static_cast<std::size_t>(i)] = static_cast<int>(rng.below(classes));
  }
  const double sigma = std::sqrt(0.2 * 0.8 / n);
  CHECK(std::abs(accuracy(confusion(y, p, classes)) - 0.2) < 3.0 * sigma);
}

TEST_CASE("AUC examples") {
  const std::vector<int> y{0, 0, 1, 1};
  Eigen::MatrixXd sep(4, 2);
  sep << 0.9, 0.1, 0.8, 0.2, 0.3, 0.7, 0.1, 0.9;
  CHECK(auc_macro_ovr(sep, y) == 1.0);
  CHECK(auc_macro_ovr(Eigen::MatrixXd::Constant(4, 2, 0.5), y) == 0.5);

  // One inversion among the four positive/negative pairs.
  Eigen::VectorXd s(4);
  s << 0.1, 0.6, 0.5, 0.9;
  CHECK(auc_one_vs_rest(s, y, 1) == 0.75);

  const std::vector<int> missing{0, 0, 2, 2};
  Eigen::MatrixXd three = Eigen::MatrixXd::Random(4, 3);
  const AucResult r = auc_macro_ovr_detail(three, missing);
  CHECK(r.skipped == std::vector<int>{1});
}

TEST_CASE("AUC matches brute-force pair counting and is invariant under monotone transforms") {
  Rng rng(21);
  for (int trial = 0; trial < 200; ++trial) {
    const int n = 4 + static_cast<int>(rng.below(40));
    const int classes = 2 + static_cast<int>(rng.below(4));
    std::vector<int> y(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) y[static_cast<std::size_t>(i)] = i < classes ? i : static_cast<int>(rng.below(classes));
    Eigen::MatrixXd s(n, classes);
    // Coarse grid so ties occur.
    for (Eigen::Index i = 0; i < s.size(); ++i) s.data()[i] = static_cast<double>(rng.below(8)) / 8.0;
    double expected = 0.0;
    for (int c = 0; c < classes; ++c) expected += pair_count_auc(s.col(c), y, c);
    expected /= classes;
    CHECK(auc_macro_ovr(s, y) == doctest::Approx(expected).epsilon(1e-12));
    const Eigen::MatrixXd t = (s.array() * 3.0).exp() + 1.0;
    CHECK(auc_macro_ovr(t, y) == doctest::Approx(expected).epsilon(1e-12));
  }
}

TEST_CASE("stratified k-fold") {
  std::vector<int> labels(100, 0);
  for (int i = 60; i < 100; ++i) labels[static_cast<std::size_t>(i)] = 1;
  const FoldSplit split = stratified_kfold(labels, 5, 42);
  REQUIRE(split.folds.size() == 5);
  for (const auto& fold : split.folds) {
    int c0 = 0, c1 = 0;
    for (int i : fold) (labels[static_cast<std::size_t>(i)] == 0 ? c0 : c1)++;
    CHECK(c0 == 12);
    CHECK(c1 == 8);
  }
  CHECK(split.warnings.empty());
  CHECK(stratified_kfold(labels, 5, 42).folds == split.folds);
  CHECK(stratified_kfold(labels, 5, 43).folds != split.folds);

  const std::vector<int> single(7, 0);
  const FoldSplit loo = stratified_kfold(single, 7, 1);
  for (const auto& fold : loo.folds) CHECK(fold.size() == 1);

  const std::vector<int> small{0, 0, 0, 1};
  CHECK_FALSE(stratified_kfold(small, 3, 1).warnings.empty());
  CHECK_THROWS_AS(stratified_kfold(small, 5, 1), ConfigError);
  CHECK_THROWS_AS(stratified_kfold(small, 1, 1), ConfigError);
}

TEST_CASE("stratified folds partition the indices with per-class counts within one") {
  Rng rng(8);
  for (int trial = 0; trial < 100; ++trial) {
    const int n = 10 + static_cast<int>(rng.below(200));
    const int classes = 2 + static_cast<int>(rng.below(6));
    const int k = 2 + static_cast<int>(rng.below(9));
    std::vector<int> labels(static_cast<std::size_t>(n));
    for (auto& l : labels) l = static_cast<int>(rng.below(classes));
    if (k > n) continue;
    const FoldSplit split = stratified_kfold(labels, k, rng.below(1000));
    std::set<int> seen;
    std::size_t total = 0;
    for (const auto& fold : split.folds) {
      total += fold.size();
      seen.insert(fold.begin(), fold.end());
    }
    CHECK(total == labels.size());
    CHECK(seen.size() == labels.size());
    for (int c = 0; c < classes; ++c) {
      int lo = n, hi = 0;
      for (const auto& fold : split.folds) {
        int count = 0;
        for (int i : fold) count += labels[static_cast<std::size_t>(i)] == c;
        lo = std::min(lo, count);
        hi = std::max(hi, count);
      }
      CHECK(hi - lo <= 1);
    }
  }
}
