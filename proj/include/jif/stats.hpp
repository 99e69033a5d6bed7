#pragma once

// Paired model comparison: Friedman omnibus test over per-run ranks, then
// pairwise two-sided Wilcoxon signed-rank tests when the omnibus rejects.

#include <Eigen/Dense>

#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "jif/errors.hpp"

namespace jif {

// values(run, method); rectangular, no missing cells.
struct FoldResultTable {
  std::vector<std::string> methods;
  std::vector<std::string> runs;
  Eigen::MatrixXd values;

  void validate() const;
};

// Header-keyed CSV with at least `method,run,<metric>` columns. Throws
// DataError on ragged tables (a method missing a run, or duplicates).
FoldResultTable read_fold_table(std::string_view csv_text, const std::string& metric = "bac");

// Average ranks (1-based, ascending) with ties sharing the mean rank.
Eigen::VectorXd average_ranks(const Eigen::Ref<const Eigen::VectorXd>& values);

struct FriedmanResult {
  double chi2 = 0.0;
  int df = 0;
  double p = 1.0;
};

FriedmanResult friedman(const FoldResultTable& table);

enum class WilcoxonMode { Exact, Normal, Auto };

struct WilcoxonResult {
  double w = 0.0;        // min(W+, W-)
  double w_plus = 0.0;
  double w_minus = 0.0;
  double p_two_sided = 1.0;
  int n_effective = 0;
  bool exact = false;
};

// Largest n_effective handled by Auto as exact.
inline constexpr int kWilcoxonExactCrossover = 12;

WilcoxonResult wilcoxon_signed_rank(std::span<const double> a, std::span<const double> b,
                                    WilcoxonMode mode = WilcoxonMode::Auto);

struct PairwiseResult {
  std::string first;
  std::string second;
  WilcoxonResult test;
  bool significant = false;
};

struct ComparisonReport {
  double alpha = 0.05;
  FriedmanResult omnibus;
  bool gated = false;  // pairwise section present
  std::vector<PairwiseResult> pairs;
};

ComparisonReport compare_methods(const FoldResultTable& table, double alpha = 0.05,
                                 WilcoxonMode mode = WilcoxonMode::Auto);

std::string report_to_json(const ComparisonReport& report);
// Two-column "Model-Pairs | P_value" table; p > alpha is set in bold.
std::string report_to_markdown(const ComparisonReport& report);

// Regularized upper incomplete gamma Q(a, x).
double gamma_q(double a, double x);
double chi_square_sf(double x, int df);

}  // namespace jif
