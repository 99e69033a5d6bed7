#include "jif/stats.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <map>
#include <numeric>
#include <set>

#include "jif/csv.hpp"
#include "json.hpp"

namespace jif {

void FoldResultTable::validate() const {
  if (methods.size() < 2 || runs.size() < 2) {
    throw ContractError("comparison needs at least 2 methods and 2 runs, got " +
                        std::to_string(methods.size()) + " x " + std::to_string(runs.size()));
  }
  if (values.rows() != static_cast<Eigen::Index>(runs.size()) ||
      values.cols() != static_cast<Eigen::Index>(methods.size())) {
    throw ContractError("result table dimensions do not match its labels");
  }
}

FoldResultTable read_fold_table(std::string_view csv_text, const std::string& metric) {
  const CsvTable csv = parse_csv(csv_text);
  const int method_col = csv.column("method");
  const int run_col = csv.column("run");
  const int value_col = csv.column(metric);
  if (method_col < 0 || run_col < 0 || value_col < 0) {
    throw DataError("result CSV needs columns method, run and " + metric);
  }
  FoldResultTable table;
  std::map<std::pair<std::string, std::string>, double> cells;
  for (const auto& row : csv.rows) {
    const auto& method = row[static_cast<std::size_t>(method_col)];
    const auto& run = row[static_cast<std::size_t>(run_col)];
    const auto& text = row[static_cast<std::size_t>(value_col)];
    char* end = nullptr;
    const double v = std::strtod(text.c_str(), &end);
    if (text.empty() || *end != '\0' || !std::isfinite(v)) {
      throw DataError("result CSV: '" + text + "' is not a number (method " + method + ", run " +
                      run + ")");
    }
    if (std::find(table.methods.begin(), table.methods.end(), method) == table.methods.end())
      table.methods.push_back(method);
    if (std::find(table.runs.begin(), table.runs.end(), run) == table.runs.end())
      table.runs.push_back(run);
    if (!cells.emplace(std::make_pair(method, run), v).second) {
      throw DataError("result CSV: duplicate row for method " + method + ", run " + run);
    }
  }
  table.values.resize(static_cast<Eigen::Index>(table.runs.size()),
                      static_cast<Eigen::Index>(table.methods.size()));
  for (std::size_t r = 0; r < table.runs.size(); ++r) {
    for (std::size_t m = 0; m < table.methods.size(); ++m) {
      auto it = cells.find({table.methods[m], table.runs[r]});
      if (it == cells.end()) {
        throw DataError("result CSV is ragged: method " + table.methods[m] + " has no run " +
                        table.runs[r]);
      }
      table.values(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(m)) = it->second;
    }
  }
  return table;
}

Eigen::VectorXd average_ranks(const Eigen::Ref<const Eigen::VectorXd>& values) {
  const Eigen::Index n = values.size();
  std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](Eigen::Index a, Eigen::Index b) { return values[a] < values[b]; });
  Eigen::VectorXd ranks(n);
  for (Eigen::Index i = 0; i < n;) {
    Eigen::Index j = i;
    while (j + 1 < n && values[order[j + 1]] == values[order[i]]) ++j;
    const double rank = 0.5 * static_cast<double>(i + j) + 1.0;
    for (Eigen::Index t = i; t <= j; ++t) ranks[order[t]] = rank;
    i = j + 1;
  }
  return ranks;
}

namespace {

// Sum of t^3 - t over tie groups.
double tie_term(const Eigen::VectorXd& values) {
  std::vector<double> sorted(values.data(), values.data() + values.size());
  std::sort(sorted.begin(), sorted.end());
  double total = 0.0;
  for (std::size_t i = 0; i < sorted.size();) {
    std::size_t j = i;
    while (j + 1 < sorted.size() && sorted[j + 1] == sorted[i]) ++j;
    const double t = static_cast<double>(j - i + 1);
    total += t * t * t - t;
    i = j + 1;
  }
  return total;
}

}  // namespace

// ---- special functions ----

double gamma_q(double a, double x) {
  if (!(a > 0.0) || x < 0.0) throw ContractError("gamma_q needs a > 0 and x >= 0");
  if (x == 0.0) return 1.0;
  const double log_prefix = a * std::log(x) - x - std::lgamma(a);
  if (x < a + 1.0) {
    // Series for P(a, x).
    double term = 1.0 / a, total = term;
    for (int n = 1; n < 10000; ++n) {
      term *= x / (a + n);
      total += term;
      if (std::abs(term) < std::abs(total) * 1e-17) break;
    }
    return std::max(0.0, 1.0 - total * std::exp(log_prefix));
  }
  // Continued fraction for Q(a, x), modified Lentz.
  constexpr double tiny = 1e-300;
  double b = x + 1.0 - a;
  double c = 1.0 / tiny;
  double d = 1.0 / b;
  double h = d;
  for (int i = 1; i < 10000; ++i) {
    const double an = -i * (i - a);
    b += 2.0;
    d = an * d + b;
    if (std::abs(d) < tiny) d = tiny;
    c = b + an / c;
    if (std::abs(c) < tiny) c = tiny;
    d = 1.0 / d;
    const double delta = d * c;
    h *= delta;
    if (std::abs(delta - 1.0) < 1e-16) break;
  }
  return std::exp(log_prefix) * h;
}

double chi_square_sf(double x, int df) {
  if (df < 1) throw ContractError("chi-square needs df >= 1");
  if (x <= 0.0) return 1.0;
  return gamma_q(0.5 * df, 0.5 * x);
}

// ---- Friedman ----

FriedmanResult friedman(const FoldResultTable& table) {
  table.validate();
  const auto n = static_cast<double>(table.values.rows());
  const auto k = static_cast<double>(table.values.cols());
  Eigen::VectorXd rank_sums = Eigen::VectorXd::Zero(table.values.cols());
  double ties = 0.0;
  for (Eigen::Index r = 0; r < table.values.rows(); ++r) {
    const Eigen::VectorXd row = table.values.row(r).transpose();
    rank_sums += average_ranks(row);
    ties += tie_term(row);
  }
  const Eigen::VectorXd mean_ranks = rank_sums / n;
  const double spread = (mean_ranks.array() - (k + 1.0) / 2.0).square().sum();
  const double correction = 1.0 - ties / (n * k * (k * k - 1.0));
  FriedmanResult out;
  out.df = static_cast<int>(k) - 1;
  if (correction <= 0.0) {
    out.chi2 = 0.0;
    out.p = 1.0;
    return out;
  }
  out.chi2 = 12.0 * n / (k * (k + 1.0)) * spread / correction;
  out.p = chi_square_sf(out.chi2, out.df);
  return out;
}

// ---- Wilcoxon ----

namespace {

// Two-sided p from the exact null distribution of W+. Ranks are doubled so
// that average ranks of ties become integers.
double exact_two_sided(const std::vector<double>& ranks, double w_plus) {
  std::vector<long> doubled;
  long total = 0;
  for (double r : ranks) {
    doubled.push_back(std::lround(2.0 * r));
    total += doubled.back();
  }
  std::vector<double> counts(static_cast<std::size_t>(total) + 1, 0.0);
  counts[0] = 1.0;
  long reach = 0;
  for (long r : doubled) {
    for (long s = reach; s >= 0; --s) counts[static_cast<std::size_t>(s + r)] += counts[static_cast<std::size_t>(s)];
    reach += r;
  }
  const long w2 = std::lround(2.0 * w_plus);
  double below = 0.0, above = 0.0, all = 0.0;
  for (long s = 0; s <= total; ++s) {
    const double c = counts[static_cast<std::size_t>(s)];
    all += c;
    if (s <= w2) below += c;
    if (s >= w2) above += c;
  }
  return std::min(1.0, 2.0 * std::min(below, above) / all);
}

double normal_two_sided(const std::vector<double>& abs_diffs, double w_plus) {
  const auto n = static_cast<double>(abs_diffs.size());
  const double mean = n * (n + 1.0) / 4.0;
  Eigen::VectorXd v = Eigen::Map<const Eigen::VectorXd>(abs_diffs.data(),
                                                        static_cast<Eigen::Index>(abs_diffs.size()));
  const double var = n * (n + 1.0) * (2.0 * n + 1.0) / 24.0 - tie_term(v) / 48.0;
  if (var <= 0.0) return 1.0;
  const double z = std::max(0.0, std::abs(w_plus - mean) - 0.5) / std::sqrt(var);
  return std::min(1.0, std::erfc(z / std::sqrt(2.0)));
}

// Doubled counts stay exact in a double up to 2^53.
constexpr int kExactLimit = 50;

}  // namespace

WilcoxonResult wilcoxon_signed_rank(std::span<const double> a, std::span<const double> b,
                                    WilcoxonMode mode) {
  if (a.size() != b.size() || a.size() < 2) {
    throw ContractError("wilcoxon: need two samples of equal length >= 2");
  }
  std::vector<double> diffs;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    if (d != 0.0) diffs.push_back(d);
  }
  if (diffs.empty()) throw DataError("wilcoxon: all paired differences are zero");

  Eigen::VectorXd abs_d(static_cast<Eigen::Index>(diffs.size()));
  for (std::size_t i = 0; i < diffs.size(); ++i) abs_d[static_cast<Eigen::Index>(i)] = std::abs(diffs[i]);
  const Eigen::VectorXd ranks = average_ranks(abs_d);

  WilcoxonResult out;
  out.n_effective = static_cast<int>(diffs.size());
  for (std::size_t i = 0; i < diffs.size(); ++i) {
    (diffs[i] > 0.0 ? out.w_plus : out.w_minus) += ranks[static_cast<Eigen::Index>(i)];
  }
  out.w = std::min(out.w_plus, out.w_minus);

  out.exact = mode == WilcoxonMode::Exact ||
              (mode == WilcoxonMode::Auto && out.n_effective <= kWilcoxonExactCrossover);
  if (out.exact) {
    if (out.n_effective > kExactLimit) {
      throw ContractError("wilcoxon: exact mode supports at most " + std::to_string(kExactLimit) +
                          " non-zero differences");
    }
    out.p_two_sided = exact_two_sided(std::vector<double>(ranks.data(), ranks.data() + ranks.size()),
                                      out.w_plus);
  } else {
    out.p_two_sided = normal_two_sided(
        std::vector<double>(abs_d.data(), abs_d.data() + abs_d.size()), out.w_plus);
  }
  return out;
}

// ---- Friedman-gated pairwise comparison ----

ComparisonReport compare_methods(const FoldResultTable& table, double alpha, WilcoxonMode mode) {
  if (!(alpha > 0.0 && alpha < 1.0)) throw ConfigError("alpha must lie in (0, 1)");
  ComparisonReport report;
  report.alpha = alpha;
  report.omnibus = friedman(table);
  report.gated = report.omnibus.p < alpha;
  if (!report.gated) return report;
  const Eigen::Index k = table.values.cols();
  for (Eigen::Index i = 0; i < k; ++i) {
    for (Eigen::Index j = i + 1; j < k; ++j) {
      const Eigen::VectorXd a = table.values.col(i);
      const Eigen::VectorXd b = table.values.col(j);
      PairwiseResult pair;
      pair.first = table.methods[static_cast<std::size_t>(i)];
      pair.second = table.methods[static_cast<std::size_t>(j)];
      try {
        pair.test = wilcoxon_signed_rank(std::span<const double>(a.data(), a.size()),
                                         std::span<const double>(b.data(), b.size()), mode);
      } catch (const DataError&) {
        // Identical columns: no evidence of a difference.
        pair.test.p_two_sided = 1.0;
      }
      pair.significant = pair.test.p_two_sided < alpha;
      report.pairs.push_back(std::move(pair));
    }
  }
  return report;
}

std::string report_to_json(const ComparisonReport& report) {
  nlohmann::json doc;
  doc["alpha"] = report.alpha;
  doc["friedman"] = {{"chi2", report.omnibus.chi2},
                     {"df", report.omnibus.df},
                     {"p", report.omnibus.p}};
  doc["pairwise_performed"] = report.gated;
  doc["pairwise"] = nlohmann::json::array();
  for (const auto& p : report.pairs) {
    doc["pairwise"].push_back({{"pair", p.first + " - " + p.second},
                               {"first", p.first},
                               {"second", p.second},
                               {"W", p.test.w},
                               {"W_plus", p.test.w_plus},
                               {"W_minus", p.test.w_minus},
                               {"n_effective", p.test.n_effective},
                               {"exact", p.test.exact},
                               {"p_value", p.test.p_two_sided},
                               {"significant", p.significant}});
  }
  return doc.dump(2) + "\n";
}

namespace {

std::string format_p(double p) {
  char buf[32];
  if (p < 1e-3) {
    std::snprintf(buf, sizeof buf, "%.2E", p);
  } else {
    std::snprintf(buf, sizeof buf, "%.4f", p);
  }
  return buf;
}

}  // namespace

std::string report_to_markdown(const ComparisonReport& report) {
  std::string out;
  char buf[128];
  std::snprintf(buf, sizeof buf, "Friedman: chi2 = %.4f, df = %d, p = %s (alpha = %g)\n\n",
                report.omnibus.chi2, report.omnibus.df, format_p(report.omnibus.p).c_str(),
                report.alpha);
  out += buf;
  if (!report.gated) {
    out += "No pairwise tests: the Friedman test does not reject at this alpha.\n";
    return out;
  }
  out += "| Model-Pairs | P_value |\n|---|---|\n";
  for (const auto& p : report.pairs) {
    std::string value = format_p(p.test.p_two_sided);
    if (p.test.p_two_sided > report.alpha) value = "**" + value + "**";
    out += "| " + p.first + " - " + p.second + " | " + value + " |\n";
  }
  return out;
}

}  // namespace jif
