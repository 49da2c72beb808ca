#pragma once

#include <map>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace eegemd {

struct EvalResult {
  std::map<int, double> per_class_recall;
  std::map<int, int> support;
  double overall = 0.0;        // support-weighted: correct / n_test
  double overall_macro = 0.0;  // mean of per-class recalls
  int n_test = 0;
  int n_correct = 0;
};

/// Per-class recall and both overall accuracy conventions. Every class in
/// `labels` must have at least one example.
EvalResult evaluate(std::span<const int> preds, std::span<const int> labels);

enum class ChanceMethod { Majority, BinomialCI };
ChanceMethod parse_chance_method(std::string_view s);

/// Majority: largest class proportion. BinomialCI: 0.5 + z_{1-alpha/2} *
/// sqrt(0.25 / n), the upper edge of a coin-flip confidence interval.
double chance_level(std::span<const int> labels, ChanceMethod method = ChanceMethod::Majority,
                    double alpha = 0.05);

/// Subjects with overall >= chance + margin, sorted by id.
std::vector<std::string> select_subjects(const std::map<std::string, EvalResult>& results,
                                         const std::map<std::string, double>& chance,
                                         double margin = 0.10);

enum class WilcoxonMode { Exact, NormalApprox, Auto };
WilcoxonMode parse_wilcoxon_mode(std::string_view s);
std::string_view to_string(WilcoxonMode m);

struct PairedTestResult {
  double statistic = 0.0;  // min(W+, W-)
  double p_value = 1.0;    // two-sided
  int n_pairs = 0;         // after dropping zero differences
  int zero_diffs_dropped = 0;
  double z = 0.0;          // normal-approx only
};

/// Wilcoxon signed-rank test on x - y. Zero differences are dropped and ties
/// mid-ranked. Exact mode enumerates all 2^n sign patterns of the (mid)ranks
/// (n <= 20); the normal approximation uses the tie-corrected variance and no
/// continuity correction. Auto picks exact for n <= 20.
PairedTestResult wilcoxon_signed_rank(std::span<const double> x, std::span<const double> y,
                                      WilcoxonMode mode = WilcoxonMode::Auto);

struct Summary {
  double mean = 0.0;
  double sd = 0.0;  // sample (n - 1); 0 for a single value
};

Summary cohort_summary(std::span<const double> values);

}  // namespace eegemd
