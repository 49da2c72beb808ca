#include "eegemd/stats.hpp"

#include <boost/math/distributions/normal.hpp>

#include <algorithm>
#include <cmath>
#include <numeric>

#include "eegemd/error.hpp"

namespace eegemd {

EvalResult evaluate(std::span<const int> preds, std::span<const int> labels) {
  if (preds.size() != labels.size()) throw invalid_input("predictions and labels differ in length");
  if (labels.empty()) throw invalid_input("no test examples");
  EvalResult r;
  std::map<int, int> correct;
  for (size_t i = 0; i < labels.size(); ++i) {
    ++r.support[labels[i]];
    correct[labels[i]] += preds[i] == labels[i] ? 1 : 0;
    r.n_correct += preds[i] == labels[i] ? 1 : 0;
  }
  for (const auto& [cls, n] : r.support) {
    r.per_class_recall[cls] = static_cast<double>(correct[cls]) / n;
  }
  r.n_test = static_cast<int>(labels.size());
  r.overall = static_cast<double>(r.n_correct) / r.n_test;
  double sum = 0.0;
  for (const auto& [cls, rec] : r.per_class_recall) sum += rec;
  r.overall_macro = sum / static_cast<double>(r.per_class_recall.size());
  return r;
}

ChanceMethod parse_chance_method(std::string_view s) {
  if (s == "majority") return ChanceMethod::Majority;
  if (s == "binomial_ci") return ChanceMethod::BinomialCI;
  throw invalid_input("unknown chance method '" + std::string(s) + "' (majority|binomial_ci)");
}

double chance_level(std::span<const int> labels, ChanceMethod method, double alpha) {
  if (labels.empty()) throw invalid_input("chance level of an empty label set");
  const double n = static_cast<double>(labels.size());
  if (method == ChanceMethod::Majority) {
    std::map<int, int> counts;
    for (int l : labels) ++counts[l];
    int best = 0;
    for (const auto& [cls, c] : counts) best = std::max(best, c);
    return best / n;
  }
  if (!(alpha > 0.0 && alpha < 1.0)) throw invalid_input("alpha must lie in (0, 1)");
  const double z = boost::math::quantile(boost::math::normal(), 1.0 - alpha / 2.0);
  return 0.5 + z * std::sqrt(0.25 / n);
}

std::vector<std::string> select_subjects(const std::map<std::string, EvalResult>& results,
                                         const std::map<std::string, double>& chance, double margin) {
  if (results.size() != chance.size()) throw invalid_input("results and chance levels cover different subjects");
  std::vector<std::string> out;
  for (const auto& [id, r] : results) {
    auto it = chance.find(id);
    if (it == chance.end()) throw invalid_input("no chance level for subject " + id);
    // Inclusive boundary, with a few ulps of slack for values built by addition.
    if (r.overall >= it->second + margin - 1e-12) out.push_back(id);
  }
  return out;
}

WilcoxonMode parse_wilcoxon_mode(std::string_view s) {
  if (s == "exact") return WilcoxonMode::Exact;
  if (s == "normal-approx" || s == "normal_approx" || s == "approx") return WilcoxonMode::NormalApprox;
  if (s == "auto") return WilcoxonMode::Auto;
  throw invalid_input("unknown Wilcoxon mode '" + std::string(s) + "' (exact|normal-approx|auto)");
}

std::string_view to_string(WilcoxonMode m) {
  switch (m) {
    case WilcoxonMode::Exact:
      return "exact";
    case WilcoxonMode::NormalApprox:
      return "normal-approx";
    case WilcoxonMode::Auto:
      return "auto";
  }
  return "auto";
}

PairedTestResult wilcoxon_signed_rank(std::span<const double> x, std::span<const double> y,
                                      WilcoxonMode mode) {
  if (x.size() != y.size()) throw invalid_input("wilcoxon: samples differ in length");
  std::vector<double> d;
  PairedTestResult r;
  for (size_t i = 0; i < x.size(); ++i) {
    const double diff = x[i] - y[i];
    if (!std::isfinite(diff)) throw invalid_input("wilcoxon: non-finite input");
    if (diff == 0.0) {
      ++r.zero_diffs_dropped;
    } else {
      d.push_back(diff);
    }
  }
  const int n = static_cast<int>(d.size());
  r.n_pairs = n;
  if (n == 0) throw invalid_input("wilcoxon: all differences are zero");
  if (n < 5) throw invalid_input("wilcoxon: need at least 5 nonzero differences");

  // Mid-ranks of |d|, doubled so they stay integral.
  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](int a, int b) { return std::abs(d[a]) < std::abs(d[b]); });
  std::vector<int> rank2(n);
  double tie_term = 0.0;
  for (int i = 0; i < n;) {
    int j = i;
    while (j + 1 < n && std::abs(d[order[j + 1]]) == std::abs(d[order[i]])) ++j;
    const int t = j - i + 1;
    for (int k = i; k <= j; ++k) rank2[order[k]] = (i + 1) + (j + 1);  // 2 * mean rank
    tie_term += static_cast<double>(t) * t * t - t;
    i = j + 1;
  }
  long w_plus2 = 0;
  long total2 = 0;
  for (int i = 0; i < n; ++i) {
    total2 += rank2[i];
    if (d[i] > 0) w_plus2 += rank2[i];
  }
  const double w_plus = w_plus2 / 2.0;
  const double w_minus = (total2 - w_plus2) / 2.0;
  r.statistic = std::min(w_plus, w_minus);

  const bool exact = mode == WilcoxonMode::Exact || (mode == WilcoxonMode::Auto && n <= 20);
  const double nn = n;
  if (exact) {
    // Distribution of the doubled positive-rank sum over all 2^n sign patterns.
    std::vector<double> ways(static_cast<size_t>(total2) + 1, 0.0);
    ways[0] = 1.0;
    long reach = 0;
    for (int i = 0; i < n; ++i) {
      for (long s = reach; s >= 0; --s) {
        if (ways[s] != 0.0) ways[s + rank2[i]] += ways[s];
      }
      reach += rank2[i];
    }
    const double patterns = std::ldexp(1.0, n);
    // Two-sided: patterns at least as far from the centre as observed.
    const long dev = std::abs(2 * w_plus2 - total2);
    double tail = 0.0;
    for (long s = 0; s <= total2; ++s) {
      if (std::abs(2 * s - total2) >= dev) tail += ways[s];
    }
    r.p_value = std::min(1.0, tail / patterns);
    return r;
  }

  const double mean = nn * (nn + 1.0) / 4.0;
  const double var = nn * (nn + 1.0) * (2.0 * nn + 1.0) / 24.0 - tie_term / 48.0;
  if (!(var > 0.0)) throw invalid_input("wilcoxon: degenerate variance");
  r.z = (r.statistic - mean) / std::sqrt(var);
  r.p_value = std::min(1.0, std::erfc(std::abs(r.z) / std::sqrt(2.0)));
  return r;
}

Summary cohort_summary(std::span<const double> values) {
  if (values.empty()) throw invalid_input("cohort_summary of an empty vector");
  const double n = static_cast<double>(values.size());
  const double mean = std::accumulate(values.begin(), values.end(), 0.0) / n;
  if (values.size() == 1) return {mean, 0.0};
  double ss = 0.0;
  for (double v : values) ss += (v - mean) * (v - mean);
  return {mean, std::sqrt(ss / (n - 1.0))};
}

}  // namespace eegemd
