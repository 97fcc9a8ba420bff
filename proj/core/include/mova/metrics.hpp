#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "mova/types.hpp"

namespace mova {

struct BinaryCounts {
  long tp = 0, fp = 0, fn = 0, tn = 0;
  long total() const { return tp + fp + fn + tn; }
};

// Undefined metrics stay unset instead of being coerced to 0: precision needs
// predicted positives, recall needs relevant instances, F1 needs P + R > 0.
struct Rates {
  std::optional<double> precision;
  std::optional<double> recall;
  std::optional<double> f1;
  double accuracy = 0.0;
};

BinaryCounts tally(const std::vector<int>& preds, const std::vector<int>& gold);
Rates rates(const BinaryCounts& counts);

// Mann-Whitney formulation: over all (positive, negative) pairs, a pair
// counts 1 when the positive scores higher and 0.5 on ties.
double auc(const std::vector<double>& scores, const std::vector<int>& gold);

struct DimensionMetrics {
  BinaryCounts counts;
  Rates rates;
  std::optional<double> auc;
  std::optional<double> baseline_f1;  // calibrated random classifier = positive rate
  bool skipped = false;               // webis: no relevant instances
};

struct MetricReport {
  std::string protocol;
  std::vector<std::string> dimensions;
  std::map<std::string, DimensionMetrics> per_dimension;
  std::optional<double> macro_precision, macro_recall, macro_f1, macro_accuracy;
  std::vector<std::string> skipped;
  std::optional<double> accuracy;      // valeval: exact-match proportion
  std::map<int, Rates> per_direction;  // valuenet: -1 / 0 / 1
  long n = 0;
};

MetricReport standard_report(const std::map<std::string, std::vector<int>>& preds,
                             const std::map<std::string, std::vector<int>>& gold,
                             const std::vector<std::string>& dimensions,
                             const std::map<std::string, std::vector<double>>* scores = nullptr);

// Webis protocol: dimensions with no relevant gold instance are skipped from
// the macro aggregates; MacroF1 is the harmonic mean of MacroPrec and
// MacroRec (not the mean of per-dimension F1s); macro accuracy is the mean of
// per-dimension accuracies. Inputs are hard labels (threshold upstream).
MetricReport macro_f1_webis(const std::map<std::string, std::vector<int>>& preds,
                            const std::map<std::string, std::vector<int>>& gold,
                            const std::vector<std::string>& dimensions);

// Exact-match proportion on the target value of each example.
double valeval_accuracy(const std::vector<int>& preds, const std::vector<int>& gold);
std::string valeval_surface(int value);  // 1 -> "Yes", -1 -> "No", 0 -> "Not related"
std::optional<int> valeval_parse(std::string_view surface);

struct ValueNetReport {
  double accuracy = 0.0;
  std::map<int, Rates> per_direction;  // one-vs-rest for -1, 0, 1
  long n = 0;
};

// Rounds raw outputs to the nearest integer (halves away from zero), clamps
// to {-1,0,1}, then scores accuracy and per-direction P/R/F1.
ValueNetReport valuenet_metrics(const std::vector<double>& raw_predictions,
                                const std::vector<int>& gold);
int valuenet_round(double raw);

// A classifier that predicts positive at the base rate r has P = R = F1 = r.
double random_baseline_f1(double positive_rate);

enum class Alternative { greater, less, two_sided };

struct WilcoxonResult {
  double w_plus = 0.0;  // rank sum of positive differences
  long n = 0;           // pairs remaining after zero differences are dropped
  double p_value = 1.0;
  Alternative alternative = Alternative::greater;
  bool exact = false;  // enumeration (n <= 20) vs normal approximation
};

// Zero differences dropped; |D| ranked with average ranks for ties. Exact p
// enumerates all 2^n sign assignments for n <= 20; larger n uses the normal
// approximation with continuity and tie corrections. Throws UsageError when
// all differences are zero or lengths differ.
WilcoxonResult wilcoxon_signed_rank(const std::vector<double>& x,
                                    const std::vector<double>& y,
                                    Alternative alternative);

struct CorrelationEntry {
  std::string dimension_a, dimension_b;
  long a = 0, b = 0, c = 0, d = 0;  // (1,1), (1,0), (0,1), (0,0) counts
  std::optional<double> phi;        // undefined when a marginal is zero
  std::optional<double> chi_square;
  std::optional<double> p_value;    // chi-square with 1 df
};

CorrelationEntry chi_square_phi(const std::vector<int>& labels_a,
                                const std::vector<int>& labels_b, bool yates = false);

// All dimension pairs of a gold-labeled dataset, sorted by phi descending.
std::vector<CorrelationEntry> correlate_pairs(const Dataset& dataset, bool yates = false);

// Nearest-rank percentile: the ceil(p/100 * n)-th order statistic. The
// downstream classification rule is "positive iff score > threshold".
double calibrate_threshold(std::vector<double> scores, double percentile);

std::string significance_stars(double p);  // "", "*", "**", "***"

std::string report_to_json(const MetricReport& report);
std::string report_to_csv(const MetricReport& report);
std::string correlation_to_csv(const std::vector<CorrelationEntry>& entries);

}  // namespace mova
