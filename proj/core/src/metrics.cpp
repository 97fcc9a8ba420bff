#include "mova/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include <nlohmann/json.hpp>

namespace mova {

namespace {

using json = nlohmann::json;

void require_binary(const std::vector<int>& values, const char* what) {
  for (int v : values)
    if (v != 0 && v != 1) throw UsageError(std::string(what) + " must be binary 0/1");
}

double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::sqrt(2.0)); }

// Average ranks (1-based) with midranks for ties.
std::vector<double> average_ranks(const std::vector<double>& values) {
  const std::size_t n = values.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(),
            [&values](std::size_t a, std::size_t b) { return values[a] < values[b]; });
  std::vector<double> ranks(n);
  std::size_t i = 0;
  while (i < n) {
    std::size_t j = i;
    while (j + 1 < n && values[order[j + 1]] == values[order[i]]) ++j;
    const double rank = (static_cast<double>(i) + static_cast<double>(j)) / 2.0 + 1.0;
    for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = rank;
    i = j + 1;
  }
  return ranks;
}

}  // namespace

BinaryCounts tally(const std::vector<int>& preds, const std::vector<int>& gold) {
  if (preds.size() != gold.size()) throw UsageError("preds and gold differ in length");
  require_binary(preds, "predictions");
  require_binary(gold, "gold labels");
  BinaryCounts counts;
  for (std::size_t i = 0; i < preds.size(); ++i) {
    if (preds[i] == 1 && gold[i] == 1) ++counts.tp;
    else if (preds[i] == 1 && gold[i] == 0) ++counts.fp;
    else if (preds[i] == 0 && gold[i] == 1) ++counts.fn;
    else ++counts.tn;
  }
  return counts;
}

Rates rates(const BinaryCounts& counts) {
  Rates out;
  const long pos = counts.tp + counts.fp;  // predicted positive
  const long rel = counts.tp + counts.fn;  // relevant
  if (pos > 0) out.precision = static_cast<double>(counts.tp) / pos;
  if (rel > 0) out.recall = static_cast<double>(counts.tp) / rel;
  if (out.precision && out.recall && (*out.precision + *out.recall) > 0.0)
    out.f1 = 2.0 * *out.precision * *out.recall / (*out.precision + *out.recall);
  const long n = counts.total();
  if (n == 0) throw UsageError("empty confusion table");
  out.accuracy = static_cast<double>(counts.tp + counts.tn) / n;
  return out;
}

double auc(const std::vector<double>& scores, const std::vector<int>& gold) {
  if (scores.size() != gold.size()) throw UsageError("scores and gold differ in length");
  require_binary(gold, "gold labels");
  const long n_pos = std::count(gold.begin(), gold.end(), 1);
  const long n_neg = static_cast<long>(gold.size()) - n_pos;
  if (n_pos == 0 || n_neg == 0) throw UsageError("AUC needs both classes in gold");

  const auto ranks = average_ranks(scores);
  double rank_sum = 0.0;
  for (std::size_t i = 0; i < gold.size(); ++i)
    if (gold[i] == 1) rank_sum += ranks[i];
  const double u = rank_sum - static_cast<double>(n_pos) * (n_pos + 1) / 2.0;
  return u / (static_cast<double>(n_pos) * static_cast<double>(n_neg));
}

MetricReport standard_report(const std::map<std::string, std::vector<int>>& preds,
                             const std::map<std::string, std::vector<int>>& gold,
                             const std::vector<std::string>& dimensions,
                             const std::map<std::string, std::vector<double>>* scores) {
  MetricReport report;
  report.protocol = "standard";
  report.dimensions = dimensions;
  double prec_sum = 0, rec_sum = 0, f1_sum = 0, acc_sum = 0;
  long prec_n = 0, rec_n = 0, f1_n = 0;
  for (const auto& dim : dimensions) {
    auto p = preds.find(dim);
    auto g = gold.find(dim);
    if (p == preds.end() || g == gold.end())
      throw UsageError("missing prediction/gold column for " + dim);
    DimensionMetrics metrics;
    metrics.counts = tally(p->second, g->second);
    metrics.rates = rates(metrics.counts);
    report.n = metrics.counts.total();
    const long rel = metrics.counts.tp + metrics.counts.fn;
    metrics.baseline_f1 =
        random_baseline_f1(static_cast<double>(rel) / metrics.counts.total());
    if (scores) {
      auto s = scores->find(dim);
      if (s != scores->end() && rel > 0 && rel < metrics.counts.total())
        metrics.auc = auc(s->second, g->second);
    }
    if (metrics.rates.precision) { prec_sum += *metrics.rates.precision; ++prec_n; }
    if (metrics.rates.recall) { rec_sum += *metrics.rates.recall; ++rec_n; }
    if (metrics.rates.f1) { f1_sum += *metrics.rates.f1; ++f1_n; }
    acc_sum += metrics.rates.accuracy;
    report.per_dimension[dim] = std::move(metrics);
  }
  if (prec_n) report.macro_precision = prec_sum / prec_n;
  if (rec_n) report.macro_recall = rec_sum / rec_n;
  if (f1_n) report.macro_f1 = f1_sum / f1_n;
  if (!dimensions.empty()) report.macro_accuracy = acc_sum / dimensions.size();
  return report;
}

MetricReport macro_f1_webis(const std::map<std::string, std::vector<int>>& preds,
                            const std::map<std::string, std::vector<int>>& gold,
                            const std::vector<std::string>& dimensions) {
  MetricReport report;
  report.protocol = "webis";
  report.dimensions = dimensions;
  double prec_sum = 0, rec_sum = 0, acc_sum = 0;
  long active = 0;
  for (const auto& dim : dimensions) {
    auto p = preds.find(dim);
    auto g = gold.find(dim);
    if (p == preds.end() || g == gold.end())
      throw UsageError("missing prediction/gold column for " + dim);
    DimensionMetrics metrics;
    metrics.counts = tally(p->second, g->second);
    metrics.rates = rates(metrics.counts);
    report.n = metrics.counts.total();
    const long rel = metrics.counts.tp + metrics.counts.fn;
    if (rel == 0) {
      metrics.skipped = true;
      report.skipped.push_back(dim);
    } else {
      ++active;
      // Undefined precision (no predicted positives) counts as 0 here; the
      // per-dimension report still shows it as undefined.
      prec_sum += metrics.rates.precision.value_or(0.0);
      rec_sum += *metrics.rates.recall;
      acc_sum += metrics.rates.accuracy;
    }
    report.per_dimension[dim] = std::move(metrics);
  }
  if (active == 0) throw UsageError("every dimension skipped (no relevant instances)");
  report.macro_precision = prec_sum / active;
  report.macro_recall = rec_sum / active;
  if (*report.macro_precision + *report.macro_recall > 0.0)
    report.macro_f1 = 2.0 * *report.macro_precision * *report.macro_recall /
                      (*report.macro_precision + *report.macro_recall);
  report.macro_accuracy = acc_sum / active;
  return report;
}

double valeval_accuracy(const std::vector<int>& preds, const std::vector<int>& gold) {
  if (preds.size() != gold.size()) throw UsageError("preds and gold differ in length");
  if (preds.empty()) throw UsageError("empty input");
  auto check = [](const std::vector<int>& v) {
    for (int x : v)
      if (x < -1 || x > 1) throw UsageError("label outside {-1,0,1}");
  };
  check(preds);
  check(gold);
  long hits = 0;
  for (std::size_t i = 0; i < preds.size(); ++i)
    if (preds[i] == gold[i]) ++hits;
  return static_cast<double>(hits) / preds.size();
}

std::string valeval_surface(int value) {
  if (value == 1) return "Yes";
  if (value == -1) return "No";
  if (value == 0) return "Not related";
  throw UsageError("label outside {-1,0,1}");
}

std::optional<int> valeval_parse(std::string_view surface) {
  if (surface == "Yes") return 1;
  if (surface == "No") return -1;
  if (surface == "Not related") return 0;
  return std::nullopt;
}

int valuenet_round(double raw) {
  const long rounded = std::lround(raw);  // halves away from zero
  return static_cast<int>(std::clamp(rounded, -1L, 1L));
}

ValueNetReport valuenet_metrics(const std::vector<double>& raw_predictions,
                                const std::vector<int>& gold) {
  if (raw_predictions.size() != gold.size())
    throw UsageError("preds and gold differ in length");
  if (raw_predictions.empty()) throw UsageError("empty input");
  for (int g : gold)
    if (g < -1 || g > 1) throw UsageError("gold label outside {-1,0,1}");

  std::vector<int> preds(raw_predictions.size());
  std::transform(raw_predictions.begin(), raw_predictions.end(), preds.begin(),
                 valuenet_round);
  ValueNetReport report;
  report.n = static_cast<long>(preds.size());
  long hits = 0;
  for (std::size_t i = 0; i < preds.size(); ++i)
    if (preds[i] == gold[i]) ++hits;
  report.accuracy = static_cast<double>(hits) / preds.size();

  for (int direction : {-1, 0, 1}) {
    std::vector<int> p(preds.size()), g(preds.size());
    for (std::size_t i = 0; i < preds.size(); ++i) {
      p[i] = preds[i] == direction ? 1 : 0;
      g[i] = gold[i] == direction ? 1 : 0;
    }
    report.per_direction[direction] = rates(tally(p, g));
  }
  return report;
}

double random_baseline_f1(double positive_rate) {
  if (positive_rate < 0.0 || positive_rate > 1.0)
    throw UsageError("positive rate out of [0,1]");
  return positive_rate;
}

WilcoxonResult wilcoxon_signed_rank(const std::vector<double>& x,
                                    const std::vector<double>& y,
                                    Alternative alternative) {
  if (x.size() != y.size()) throw UsageError("paired samples differ in length");
  if (x.empty()) throw UsageError("empty samples");

  std::vector<double> diffs;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double d = x[i] - y[i];
    if (d != 0.0) diffs.push_back(d);
  }
  if (diffs.empty()) throw UsageError("all differences are zero");

  const std::size_t n = diffs.size();
  std::vector<double> abs_diffs(n);
  std::transform(diffs.begin(), diffs.end(), abs_diffs.begin(),
                 [](double d) { return std::fabs(d); });
  const auto ranks = average_ranks(abs_diffs);

  double w_plus = 0.0;
  for (std::size_t i = 0; i < n; ++i)
    if (diffs[i] > 0.0) w_plus += ranks[i];

  WilcoxonResult result;
  result.w_plus = w_plus;
  result.n = static_cast<long>(n);
  result.alternative = alternative;

  if (n <= 20) {
    result.exact = true;
    // Doubling makes midranks integral; subset-sum counting over all 2^n
    // sign assignments.
    std::vector<long> weights(n);
    long max_sum = 0;
    for (std::size_t i = 0; i < n; ++i) {
      weights[i] = std::llround(2.0 * ranks[i]);
      max_sum += weights[i];
    }
    std::vector<double> count(static_cast<std::size_t>(max_sum) + 1, 0.0);
    count[0] = 1.0;
    for (const long w : weights)
      for (long s = max_sum; s >= w; --s) count[s] += count[s - w];
    const double total = std::pow(2.0, static_cast<double>(n));
    const long observed = std::llround(2.0 * w_plus);
    double p_greater = 0.0, p_less = 0.0;
    for (long s = 0; s <= max_sum; ++s) {
      if (s >= observed) p_greater += count[s];
      if (s <= observed) p_less += count[s];
    }
    p_greater /= total;
    p_less /= total;
    switch (alternative) {
      case Alternative::greater: result.p_value = p_greater; break;
      case Alternative::less: result.p_value = p_less; break;
      case Alternative::two_sided:
        result.p_value = std::min(1.0, 2.0 * std::min(p_greater, p_less));
        break;
    }
    return result;
  }

  // Normal approximation with continuity and tie corrections.
  const double dn = static_cast<double>(n);
  const double mean = dn * (dn + 1.0) / 4.0;
  double tie_term = 0.0;
  {
    std::vector<double> sorted(abs_diffs);
    std::sort(sorted.begin(), sorted.end());
    std::size_t i = 0;
    while (i < sorted.size()) {
      std::size_t j = i;
      while (j + 1 < sorted.size() && sorted[j + 1] == sorted[i]) ++j;
      const double t = static_cast<double>(j - i + 1);
      tie_term += t * t * t - t;
      i = j + 1;
    }
  }
  const double variance = dn * (dn + 1.0) * (2.0 * dn + 1.0) / 24.0 - tie_term / 48.0;
  const double sd = std::sqrt(variance);
  const double p_greater = 1.0 - normal_cdf((w_plus - mean - 0.5) / sd);
  const double p_less = normal_cdf((w_plus - mean + 0.5) / sd);
  switch (alternative) {
    case Alternative::greater: result.p_value = p_greater; break;
    case Alternative::less: result.p_value = p_less; break;
    case Alternative::two_sided:
      result.p_value = std::min(1.0, 2.0 * std::min(p_greater, p_less));
      break;
  }
  return result;
}

CorrelationEntry chi_square_phi(const std::vector<int>& labels_a,
                                const std::vector<int>& labels_b, bool yates) {
  if (labels_a.size() != labels_b.size()) throw UsageError("label vectors differ in length");
  require_binary(labels_a, "labels");
  require_binary(labels_b, "labels");
  CorrelationEntry entry;
  for (std::size_t i = 0; i < labels_a.size(); ++i) {
    if (labels_a[i] == 1 && labels_b[i] == 1) ++entry.a;
    else if (labels_a[i] == 1 && labels_b[i] == 0) ++entry.b;
    else if (labels_a[i] == 0 && labels_b[i] == 1) ++entry.c;
    else ++entry.d;
  }
  const double r1 = static_cast<double>(entry.a + entry.b);
  const double r0 = static_cast<double>(entry.c + entry.d);
  const double c1 = static_cast<double>(entry.a + entry.c);
  const double c0 = static_cast<double>(entry.b + entry.d);
  if (r1 == 0 || r0 == 0 || c1 == 0 || c0 == 0) return entry;  // phi undefined

  const double n = r1 + r0;
  const double cross = static_cast<double>(entry.a) * entry.d -
                       static_cast<double>(entry.b) * entry.c;
  const double denom = r1 * r0 * c1 * c0;
  entry.phi = cross / std::sqrt(denom);
  double numerator = cross;
  if (yates) numerator = std::max(0.0, std::fabs(cross) - n / 2.0);
  const double chi2 = n * numerator * numerator / denom;
  entry.chi_square = chi2;
  entry.p_value = std::erfc(std::sqrt(chi2 / 2.0));  // chi-square, 1 df
  return entry;
}

std::vector<CorrelationEntry> correlate_pairs(const Dataset& dataset, bool yates) {
  if (!dataset.framework.scheme.is_binary())
    throw UsageError("label correlation needs a binary framework");
  const auto& dims = dataset.framework.dimensions;
  std::map<std::string, std::vector<int>> columns;
  for (const auto& instance : dataset.instances) {
    if (!instance.gold)
      throw UsageError("instance '" + instance.id + "' has no gold labels");
    for (std::size_t i = 0; i < dims.size(); ++i)
      columns[dims[i]].push_back(instance.gold->values[i]);
  }
  std::vector<CorrelationEntry> entries;
  for (std::size_t i = 0; i < dims.size(); ++i) {
    for (std::size_t j = i + 1; j < dims.size(); ++j) {
      auto entry = chi_square_phi(columns[dims[i]], columns[dims[j]], yates);
      entry.dimension_a = dims[i];
      entry.dimension_b = dims[j];
      entries.push_back(std::move(entry));
    }
  }
  std::stable_sort(entries.begin(), entries.end(), [](const auto& a, const auto& b) {
    if (a.phi.has_value() != b.phi.has_value()) return a.phi.has_value();
    if (!a.phi) return false;
    return *a.phi > *b.phi;
  });
  return entries;
}

double calibrate_threshold(std::vector<double> scores, double percentile) {
  if (scores.empty()) throw UsageError("empty scores");
  if (percentile <= 0.0 || percentile >= 100.0)
    throw UsageError("percentile must lie in (0,100)");
  std::sort(scores.begin(), scores.end());
  const double n = static_cast<double>(scores.size());
  auto k = static_cast<long>(std::ceil(percentile * n / 100.0 - 1e-9));
  k = std::max(1L, std::min(k, static_cast<long>(scores.size())));
  return scores[static_cast<std::size_t>(k - 1)];
}

std::string significance_stars(double p) {
  if (p < 0.001) return "***";
  if (p < 0.01) return "**";
  if (p < 0.05) return "*";
  return "";
}

namespace {

json rate_json(const std::optional<double>& v) {
  if (!v) return nullptr;
  return *v;
}

json dimension_json(const DimensionMetrics& m) {
  json out;
  out["tp"] = m.counts.tp;
  out["fp"] = m.counts.fp;
  out["fn"] = m.counts.fn;
  out["tn"] = m.counts.tn;
  out["precision"] = rate_json(m.rates.precision);
  out["recall"] = rate_json(m.rates.recall);
  out["f1"] = rate_json(m.rates.f1);
  out["accuracy"] = m.rates.accuracy;
  out["auc"] = rate_json(m.auc);
  out["baseline_f1"] = rate_json(m.baseline_f1);
  out["skipped"] = m.skipped;
  return out;
}

std::string csv_cell(const std::optional<double>& v) {
  if (!v) return "undefined";
  std::ostringstream ss;
  ss.precision(10);
  ss << *v;
  return ss.str();
}

}  // namespace

std::string report_to_json(const MetricReport& report) {
  json out;
  out["protocol"] = report.protocol;
  out["n"] = report.n;
  out["dimensions"] = report.dimensions;
  json per = json::object();
  for (const auto& [dim, metrics] : report.per_dimension) per[dim] = dimension_json(metrics);
  out["per_dimension"] = std::move(per);
  out["macro_precision"] = rate_json(report.macro_precision);
  out["macro_recall"] = rate_json(report.macro_recall);
  out["macro_f1"] = rate_json(report.macro_f1);
  out["macro_accuracy"] = rate_json(report.macro_accuracy);
  out["skipped"] = report.skipped;
  out["accuracy"] = rate_json(report.accuracy);
  if (!report.per_direction.empty()) {
    json dir = json::object();
    for (const auto& [direction, r] : report.per_direction) {
      json entry;
      entry["precision"] = rate_json(r.precision);
      entry["recall"] = rate_json(r.recall);
      entry["f1"] = rate_json(r.f1);
      entry["accuracy"] = r.accuracy;
      dir[std::to_string(direction)] = std::move(entry);
    }
    out["per_direction"] = std::move(dir);
  }
  return out.dump(2);
}

std::string report_to_csv(const MetricReport& report) {
  std::ostringstream out;
  out << "dimension,metric,value\n";
  for (const auto& dim : report.dimensions) {
    auto it = report.per_dimension.find(dim);
    if (it == report.per_dimension.end()) continue;
    const auto& m = it->second;
    out << dim << ",precision," << csv_cell(m.rates.precision) << "\n";
    out << dim << ",recall," << csv_cell(m.rates.recall) << "\n";
    out << dim << ",f1," << csv_cell(m.rates.f1) << "\n";
    out << dim << ",accuracy," << csv_cell(m.rates.accuracy) << "\n";
    out << dim << ",auc," << csv_cell(m.auc) << "\n";
    out << dim << ",baseline_f1," << csv_cell(m.baseline_f1) << "\n";
    out << dim << ",skipped," << (m.skipped ? "true" : "false") << "\n";
  }
  out << "macro,precision," << csv_cell(report.macro_precision) << "\n";
  out << "macro,recall," << csv_cell(report.macro_recall) << "\n";
  out << "macro,f1," << csv_cell(report.macro_f1) << "\n";
  out << "macro,accuracy," << csv_cell(report.macro_accuracy) << "\n";
  if (report.accuracy) out << "overall,accuracy," << csv_cell(report.accuracy) << "\n";
  for (const auto& [direction, r] : report.per_direction) {
    out << "direction " << direction << ",precision," << csv_cell(r.precision) << "\n";
    out << "direction " << direction << ",recall," << csv_cell(r.recall) << "\n";
    out << "direction " << direction << ",f1," << csv_cell(r.f1) << "\n";
  }
  return out.str();
}

std::string correlation_to_csv(const std::vector<CorrelationEntry>& entries) {
  std::ostringstream out;
  out << "dimension_a,dimension_b,phi,chi_square,p_value,a,b,c,d\n";
  for (const auto& e : entries) {
    out << e.dimension_a << "," << e.dimension_b << "," << csv_cell(e.phi) << ","
        << csv_cell(e.chi_square) << "," << csv_cell(e.p_value) << "," << e.a << "," << e.b
        << "," << e.c << "," << e.d << "\n";
  }
  return out.str();
}

}  // namespace mova
