#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "mova/metrics.hpp"
#include "test_support.hpp"

using namespace mova;

namespace {

// O(n^2) pair-enumeration oracle for AUC (ties count 0.5).
double auc_pair_oracle(const std::vector<double>& scores, const std::vector<int>& gold) {
  double wins = 0.0;
  long pairs = 0;
  for (std::size_t i = 0; i < gold.size(); ++i) {
    if (gold[i] != 1) continue;
    for (std::size_t j = 0; j < gold.size(); ++j) {
      if (gold[j] != 0) continue;
      ++pairs;
      if (scores[i] > scores[j]) wins += 1.0;
      else if (scores[i] == scores[j]) wins += 0.5;
    }
  }
  return wins / pairs;
}

// Average ranks of |d|, matching the test's own independent computation.
std::vector<double> rank_oracle(const std::vector<double>& magnitudes) {
  const std::size_t n = magnitudes.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return magnitudes[a] < magnitudes[b]; });
  std::vector<double> ranks(n);
  std::size_t i = 0;
  while (i < n) {
    std::size_t j = i;
    while (j + 1 < n && magnitudes[order[j + 1]] == magnitudes[order[i]]) ++j;
    for (std::size_t k = i; k <= j; ++k)
      ranks[order[k]] = (double(i) + double(j)) / 2.0 + 1.0;
    i = j + 1;
  }
  return ranks;
}

struct WilcoxonOracle {
  double w_plus;
  double p_greater;
  double p_less;
  long n;
};

// Full 2^n sign-assignment enumeration.
WilcoxonOracle wilcoxon_oracle(const std::vector<double>& x, const std::vector<double>& y) {
  std::vector<double> diffs;
  for (std::size_t i = 0; i < x.size(); ++i)
    if (x[i] != y[i]) diffs.push_back(x[i] - y[i]);
  const std::size_t n = diffs.size();
  std::vector<double> magnitudes(n);
  for (std::size_t i = 0; i < n; ++i) magnitudes[i] = std::fabs(diffs[i]);
  const auto ranks = rank_oracle(magnitudes);
  double observed = 0.0;
  for (std::size_t i = 0; i < n; ++i)
    if (diffs[i] > 0) observed += ranks[i];

  long at_least = 0, at_most = 0;
  const long total = 1L << n;
  for (long mask = 0; mask < total; ++mask) {
    double w = 0.0;
    for (std::size_t i = 0; i < n; ++i)
      if (mask & (1L << i)) w += ranks[i];
    if (w >= observed - 1e-9) ++at_least;
    if (w <= observed + 1e-9) ++at_most;
  }
  return {observed, double(at_least) / total, double(at_most) / total, long(n)};
}

}  // namespace

TEST_CASE("binary counts and rates") {
  SUBCASE("perfect predictions") {
    const std::vector<int> gold{1, 0, 1, 0, 1};
    const auto r = rates(tally(gold, gold));
    CHECK(*r.precision == 1.0);
    CHECK(*r.recall == 1.0);
    CHECK(*r.f1 == 1.0);
    CHECK(r.accuracy == 1.0);
  }
  SUBCASE("all-negative predictions leave precision undefined, recall 0") {
    const std::vector<int> preds{0, 0, 0, 0};
    const std::vector<int> gold{1, 0, 1, 0};
    const auto r = rates(tally(preds, gold));
    CHECK_FALSE(r.precision.has_value());
    CHECK(*r.recall == 0.0);
    CHECK_FALSE(r.f1.has_value());
    CHECK(r.accuracy == 0.5);
  }
  SUBCASE("eight-item fixture matches an exhaustive hand count") {
    const std::vector<int> preds{1, 1, 0, 0, 1, 0, 1, 0};
    const std::vector<int> gold{1, 0, 1, 0, 1, 1, 0, 0};
    const auto counts = tally(preds, gold);
    long tp = 0, fp = 0, fn = 0, tn = 0;
    for (int i = 0; i < 8; ++i) {
      tp += preds[i] == 1 && gold[i] == 1;
      fp += preds[i] == 1 && gold[i] == 0;
      fn += preds[i] == 0 && gold[i] == 1;
      tn += preds[i] == 0 && gold[i] == 0;
    }
    CHECK(counts.tp == tp);
    CHECK(counts.fp == fp);
    CHECK(counts.fn == fn);
    CHECK(counts.tn == tn);
    CHECK(counts.total() == 8);
  }
  SUBCASE("F1 equals 2PR/(P+R) whenever defined") {
    std::mt19937 rng(3);
    for (int trial = 0; trial < 100; ++trial) {
      std::vector<int> preds(20), gold(20);
      for (int i = 0; i < 20; ++i) {
        preds[i] = rng() % 2;
        gold[i] = rng() % 2;
      }
      const auto r = rates(tally(preds, gold));
      if (r.f1) {
        const double expected = 2.0 * *r.precision * *r.recall /
                                (*r.precision + *r.recall);
        CHECK(*r.f1 == doctest::Approx(expected).epsilon(1e-13));
      }
    }
  }
  SUBCASE("length mismatch and non-binary values are rejected") {
    CHECK_THROWS_AS(tally({1, 0}, {1}), UsageError);
    CHECK_THROWS_AS(tally({2, 0}, {1, 0}), UsageError);
  }
}

TEST_CASE("auc basics") {
  CHECK(auc({0.9, 0.8, 0.2, 0.1}, {1, 1, 0, 0}) == 1.0);
  CHECK(auc({0.5, 0.5, 0.5, 0.5}, {1, 0, 1, 0}) == 0.5);
  CHECK(auc({0.1, 0.2, 0.8, 0.9}, {1, 1, 0, 0}) == 0.0);
  CHECK_THROWS_AS(auc({0.1, 0.2}, {1, 1}), UsageError);
}

TEST_CASE("auc equals pair enumeration on random fixtures") {
  std::mt19937 rng(7);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (int trial = 0; trial < 100; ++trial) {
    const int n = 5 + int(rng() % 8);
    std::vector<double> scores(n);
    std::vector<int> gold(n);
    bool has_pos = false, has_neg = false;
    for (int i = 0; i < n; ++i) {
      scores[i] = (rng() % 3 == 0) ? 0.5 : unit(rng);  // force some ties
      gold[i] = rng() % 2;
      has_pos |= gold[i] == 1;
      has_neg |= gold[i] == 0;
    }
    if (!has_pos) gold[0] = 1;
    if (!has_neg) gold[n - 1] = 0;
    CHECK(auc(scores, gold) ==
          doctest::Approx(auc_pair_oracle(scores, gold)).epsilon(1e-12));
  }
}

TEST_CASE("auc properties") {
  std::mt19937 rng(19);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (int trial = 0; trial < 50; ++trial) {
    const int n = 8 + int(rng() % 6);
    std::vector<double> scores(n);
    std::vector<int> gold(n);
    for (int i = 0; i < n; ++i) {
      scores[i] = unit(rng);  // ties have measure zero
      gold[i] = i % 2;
    }
    std::vector<double> negated(n), transformed(n);
    for (int i = 0; i < n; ++i) {
      negated[i] = -scores[i];
      transformed[i] = std::exp(3.0 * scores[i]);  // strictly monotone
    }
    CHECK(auc(scores, gold) + auc(negated, gold) == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(auc(scores, gold) == doctest::Approx(auc(transformed, gold)).epsilon(1e-12));
  }
}

TEST_CASE("webis macro protocol") {
  SUBCASE("one active dimension, perfect") {
    std::map<std::string, std::vector<int>> preds{{"A", {1, 0, 1}}};
    std::map<std::string, std::vector<int>> gold{{"A", {1, 0, 1}}};
    const auto report = macro_f1_webis(preds, gold, {"A"});
    CHECK(*report.macro_f1 == 1.0);
    CHECK(report.skipped.empty());
  }
  SUBCASE("Rel=0 dimensions are skipped from the macro aggregates") {
    std::map<std::string, std::vector<int>> preds{
        {"A", {1, 0, 1, 0}}, {"B", {0, 1, 0, 0}}, {"C", {1, 0, 0, 0}}};
    std::map<std::string, std::vector<int>> gold{
        {"A", {1, 0, 1, 0}}, {"B", {0, 1, 1, 0}}, {"C", {0, 0, 0, 0}}};  // C: Rel=0
    const auto report = macro_f1_webis(preds, gold, {"A", "B", "C"});
    CHECK(report.skipped == std::vector<std::string>{"C"});
    CHECK(report.per_dimension.at("C").skipped);
    // MacroPrec = (1 + 1)/2, MacroRec = (1 + 0.5)/2.
    CHECK(*report.macro_precision == doctest::Approx(1.0));
    CHECK(*report.macro_recall == doctest::Approx(0.75));
    const double harmonic = 2.0 * 1.0 * 0.75 / 1.75;
    CHECK(*report.macro_f1 == doctest::Approx(harmonic).epsilon(1e-12));
  }
  SUBCASE("macro F1 is the harmonic of the aggregates, not the mean of F1s") {
    // Hand computation both ways on a 2-dimension fixture.
    std::map<std::string, std::vector<int>> preds{{"A", {1, 1, 0, 0}},
                                                  {"B", {1, 0, 0, 0}}};
    std::map<std::string, std::vector<int>> gold{{"A", {1, 0, 1, 0}},
                                                 {"B", {1, 1, 1, 0}}};
    // A: TP=1, FP=1, FN=1 -> P=0.5, R=0.5, F1=0.5
    // B: TP=1, FP=0, FN=2 -> P=1.0, R=1/3, F1=0.5
    const double macro_p = (0.5 + 1.0) / 2;          // 0.75
    const double macro_r = (0.5 + 1.0 / 3.0) / 2;    // 0.41666...
    const double protocol = 2 * macro_p * macro_r / (macro_p + macro_r);
    const double naive_mean_of_f1 = 0.5;
    const auto report = macro_f1_webis(preds, gold, {"A", "B"});
    CHECK(*report.macro_f1 == doctest::Approx(protocol).epsilon(1e-12));
    CHECK(*report.macro_f1 != doctest::Approx(naive_mean_of_f1).epsilon(1e-6));
    CHECK(*report.macro_accuracy == doctest::Approx((0.5 + 0.5) / 2).epsilon(1e-12));
  }
  SUBCASE("every dimension skipped is an error") {
    std::map<std::string, std::vector<int>> preds{{"A", {0, 0}}};
    std::map<std::string, std::vector<int>> gold{{"A", {0, 0}}};
    CHECK_THROWS_AS(macro_f1_webis(preds, gold, {"A"}), UsageError);
  }
}

TEST_CASE("valeval exact-match accuracy") {
  CHECK(valeval_accuracy({1, 0, -1, 0}, {1, 0, -1, 0}) == 1.0);
  CHECK(valeval_accuracy({1, 0, -1, 0}, {1, 0, -1, 1}) == 0.75);
  CHECK_THROWS_AS(valeval_accuracy({2, 0}, {1, 0}), UsageError);
  CHECK_THROWS_AS(valeval_accuracy({}, {}), UsageError);

  // Y -> Yes, N -> No, U -> Not related round-trips.
  const LabelScheme ynu{LabelSchemeKind::ternary_ynu};
  for (int v : {-1, 0, 1}) {
    CHECK(valeval_parse(valeval_surface(v)) == v);
    CHECK(ynu.decode(valeval_surface(v)) == v);
  }
  CHECK(valeval_surface(*ynu.decode("Y")) == "Yes");
  CHECK(valeval_surface(*ynu.decode("N")) == "No");
  CHECK(valeval_surface(*ynu.decode("U")) == "Not related");
}

TEST_CASE("valuenet rounding and per-direction metrics") {
  CHECK(valuenet_round(0.6) == 1);
  CHECK(valuenet_round(0.4) == 0);
  CHECK(valuenet_round(-0.5) == -1);  // halves away from zero
  CHECK(valuenet_round(0.5) == 1);
  CHECK(valuenet_round(-2.7) == -1);  // clamped
  CHECK(valuenet_round(3.2) == 1);

  const std::vector<double> raw{0.9, -0.6, 0.1, 1.4, -0.2, -1.0, 0.6, 0.4, -0.5};
  const std::vector<int> gold{1, -1, 0, 1, 0, -1, 0, 0, 0};
  const auto report = valuenet_metrics(raw, gold);
  // Rounded: 1, -1, 0, 1, 0, -1, 1, 0, -1.
  std::vector<int> rounded{1, -1, 0, 1, 0, -1, 1, 0, -1};
  long hits = 0;
  for (int i = 0; i < 9; ++i) hits += rounded[i] == gold[i];
  CHECK(report.accuracy == doctest::Approx(double(hits) / 9).epsilon(1e-12));
  // Brute-force one-vs-rest confusion per direction.
  for (int direction : {-1, 0, 1}) {
    long tp = 0, fp = 0, fn = 0;
    for (int i = 0; i < 9; ++i) {
      tp += rounded[i] == direction && gold[i] == direction;
      fp += rounded[i] == direction && gold[i] != direction;
      fn += rounded[i] != direction && gold[i] == direction;
    }
    const auto& r = report.per_direction.at(direction);
    if (tp + fp > 0) CHECK(*r.precision == doctest::Approx(double(tp) / (tp + fp)));
    if (tp + fn > 0) CHECK(*r.recall == doctest::Approx(double(tp) / (tp + fn)));
  }
  CHECK_THROWS_AS(valuenet_metrics({}, {}), UsageError);
}

TEST_CASE("random baseline F1 equals the positive rate") {
  CHECK(random_baseline_f1(0.1923) == 0.1923);
  CHECK(random_baseline_f1(0.0) == 0.0);
  CHECK(random_baseline_f1(1.0) == 1.0);
  CHECK_THROWS_AS(random_baseline_f1(-0.1), UsageError);
  CHECK_THROWS_AS(random_baseline_f1(1.1), UsageError);
}

TEST_CASE("wilcoxon rejects degenerate input") {
  CHECK_THROWS_AS(
      wilcoxon_signed_rank({1, 2, 3}, {1, 2, 3}, Alternative::greater), UsageError);
  CHECK_THROWS_AS(wilcoxon_signed_rank({1}, {1, 2}, Alternative::greater), UsageError);
}

TEST_CASE("wilcoxon n=5 strictly positive differences") {
  const std::vector<double> x{2, 4, 6, 8, 10};
  const std::vector<double> y{1, 2, 3, 4, 5};
  const auto result = wilcoxon_signed_rank(x, y, Alternative::greater);
  CHECK(result.n == 5);
  CHECK(result.w_plus == 15.0);
  CHECK(result.exact);
  CHECK(result.p_value == 0.03125);  // 1/32
}

TEST_CASE("wilcoxon exact p equals full enumeration for n <= 8") {
  std::mt19937 rng(71);
  int checked = 0;
  for (int trial = 0; trial < 120; ++trial) {
    const int n = 2 + int(rng() % 7);
    std::vector<double> x(n), y(n);
    bool any_nonzero = false;
    for (int i = 0; i < n; ++i) {
      x[i] = double(int(rng() % 9)) - 2.0;  // small ints force rank ties and zeros
      y[i] = double(int(rng() % 9)) - 2.0;
      any_nonzero |= x[i] != y[i];
    }
    if (!any_nonzero) continue;
    const auto oracle = wilcoxon_oracle(x, y);
    for (auto alt : {Alternative::greater, Alternative::less, Alternative::two_sided}) {
      const auto result = wilcoxon_signed_rank(x, y, alt);
      CHECK(result.n == oracle.n);
      CHECK(result.w_plus == doctest::Approx(oracle.w_plus).epsilon(1e-12));
      double expected = 0.0;
      if (alt == Alternative::greater) expected = oracle.p_greater;
      else if (alt == Alternative::less) expected = oracle.p_less;
      else expected = std::min(1.0, 2.0 * std::min(oracle.p_greater, oracle.p_less));
      CHECK(result.p_value == doctest::Approx(expected).epsilon(1e-12));
    }
    ++checked;
  }
  CHECK(checked > 80);
}

TEST_CASE("wilcoxon antisymmetry: swapping samples mirrors one-sided p") {
  std::mt19937 rng(5);
  for (int trial = 0; trial < 40; ++trial) {
    const int n = 4 + int(rng() % 10);
    std::vector<double> x(n), y(n);
    bool any = false;
    for (int i = 0; i < n; ++i) {
      x[i] = double(rng() % 12);
      y[i] = double(rng() % 12);
      any |= x[i] != y[i];
    }
    if (!any) continue;
    const auto greater = wilcoxon_signed_rank(x, y, Alternative::greater);
    const auto less = wilcoxon_signed_rank(y, x, Alternative::less);
    CHECK(greater.p_value == doctest::Approx(less.p_value).epsilon(1e-12));
  }
}

TEST_CASE("wilcoxon exact point probabilities partition to 1") {
  // Distinct magnitudes give ranks 1..n; every W in 0..n(n+1)/2 is achievable.
  // P(W = w) taken from the implementation's tails must match the subset
  // counts and sum to 1 over the whole distribution.
  for (int n = 3; n <= 8; ++n) {
    const long max_sum = n * (n + 1) / 2;
    std::vector<long> count(max_sum + 1, 0);
    std::vector<long> witness(max_sum + 1, -1);  // a sign mask realizing each W
    for (long mask = 0; mask < (1L << n); ++mask) {
      long w = 0;
      for (int i = 0; i < n; ++i)
        if (mask & (1L << i)) w += i + 1;
      ++count[w];
      witness[w] = mask;
    }

    auto tail_at = [&](long w) {
      std::vector<double> x(n), y(n, 0.0);
      for (int i = 0; i < n; ++i)
        x[i] = (witness[w] & (1L << i)) ? double(i + 1) : -double(i + 1);
      return wilcoxon_signed_rank(x, y, Alternative::greater).p_value;
    };

    const double total = std::pow(2.0, n);
    double probability_sum = 0.0;
    for (long w = 0; w <= max_sum; ++w) {
      REQUIRE(witness[w] >= 0);
      const double point =
          tail_at(w) - (w + 1 <= max_sum ? tail_at(w + 1) : 0.0);
      CHECK(point == doctest::Approx(count[w] / total).epsilon(1e-10));
      probability_sum += point;
    }
    CHECK(probability_sum == doctest::Approx(1.0).epsilon(1e-10));
    CHECK(tail_at(0) == 1.0);
  }
}

TEST_CASE("wilcoxon normal approximation for n > 20") {
  std::mt19937 rng(301);
  std::normal_distribution<double> noise(0.0, 1.0);
  std::vector<double> x(40), y(40);
  for (int i = 0; i < 40; ++i) {
    y[i] = noise(rng);
    x[i] = y[i] + 1.0 + 0.1 * noise(rng);  // strong positive shift
  }
  const auto greater = wilcoxon_signed_rank(x, y, Alternative::greater);
  CHECK_FALSE(greater.exact);
  CHECK(greater.p_value < 1e-5);
  const auto less = wilcoxon_signed_rank(x, y, Alternative::less);
  CHECK(less.p_value > 0.999);
  const auto two = wilcoxon_signed_rank(x, y, Alternative::two_sided);
  CHECK(two.p_value == doctest::Approx(2 * greater.p_value).epsilon(1e-9));
}

TEST_CASE("chi-square and phi coefficient") {
  SUBCASE("identical vectors with both classes give phi = 1") {
    const std::vector<int> v{1, 1, 0, 0, 1, 0};
    const auto entry = chi_square_phi(v, v);
    CHECK(*entry.phi == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(*entry.p_value < 0.05);
  }
  SUBCASE("balanced independence table gives phi = 0") {
    std::vector<int> a, b;
    for (int i = 0; i < 5; ++i) { a.push_back(1); b.push_back(1); }
    for (int i = 0; i < 5; ++i) { a.push_back(1); b.push_back(0); }
    for (int i = 0; i < 5; ++i) { a.push_back(0); b.push_back(1); }
    for (int i = 0; i < 5; ++i) { a.push_back(0); b.push_back(0); }
    const auto entry = chi_square_phi(a, b);
    CHECK(entry.a == 5);
    CHECK(entry.b == 5);
    CHECK(entry.c == 5);
    CHECK(entry.d == 5);
    CHECK(*entry.phi == 0.0);
    CHECK(*entry.chi_square == 0.0);
    CHECK(*entry.p_value == doctest::Approx(1.0));
  }
  SUBCASE("fixture (a=8,b=2,c=3,d=7) matches independent arithmetic") {
    std::vector<int> a, b;
    auto push = [&](int va, int vb, int count) {
      for (int i = 0; i < count; ++i) { a.push_back(va); b.push_back(vb); }
    };
    push(1, 1, 8);
    push(1, 0, 2);
    push(0, 1, 3);
    push(0, 0, 7);
    const auto entry = chi_square_phi(a, b);
    const long double cross = 8.0L * 7.0L - 2.0L * 3.0L;
    const long double denom = 10.0L * 10.0L * 11.0L * 9.0L;
    const double phi = double(cross / std::sqrt(denom));
    const double chi2 = double(20.0L * cross * cross / denom);
    CHECK(*entry.phi == doctest::Approx(phi).epsilon(1e-12));
    CHECK(*entry.chi_square == doctest::Approx(chi2).epsilon(1e-12));
    CHECK(*entry.p_value == doctest::Approx(std::erfc(std::sqrt(chi2 / 2))).epsilon(1e-12));
  }
  SUBCASE("zero marginal leaves phi undefined") {
    const auto entry = chi_square_phi({1, 1, 1}, {1, 0, 1});
    CHECK_FALSE(entry.phi.has_value());
    CHECK_FALSE(entry.chi_square.has_value());
  }
  SUBCASE("phi is symmetric and sign-flips under complement") {
    std::mt19937 rng(87);
    for (int trial = 0; trial < 50; ++trial) {
      std::vector<int> a(30), b(30), b_complement(30);
      for (int i = 0; i < 30; ++i) {
        a[i] = rng() % 2;
        b[i] = rng() % 2;
        b_complement[i] = 1 - b[i];
      }
      const auto ab = chi_square_phi(a, b);
      const auto ba = chi_square_phi(b, a);
      if (!ab.phi || !ba.phi) continue;
      CHECK(*ab.phi == doctest::Approx(*ba.phi).epsilon(1e-12));
      const auto flipped = chi_square_phi(a, b_complement);
      if (flipped.phi)
        CHECK(*flipped.phi == doctest::Approx(-*ab.phi).epsilon(1e-12));
    }
  }
  SUBCASE("yates correction shrinks chi-square") {
    std::vector<int> a, b;
    auto push = [&](int va, int vb, int count) {
      for (int i = 0; i < count; ++i) { a.push_back(va); b.push_back(vb); }
    };
    push(1, 1, 8);
    push(1, 0, 2);
    push(0, 1, 3);
    push(0, 0, 7);
    const auto plain = chi_square_phi(a, b, false);
    const auto yates = chi_square_phi(a, b, true);
    CHECK(*yates.chi_square < *plain.chi_square);
  }
}

TEST_CASE("correlate_pairs sorts by phi descending") {
  Dataset dataset;
  dataset.framework = FrameworkRegistry::get("mft");
  std::mt19937 rng(9);
  for (int i = 0; i < 60; ++i) {
    TextInstance instance;
    instance.id = std::to_string(i);
    instance.text = "t";
    const int care = int(rng() % 2);
    // Fairness correlates with care; the rest are noise.
    instance.gold = LabelVector{{care, (rng() % 10 < 8) ? care : 1 - care,
                                 int(rng() % 2), int(rng() % 2), int(rng() % 2)}};
    dataset.instances.push_back(std::move(instance));
  }
  const auto entries = correlate_pairs(dataset);
  CHECK(entries.size() == 10);
  for (std::size_t i = 1; i < entries.size(); ++i) {
    if (entries[i - 1].phi && entries[i].phi)
      CHECK(*entries[i - 1].phi >= *entries[i].phi);
  }
  CHECK(entries.front().dimension_a == "Care/Harm");
  CHECK(entries.front().dimension_b == "Fairness/Cheating");
}

TEST_CASE("calibrate_threshold uses the nearest-rank percentile") {
  std::vector<double> scores;
  for (int i = 1; i <= 100; ++i) scores.push_back(i);
  CHECK(calibrate_threshold(scores, 95.0) == 95.0);
  CHECK(calibrate_threshold(scores, 50.0) == 50.0);
  CHECK(calibrate_threshold({3.0, 1.0, 2.0}, 95.0) == 3.0);

  SUBCASE("degenerate equal scores leave zero strict positives") {
    std::vector<double> flat(40, 0.7);
    const double threshold = calibrate_threshold(flat, 95.0);
    CHECK(threshold == 0.7);
    CHECK(std::count_if(flat.begin(), flat.end(),
                        [&](double s) { return s > threshold; }) == 0);
  }
  SUBCASE("permutation invariance") {
    std::mt19937 rng(123);
    std::vector<double> sample(257);
    for (auto& s : sample) s = std::uniform_real_distribution<double>(0, 1)(rng);
    const double reference = calibrate_threshold(sample, 95.0);
    for (int trial = 0; trial < 5; ++trial) {
      std::shuffle(sample.begin(), sample.end(), rng);
      CHECK(calibrate_threshold(sample, 95.0) == reference);
    }
  }
  SUBCASE("MAC-like sparsity: at most 5% + 1/n exceed the threshold") {
    std::mt19937 rng(2436);
    std::vector<double> sample(2436);
    for (auto& s : sample) s = std::uniform_real_distribution<double>(0, 1)(rng);
    const double threshold = calibrate_threshold(sample, 95.0);
    const auto above = std::count_if(sample.begin(), sample.end(),
                                     [&](double s) { return s > threshold; });
    CHECK(double(above) <= 0.05 * sample.size() + 1.0);
  }
  CHECK_THROWS_AS(calibrate_threshold({}, 95.0), UsageError);
  CHECK_THROWS_AS(calibrate_threshold({1.0}, 0.0), UsageError);
  CHECK_THROWS_AS(calibrate_threshold({1.0}, 100.0), UsageError);
}

TEST_CASE("significance stars follow the caption convention") {
  CHECK(significance_stars(0.2) == "");
  CHECK(significance_stars(0.03) == "*");
  CHECK(significance_stars(0.005) == "**");
  CHECK(significance_stars(0.0005) == "***");
  CHECK(significance_stars(0.05) == "");
  CHECK(significance_stars(0.01) == "*");
  CHECK(significance_stars(0.001) == "**");
}

TEST_CASE("report emitters produce parsable output") {
  std::map<std::string, std::vector<int>> preds{{"A", {1, 0, 1, 0}}, {"B", {0, 0, 1, 0}}};
  std::map<std::string, std::vector<int>> gold{{"A", {1, 0, 0, 0}}, {"B", {0, 1, 1, 0}}};
  const auto report = standard_report(preds, gold, {"A", "B"});
  const auto json_text = report_to_json(report);
  CHECK(json_text.find("\"protocol\": \"standard\"") != std::string::npos);
  const auto csv_text = report_to_csv(report);
  CHECK(csv_text.rfind("dimension,metric,value\n", 0) == 0);
  CHECK(csv_text.find("A,f1,") != std::string::npos);
  CHECK(csv_text.find("macro,f1,") != std::string::npos);
  CHECK(csv_text.find("A,baseline_f1,") != std::string::npos);

  const auto entries = std::vector<CorrelationEntry>{chi_square_phi({1, 0, 1}, {1, 0, 0})};
  const auto correlation_csv = correlation_to_csv(entries);
  CHECK(correlation_csv.find("dimension_a") == 0);
}

// Reference values below were computed independently with scipy 1.15
// (stats.wilcoxon, stats.chi2_contingency, stats.chi2.sf) and scikit-learn
// 1.7 (roc_auc_score), then frozen.
TEST_CASE("statistics agree with frozen external reference values") {
  SUBCASE("wilcoxon exact branch, distinct magnitudes") {
    const std::vector<double> x{13, 9, 15, 8, 17, 14, 4, 18};
    const std::vector<double> y(8, 10.0);
    const auto greater = wilcoxon_signed_rank(x, y, Alternative::greater);
    CHECK(greater.w_plus == 27.0);
    CHECK(greater.p_value == doctest::Approx(0.125).epsilon(1e-14));
    CHECK(wilcoxon_signed_rank(x, y, Alternative::less).p_value ==
          doctest::Approx(0.90234375).epsilon(1e-14));
    CHECK(wilcoxon_signed_rank(x, y, Alternative::two_sided).p_value ==
          doctest::Approx(0.25).epsilon(1e-14));
  }
  SUBCASE("wilcoxon normal approximation with ties and zeros, n=30") {
    const std::vector<double> x{4, 7, 2, 9, 4, 6, 8, 1, 5, 7, 3, 9, 6, 4, 8,
                                2, 7, 5, 9, 3, 6, 8, 4, 7, 2, 9, 5, 6, 3, 8};
    const std::vector<double> y{3, 6, 4, 7, 2, 6, 9, 2, 4, 5, 1, 8, 7, 3, 6,
                                4, 5, 6, 7, 2, 4, 9, 3, 5, 4, 7, 4, 4, 2, 6};
    const auto greater = wilcoxon_signed_rank(x, y, Alternative::greater);
    CHECK_FALSE(greater.exact);
    CHECK(greater.n == 29);  // one zero difference dropped
    CHECK(greater.w_plus == doctest::Approx(331.5).epsilon(1e-12));
    CHECK(greater.p_value == doctest::Approx(0.005696042643229023).epsilon(1e-9));
    CHECK(wilcoxon_signed_rank(x, y, Alternative::less).p_value ==
          doctest::Approx(0.9946558939276504).epsilon(1e-9));
    CHECK(wilcoxon_signed_rank(x, y, Alternative::two_sided).p_value ==
          doctest::Approx(0.011392085286458046).epsilon(1e-9));
  }
  SUBCASE("chi-square on the (8,2,3,7) table") {
    std::vector<int> a, b;
    auto push = [&](int va, int vb, int count) {
      while (count--) {
        a.push_back(va);
        b.push_back(vb);
      }
    };
    push(1, 1, 8);
    push(1, 0, 2);
    push(0, 1, 3);
    push(0, 0, 7);
    const auto plain = chi_square_phi(a, b, false);
    CHECK(*plain.chi_square == doctest::Approx(5.05050505050505).epsilon(1e-12));
    CHECK(*plain.p_value == doctest::Approx(0.024618761380815174).epsilon(1e-12));
    const auto yates = chi_square_phi(a, b, true);
    CHECK(*yates.chi_square == doctest::Approx(3.2323232323232323).epsilon(1e-12));
    CHECK(*yates.p_value == doctest::Approx(0.07219819770165774).epsilon(1e-12));
  }
  SUBCASE("chi-square survival at reference points") {
    auto sf = [](double c) { return std::erfc(std::sqrt(c / 2.0)); };
    CHECK(sf(0.5) == doctest::Approx(0.47950012218695337).epsilon(1e-13));
    CHECK(sf(1.2) == doctest::Approx(0.273321678292295).epsilon(1e-13));
    CHECK(sf(3.84) == doctest::Approx(0.05004352124870519).epsilon(1e-13));
    CHECK(sf(10.83) == doctest::Approx(0.0009986863791802592).epsilon(1e-13));
  }
  SUBCASE("AUC with tied scores") {
    CHECK(auc({0.9, 0.8, 0.8, 0.5, 0.5, 0.4, 0.3, 0.2, 0.5, 0.7},
              {1, 0, 1, 1, 0, 0, 1, 0, 0, 1}) == doctest::Approx(0.7).epsilon(1e-14));
    CHECK(auc({0.61, 0.13, 0.87, 0.87, 0.44, 0.44, 0.44, 0.92, 0.05, 0.33, 0.61, 0.70},
              {1, 0, 1, 0, 1, 0, 0, 1, 0, 0, 0, 1}) ==
          doctest::Approx(0.8285714285714285).epsilon(1e-14));
  }
}
