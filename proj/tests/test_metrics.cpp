#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>
#include <vector>

#include "tac/errors.hpp"
#include "tac/metrics.hpp"
#include "tac/rng.hpp"

using namespace tac;

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

std::vector<ScoreRecord> random_records(std::size_t n, Rng& rng,
                                        bool with_ties = true) {
  std::vector<ScoreRecord> records;
  for (std::size_t i = 0; i < n; ++i) {
    double s = rng.uniform(-1.0, 1.0);
    if (with_ties) s = std::round(s * 4.0) / 4.0;  // force tied scores
    records.push_back({s, rng.bernoulli(0.5)});
  }
  // guarantee both classes appear
  records[0].positive = true;
  records[1].positive = false;
  return records;
}

// Direct counting: predict positive when score >= threshold.
std::pair<double, double> rates_at(std::span<const ScoreRecord> records,
                                   double threshold) {
  double tp = 0, fp = 0, pos = 0, neg = 0;
  for (const auto& r : records) {
    (r.positive ? pos : neg) += 1.0;
    if (r.score >= threshold) (r.positive ? tp : fp) += 1.0;
  }
  return {fp / neg, tp / pos};
}

double pair_count_auroc(std::span<const ScoreRecord> records) {
  double wins = 0.0, pairs = 0.0;
  for (const auto& p : records) {
    if (!p.positive) continue;
    for (const auto& n : records) {
      if (n.positive) continue;
      pairs += 1.0;
      if (p.score > n.score)
        wins += 1.0;
      else if (p.score == n.score)
        wins += 0.5;
    }
  }
  return wins / pairs;
}

ScoredPrediction pred(std::size_t id, bool correct, double confidence,
                      const std::string& strategy = "tac-L1") {
  ScoredPrediction p;
  p.sample_id = id;
  p.true_label = 1;
  p.predicted = correct ? 1 : 2;
  p.correct = correct;
  p.confidence[strategy] = confidence;
  return p;
}

}  // namespace

TEST_CASE("roc_curve matches direct threshold counting") {
  Rng rng(70);
  for (int rep = 0; rep < 10; ++rep) {
    const auto records = random_records(20, rng);
    const RocCurve curve = roc_curve(records);
    std::set<double> unique;
    for (const auto& r : records) unique.insert(r.score);
    REQUIRE(curve.fpr.size() == unique.size() + 1);
    CHECK(curve.fpr.front() == 0.0);
    CHECK(curve.tpr.front() == 0.0);
    CHECK(curve.thresholds.front() == kInf);
    CHECK(curve.fpr.back() == 1.0);
    CHECK(curve.tpr.back() == 1.0);
    CHECK(std::is_sorted(curve.thresholds.rbegin(), curve.thresholds.rend()));
    for (std::size_t i = 1; i < curve.thresholds.size(); ++i) {
      const auto [fpr, tpr] = rates_at(records, curve.thresholds[i]);
      CHECK(curve.fpr[i] == doctest::Approx(fpr).epsilon(1e-12));
      CHECK(curve.tpr[i] == doctest::Approx(tpr).epsilon(1e-12));
    }
  }
}

TEST_CASE("roc_curve rejects one-class inputs") {
  std::vector<ScoreRecord> all_pos{{1.0, true}, {2.0, true}};
  std::vector<ScoreRecord> all_neg{{1.0, false}, {2.0, false}};
  CHECK_THROWS_AS(roc_curve(all_pos), NumericError);
  CHECK_THROWS_AS(auroc(all_neg), NumericError);
}

TEST_CASE("auroc hand values") {
  std::vector<ScoreRecord> perfect{{3, true}, {2, true}, {1, false}};
  CHECK(auroc(perfect) == doctest::Approx(1.0).epsilon(1e-12));
  std::vector<ScoreRecord> inverted{{1, true}, {3, false}};
  CHECK(auroc(inverted) == doctest::Approx(0.0).epsilon(1e-12));
  std::vector<ScoreRecord> tied{{1, true}, {1, false}};
  CHECK(auroc(tied) == doctest::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("auroc equals the tie-corrected pair-counting statistic") {
  Rng rng(71);
  for (int rep = 0; rep < 20; ++rep) {
    const auto records = random_records(25, rng);
    CHECK(auroc(records) ==
          doctest::Approx(pair_count_auroc(records)).epsilon(1e-12));
  }
}

TEST_CASE("auroc is invariant under monotone score transforms") {
  Rng rng(72);
  const auto records = random_records(30, rng);
  std::vector<ScoreRecord> warped = records;
  for (auto& r : warped) r.score = std::exp(2.0 * r.score + 1.0);
  CHECK(auroc(records) == doctest::Approx(auroc(warped)).epsilon(1e-12));
}

TEST_CASE("eer index picks the first minimal |fnr - fpr| point") {
  Rng rng(73);
  for (int rep = 0; rep < 10; ++rep) {
    const auto records = random_records(24, rng);
    const RocCurve curve = roc_curve(records);
    std::size_t best = 0;
    double best_gap = kInf;
    for (std::size_t i = 0; i < curve.fpr.size(); ++i) {
      const double gap = std::fabs((1.0 - curve.tpr[i]) - curve.fpr[i]);
      if (gap < best_gap) {
        best_gap = gap;
        best = i;
      }
    }
    CHECK(detection_rate_at_eer(records) == curve.tpr[best]);
    const double fnr = 1.0 - curve.tpr[best];
    CHECK(eer(records) ==
          doctest::Approx(0.5 * (fnr + curve.fpr[best])).epsilon(1e-12));
  }
}

TEST_CASE("eer of a perfectly separated set is zero") {
  std::vector<ScoreRecord> perfect{{5, true}, {4, true}, {1, false}, {0, false}};
  CHECK(eer(perfect) == 0.0);
  CHECK(detection_rate_at_eer(perfect) == 1.0);
}

TEST_CASE("value hand case") {
  const std::vector<ScoredPrediction> preds{
      pred(0, true, 0.9), pred(1, false, 0.8), pred(2, true, 0.7),
      pred(3, false, 0.1)};
  ValuePoint p = value(preds, "tac-L1", 0.75, 2.0);
  CHECK(p.n_correct == 1);
  CHECK(p.n_incorrect == 1);
  CHECK(p.n_rejected == 2);
  CHECK(p.value == doctest::Approx(-0.25).epsilon(1e-12));
  // accept-everything threshold
  p = value(preds, "tac-L1", -kInf, 1.0);
  CHECK(p.n_rejected == 0);
  CHECK(p.value == doctest::Approx(0.0).epsilon(1e-12));
  CHECK_THROWS_AS(value(preds, "tac-L1", 0.0, -1.0), ConfigError);
  CHECK_THROWS_AS(value(preds, "nope", 0.0, 1.0), ConfigError);
}

TEST_CASE("best_value prefers the smallest optimal threshold") {
  const std::vector<ScoredPrediction> preds{
      pred(0, true, 0.9), pred(1, false, 0.8), pred(2, true, 0.7),
      pred(3, false, 0.1)};
  ValuePoint best = best_value(preds, "tac-L1", 1.0);
  CHECK(best.value == doctest::Approx(0.25).epsilon(1e-12));
  CHECK(best.threshold == 0.7);  // 0.9 ties at 0.25 but comes later
  best = best_value(preds, "tac-L1", 3.0);
  CHECK(best.value == doctest::Approx(0.25).epsilon(1e-12));
  CHECK(best.threshold == 0.9);
}

TEST_CASE("best_value matches an exhaustive grid search") {
  Rng rng(74);
  for (int rep = 0; rep < 10; ++rep) {
    std::vector<ScoredPrediction> preds;
    for (std::size_t i = 0; i < 15; ++i)
      preds.push_back(pred(i, rng.bernoulli(0.6),
                           std::round(rng.uniform(-1.0, 1.0) * 5.0) / 5.0));
    for (double omega : {0.1, 1.0, 5.0}) {
      const ValuePoint best = best_value(preds, "tac-L1", omega);
      // dense grid plus sentinels can never beat the exact sweep
      double grid_best = -kInf;
      for (double t = -1.3; t <= 1.3; t += 0.01)
        grid_best = std::max(grid_best,
                             value(preds, "tac-L1", t, omega).value);
      grid_best = std::max(grid_best, value(preds, "tac-L1", kInf, omega).value);
      CHECK(best.value == doctest::Approx(grid_best).epsilon(1e-12));
    }
  }
}

TEST_CASE("default omega grid is 64 log-spaced points") {
  const auto grid = default_omega_grid();
  REQUIRE(grid.size() == 64);
  CHECK(grid.front() == doctest::Approx(0.01).epsilon(1e-12));
  CHECK(grid.back() == doctest::Approx(100.0).epsilon(1e-12));
  CHECK(std::is_sorted(grid.begin(), grid.end()));
  // log-spacing: constant ratio
  const double ratio = grid[1] / grid[0];
  for (std::size_t i = 2; i < grid.size(); ++i)
    CHECK(grid[i] / grid[i - 1] == doctest::Approx(ratio).epsilon(1e-9));
}

TEST_CASE("voc_curve reproduces a manual fold-by-fold computation") {
  Rng rng(75);
  std::vector<ScoredPrediction> preds;
  for (std::size_t i = 0; i < 13; ++i)
    preds.push_back(pred(i, rng.bernoulli(0.7), rng.uniform(-1.0, 1.0)));
  const std::vector<double> omegas{0.5, 1.0, 2.0};
  const int k = 3;
  const std::uint64_t seed = 123;
  const CurveSet curves = voc_curve(preds, "tac-L1", omegas, k, seed);
  REQUIRE(curves.series.count("train") == 1);
  REQUIRE(curves.series.count("test") == 1);

  // manual: seeded shuffle, contiguous folds, remainder to earliest folds
  Rng fold_rng = Rng(seed).substream("folds");
  const auto order = fold_rng.permutation(13);
  std::vector<std::vector<std::size_t>> folds(k);
  std::size_t at = 0;
  for (int f = 0; f < k; ++f) {
    const std::size_t take = 13 / k + (static_cast<std::size_t>(f) < 13 % k);
    folds[f].assign(order.begin() + at, order.begin() + at + take);
    at += take;
  }
  for (std::size_t w = 0; w < omegas.size(); ++w) {
    double train_sum = 0.0, test_sum = 0.0;
    for (int f = 0; f < k; ++f) {
      std::vector<ScoredPrediction> held, selection;
      for (int g = 0; g < k; ++g)
        for (std::size_t i : folds[g])
          (g == f ? held : selection).push_back(preds[i]);
      const ValuePoint chosen = best_value(selection, "tac-L1", omegas[w]);
      train_sum += chosen.value;
      test_sum += value(held, "tac-L1", chosen.threshold, omegas[w]).value;
    }
    CHECK(curves.series.at("train")[w] ==
          doctest::Approx(train_sum / k).epsilon(1e-12));
    CHECK(curves.series.at("test")[w] ==
          doctest::Approx(test_sum / k).epsilon(1e-12));
  }
}

TEST_CASE("voc train value dominates test value on average") {
  // threshold chosen on the selection folds is optimal there, so across many
  // draws its selection-side value can only exceed the held-out value
  double train_total = 0.0, test_total = 0.0;
  const std::vector<double> omegas{1.0};
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    Rng rng(500 + seed);
    std::vector<ScoredPrediction> preds;
    for (std::size_t i = 0; i < 40; ++i)
      preds.push_back(pred(i, rng.bernoulli(0.55 + 0.3 * rng.uniform()),
                           rng.uniform(-1.0, 1.0)));
    const CurveSet curves = voc_curve(preds, "tac-L1", omegas, 4, seed);
    train_total += curves.series.at("train")[0];
    test_total += curves.series.at("test")[0];
  }
  CHECK(train_total >= test_total);
}

TEST_CASE("voc_curve argument validation") {
  const std::vector<ScoredPrediction> preds{pred(0, true, 0.5),
                                            pred(1, false, 0.4)};
  const std::vector<double> omegas{1.0};
  CHECK_THROWS_AS(voc_curve(preds, "tac-L1", omegas, 1, 0), ConfigError);
  CHECK_THROWS_AS(voc_curve(preds, "tac-L1", omegas, 3, 0), ConfigError);
}

TEST_CASE("accuracy-rejection hand case of four predictions") {
  const std::vector<ScoredPrediction> preds{
      pred(0, true, 0.9), pred(1, true, 0.8), pred(2, false, 0.6),
      pred(3, true, 0.2)};
  const std::vector<double> fractions{0.25, 0.5, 0.75, 1.0};
  const auto [curves, area] =
      accuracy_rejection_curve(preds, "tac-L1", fractions);
  const auto& acc = curves.series.at("accuracy");
  REQUIRE(acc.size() == 4);
  CHECK(acc[0] == 1.0);
  CHECK(acc[1] == 1.0);
  CHECK(acc[2] == doctest::Approx(2.0 / 3.0).epsilon(1e-12));
  CHECK(acc[3] == 0.75);
  const double raw = 0.5 * 0.25 * (1.0 + 1.0) +
                     0.5 * 0.25 * (1.0 + 2.0 / 3.0) +
                     0.5 * 0.25 * (2.0 / 3.0 + 0.75);
  CHECK(area == doctest::Approx(raw / 0.75).epsilon(1e-12));
}

TEST_CASE("all-correct predictions score area exactly 1") {
  std::vector<ScoredPrediction> preds;
  Rng rng(76);
  for (std::size_t i = 0; i < 17; ++i)
    preds.push_back(pred(i, true, rng.uniform(-1.0, 1.0)));
  const auto grid = default_fraction_grid();
  const auto [curves, area] = accuracy_rejection_curve(preds, "tac-L1", grid);
  for (double a : curves.series.at("accuracy")) CHECK(a == 1.0);
  CHECK(area == 1.0);
}

TEST_CASE("accuracy-rejection breaks confidence ties by sample id") {
  // same confidence everywhere: order must follow ascending sample ids
  const std::vector<ScoredPrediction> preds{
      pred(2, false, 0.5), pred(0, true, 0.5), pred(1, true, 0.5)};
  const std::vector<double> fractions{1.0 / 3.0, 2.0 / 3.0, 1.0};
  const auto [curves, area] =
      accuracy_rejection_curve(preds, "tac-L1", fractions);
  const auto& acc = curves.series.at("accuracy");
  CHECK(acc[0] == 1.0);  // keeps sample 0 only
  CHECK(acc[1] == 1.0);  // samples 0 and 1
  CHECK(acc[2] == doctest::Approx(2.0 / 3.0).epsilon(1e-12));
  (void)area;
}

TEST_CASE("accuracy-rejection rejects bad fraction grids") {
  const std::vector<ScoredPrediction> preds{pred(0, true, 0.5)};
  CHECK_THROWS_AS(
      accuracy_rejection_curve(preds, "tac-L1", std::vector<double>{0.0, 1.0}),
      ConfigError);
  CHECK_THROWS_AS(
      accuracy_rejection_curve(preds, "tac-L1", std::vector<double>{0.5, 0.4}),
      ConfigError);
}

TEST_CASE("class_average_profiles matches a group-by oracle") {
  Rng rng(77);
  const std::size_t k = 3, l = 5, n = 40;
  std::vector<ActivationProfile> profiles(n);
  std::vector<int> labels(n);
  std::vector<std::vector<double>> sums(k, std::vector<double>(l, 0.0));
  std::vector<std::size_t> counts(k, 0);
  for (std::size_t i = 0; i < n; ++i) {
    labels[i] = 1 + static_cast<int>(rng.uniform_int(k));
    profiles[i].values.resize(l);
    for (std::size_t j = 0; j < l; ++j) {
      profiles[i].values[j] = rng.uniform(-2.0, 2.0);
      sums[labels[i] - 1][j] += profiles[i].values[j];
    }
    ++counts[labels[i] - 1];
  }
  const auto avg = class_average_profiles(profiles, labels, k);
  REQUIRE(avg.size() == k);
  for (std::size_t c = 0; c < k; ++c) {
    REQUIRE(counts[c] > 0);
    for (std::size_t j = 0; j < l; ++j)
      CHECK(avg[c][j] ==
            doctest::Approx(sums[c][j] / counts[c]).epsilon(1e-12));
  }
}

TEST_CASE("class_average_profiles needs every class populated") {
  std::vector<ActivationProfile> profiles(2);
  profiles[0].values = {1.0};
  profiles[1].values = {2.0};
  CHECK_THROWS_AS(class_average_profiles(profiles, {1, 1}, 2), NumericError);
  CHECK_THROWS_AS(class_average_profiles(profiles, {1}, 2), DimensionError);
}

TEST_CASE("code_match_heatmap applies the cosine formula directly") {
  Rng rng(78);
  const CodeBook book = CodeBook::generate(3, 8, 12);
  std::vector<std::vector<double>> avg(3, std::vector<double>(8));
  for (auto& row : avg)
    for (double& v : row) v = rng.uniform(0.1, 1.0);
  const auto h = code_match_heatmap(avg, book);
  REQUIRE(h.size() == 3);
  for (std::size_t i = 0; i < 3; ++i) {
    REQUIRE(h[i].size() == 3);
    for (std::size_t j = 0; j < 3; ++j) {
      double uv = 0, uu = 0, vv = 0;
      for (std::size_t t = 0; t < 8; ++t) {
        uv += avg[i][t] * book.code(j + 1)[t];
        uu += avg[i][t] * avg[i][t];
        vv += book.code(j + 1)[t] * book.code(j + 1)[t];
      }
      CHECK(h[i][j] == doctest::Approx(1.0 - uv / std::sqrt(uu * vv))
                           .epsilon(1e-12));
    }
  }
}

TEST_CASE("error-detection scores flag mistakes as positives") {
  const std::vector<ScoredPrediction> preds{pred(0, true, 0.9),
                                            pred(1, false, 0.2)};
  const auto records = error_detection_scores(preds, "tac-L1");
  REQUIRE(records.size() == 2);
  CHECK_FALSE(records[0].positive);
  CHECK(records[0].score == -0.9);
  CHECK(records[1].positive);
  CHECK(records[1].score == -0.2);
  // confident mistakes should rank above confident hits
  CHECK(auroc(records) == doctest::Approx(1.0).epsilon(1e-12));
}
