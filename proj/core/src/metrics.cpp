#include "tac/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "tac/errors.hpp"
#include "tac/rng.hpp"

namespace tac {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

void check_two_classes(std::span<const ScoreRecord> records) {
  std::size_t pos = 0;
  for (const auto& r : records) pos += r.positive ? 1 : 0;
  if (pos == 0 || pos == records.size())
    throw NumericError(
        "score set is degenerate: needs at least one positive and one "
        "negative");
}

}  // namespace

RocCurve roc_curve(std::span<const ScoreRecord> records) {
  check_two_classes(records);
  std::vector<ScoreRecord> sorted(records.begin(), records.end());
  std::stable_sort(sorted.begin(), sorted.end(),
                   [](const ScoreRecord& a, const ScoreRecord& b) {
                     return a.score > b.score;
                   });
  double total_pos = 0.0, total_neg = 0.0;
  for (const auto& r : sorted) (r.positive ? total_pos : total_neg) += 1.0;

  RocCurve curve;
  curve.fpr.push_back(0.0);
  curve.tpr.push_back(0.0);
  curve.thresholds.push_back(kInf);
  double tp = 0.0, fp = 0.0;
  std::size_t i = 0;
  while (i < sorted.size()) {
    const double t = sorted[i].score;
    // group equal scores
    while (i < sorted.size() && sorted[i].score == t) {
      (sorted[i].positive ? tp : fp) += 1.0;
      ++i;
    }
    curve.fpr.push_back(fp / total_neg);
    curve.tpr.push_back(tp / total_pos);
    curve.thresholds.push_back(t);
  }
  return curve;
}

double auroc(std::span<const ScoreRecord> records) {
  const RocCurve curve = roc_curve(records);
  double area = 0.0;
  for (std::size_t i = 1; i < curve.fpr.size(); ++i)
    area += 0.5 * (curve.fpr[i] - curve.fpr[i - 1]) *
            (curve.tpr[i] + curve.tpr[i - 1]);
  return area;
}

namespace {

std::size_t eer_index(const RocCurve& curve) {
  std::size_t best = 0;
  double best_gap = kInf;
  for (std::size_t i = 0; i < curve.fpr.size(); ++i) {
    const double gap = std::fabs((1.0 - curve.tpr[i]) - curve.fpr[i]);
    if (gap < best_gap) {
      best_gap = gap;
      best = i;
    }
  }
  return best;
}

}  // namespace

double detection_rate_at_eer(std::span<const ScoreRecord> records) {
  const RocCurve curve = roc_curve(records);
  return curve.tpr[eer_index(curve)];
}

double eer(std::span<const ScoreRecord> records) {
  const RocCurve curve = roc_curve(records);
  const std::size_t t = eer_index(curve);
  const double fnr = 1.0 - curve.tpr[t];
  const double fpr = curve.fpr[t];
  return 0.5 * (std::min(fnr, fpr) + std::max(fnr, fpr));
}

// ---------------------------------------------------------------------------
// value framework
// ---------------------------------------------------------------------------

namespace {

double confidence_of(const ScoredPrediction& p, const std::string& strategy) {
  const auto it = p.confidence.find(strategy);
  if (it == p.confidence.end())
    throw ConfigError("prediction carries no strategy '" + strategy + "'");
  return it->second;
}

}  // namespace

ValuePoint value(std::span<const ScoredPrediction> predictions,
                 const std::string& strategy, double threshold, double omega) {
  if (omega < 0.0) throw ConfigError("value: omega must be >= 0");
  if (predictions.empty()) throw ConfigError("value: empty prediction set");
  ValuePoint point;
  point.omega = omega;
  point.threshold = threshold;
  point.n_total = predictions.size();
  for (const auto& p : predictions) {
    if (confidence_of(p, strategy) < threshold)
      ++point.n_rejected;
    else if (p.correct)
      ++point.n_correct;
    else
      ++point.n_incorrect;
  }
  point.value = (static_cast<double>(point.n_correct) -
                 omega * static_cast<double>(point.n_incorrect)) /
                static_cast<double>(point.n_total);
  return point;
}

ValuePoint best_value(std::span<const ScoredPrediction> predictions,
                      const std::string& strategy, double omega) {
  // ascending candidate sweep; smallest threshold wins ties
  std::vector<double> candidates{-kInf};
  for (const auto& p : predictions)
    candidates.push_back(confidence_of(p, strategy));
  candidates.push_back(kInf);
  std::sort(candidates.begin(), candidates.end());
  candidates.erase(std::unique(candidates.begin(), candidates.end()),
                   candidates.end());
  ValuePoint best;
  bool first = true;
  for (double t : candidates) {
    const ValuePoint point = value(predictions, strategy, t, omega);
    if (first || point.value > best.value) {
      best = point;
      first = false;
    }
  }
  return best;
}

std::vector<double> default_omega_grid() {
  std::vector<double> grid(64);
  for (std::size_t i = 0; i < grid.size(); ++i)
    grid[i] = std::pow(10.0, -2.0 + 4.0 * static_cast<double>(i) /
                                  static_cast<double>(grid.size() - 1));
  return grid;
}

CurveSet voc_curve(std::span<const ScoredPrediction> predictions,
                   const std::string& strategy,
                   std::span<const double> omega_grid, int k,
                   std::uint64_t seed) {
  if (k < 2) throw ConfigError("voc_curve: need at least 2 folds");
  const std::size_t n = predictions.size();
  if (n < static_cast<std::size_t>(k))
    throw ConfigError("voc_curve: fewer samples than folds");

  // seeded shuffle, contiguous chunks; remainder goes to the earliest folds
  Rng rng = Rng(seed).substream("folds");
  const std::vector<std::size_t> order = rng.permutation(n);
  std::vector<std::vector<std::size_t>> folds(k);
  const std::size_t base = n / static_cast<std::size_t>(k);
  const std::size_t rem = n % static_cast<std::size_t>(k);
  std::size_t at = 0;
  for (int f = 0; f < k; ++f) {
    const std::size_t take = base + (static_cast<std::size_t>(f) < rem ? 1 : 0);
    folds[f].assign(order.begin() + at, order.begin() + at + take);
    at += take;
  }

  CurveSet curves;
  curves.name = "voc";
  curves.x.assign(omega_grid.begin(), omega_grid.end());
  curves.seed = seed;
  curves.folds = k;
  auto& train_series = curves.series["train"];
  auto& test_series = curves.series["test"];
  train_series.assign(omega_grid.size(), 0.0);
  test_series.assign(omega_grid.size(), 0.0);

  for (int f = 0; f < k; ++f) {
    std::vector<ScoredPrediction> held, selection;
    for (std::size_t i : folds[f]) held.push_back(predictions[i]);
    for (int g = 0; g < k; ++g)
      if (g != f)
        for (std::size_t i : folds[g]) selection.push_back(predictions[i]);
    if (held.empty() || selection.empty())
      throw ConfigError("voc_curve: degenerate fold");
    for (std::size_t w = 0; w < omega_grid.size(); ++w) {
      const ValuePoint chosen = best_value(selection, strategy, omega_grid[w]);
      train_series[w] += chosen.value;
      test_series[w] +=
          value(held, strategy, chosen.threshold, omega_grid[w]).value;
    }
  }
  const double inv_k = 1.0 / static_cast<double>(k);
  for (double& v : train_series) v *= inv_k;
  for (double& v : test_series) v *= inv_k;
  return curves;
}

std::vector<double> default_fraction_grid() {
  std::vector<double> grid(20);
  for (std::size_t i = 0; i < grid.size(); ++i)
    grid[i] = 0.05 * static_cast<double>(i + 1);
  return grid;
}

std::pair<CurveSet, double> accuracy_rejection_curve(
    std::span<const ScoredPrediction> predictions, const std::string& strategy,
    std::span<const double> fractions) {
  if (predictions.empty())
    throw ConfigError("accuracy_rejection_curve: empty prediction set");
  for (double f : fractions)
    if (f <= 0.0 || f > 1.0)
      throw ConfigError("accuracy_rejection_curve: fractions must be in (0,1]");

  std::vector<std::size_t> order(predictions.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    const double ca = confidence_of(predictions[a], strategy);
    const double cb = confidence_of(predictions[b], strategy);
    if (ca != cb) return ca > cb;
    return predictions[a].sample_id < predictions[b].sample_id;
  });

  CurveSet curves;
  curves.name = "accuracy-rejection";
  curves.x.assign(fractions.begin(), fractions.end());
  if (!std::is_sorted(curves.x.begin(), curves.x.end()) ||
      std::adjacent_find(curves.x.begin(), curves.x.end()) != curves.x.end())
    throw ConfigError("accuracy_rejection_curve: fractions must increase");
  auto& acc = curves.series["accuracy"];
  const double n = static_cast<double>(predictions.size());
  for (double f : fractions) {
    const std::size_t keep =
        static_cast<std::size_t>(std::ceil(f * n - 1e-12));
    std::size_t correct = 0;
    for (std::size_t i = 0; i < keep; ++i)
      correct += predictions[order[i]].correct ? 1 : 0;
    acc.push_back(static_cast<double>(correct) / static_cast<double>(keep));
  }
  double area = 0.0;
  for (std::size_t i = 1; i < curves.x.size(); ++i)
    area += 0.5 * (curves.x[i] - curves.x[i - 1]) * (acc[i] + acc[i - 1]);
  // normalize by the covered span so a perfect model scores 1
  if (curves.x.size() > 1) area /= curves.x.back() - curves.x.front();
  return {curves, area};
}

// ---------------------------------------------------------------------------
// profile structure
// ---------------------------------------------------------------------------

std::vector<std::vector<double>> class_average_profiles(
    const std::vector<ActivationProfile>& profiles,
    const std::vector<int>& labels, std::size_t num_classes) {
  if (profiles.size() != labels.size())
    throw DimensionError("class_average_profiles: size mismatch");
  if (profiles.empty())
    throw NumericError("class_average_profiles: empty input");
  const std::size_t l = profiles[0].values.size();
  std::vector<std::vector<double>> avg(num_classes,
                                       std::vector<double>(l, 0.0));
  std::vector<std::size_t> counts(num_classes, 0);
  for (std::size_t i = 0; i < profiles.size(); ++i) {
    const int y = labels[i];
    if (y < 1 || static_cast<std::size_t>(y) > num_classes)
      throw DimensionError("class_average_profiles: label out of range");
    for (std::size_t j = 0; j < l; ++j)
      avg[y - 1][j] += profiles[i].values[j];
    ++counts[y - 1];
  }
  for (std::size_t c = 0; c < num_classes; ++c) {
    if (counts[c] == 0)
      throw NumericError("class_average_profiles: class " +
                         std::to_string(c + 1) + " has no samples");
    for (double& v : avg[c]) v /= static_cast<double>(counts[c]);
  }
  return avg;
}

std::vector<std::vector<double>> code_match_heatmap(
    const std::vector<std::vector<double>>& avg_profiles,
    const CodeBook& book) {
  const std::size_t k = avg_profiles.size();
  std::vector<std::vector<double>> h(k, std::vector<double>(book.num_classes()));
  for (std::size_t i = 0; i < k; ++i)
    for (std::size_t j = 1; j <= book.num_classes(); ++j)
      h[i][j - 1] =
          distance(avg_profiles[i], book.code(j), DistanceMetric::Cosine);
  return h;
}

std::vector<ScoreRecord> error_detection_scores(
    std::span<const ScoredPrediction> predictions,
    const std::string& strategy) {
  std::vector<ScoreRecord> records;
  records.reserve(predictions.size());
  for (const auto& p : predictions)
    records.push_back({-confidence_of(p, strategy), !p.correct});
  return records;
}

}  // namespace tac
