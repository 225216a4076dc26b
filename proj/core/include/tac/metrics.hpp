#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "tac/codebook.hpp"
#include "tac/model.hpp"

namespace tac {

// Paired (score, label) records; higher score means more likely positive.
struct ScoreRecord {
  double score = 0.0;
  bool positive = false;
};

struct RocCurve {
  std::vector<double> fpr, tpr, thresholds;  // thresholds descending
};

// ROC sweep over unique scores descending (predict positive when
// score >= threshold); equal scores grouped; starts at (0, 0).
RocCurve roc_curve(std::span<const ScoreRecord> records);

// Trapezoidal area; equals the tie-corrected Mann-Whitney statistic.
double auroc(std::span<const ScoreRecord> records);

// TPR at the ROC index minimizing |fnr - fpr| (first index on ties).
double detection_rate_at_eer(std::span<const ScoreRecord> records);
// Midpoint of (min, max) of (fnr, fpr) at the same index.
double eer(std::span<const ScoreRecord> records);

// ---------------------------------------------------------------------------
// value framework
// ---------------------------------------------------------------------------

struct ValuePoint {
  double omega = 0.0;
  double threshold = 0.0;
  double value = 0.0;  // (N_c - omega * N_i) / N
  std::size_t n_correct = 0, n_incorrect = 0, n_rejected = 0, n_total = 0;
};

// Rejects predictions with confidence < threshold under `strategy`.
ValuePoint value(std::span<const ScoredPrediction> predictions,
                 const std::string& strategy, double threshold, double omega);

// Best achievable value over thresholds (unique confidences plus +/-inf
// sentinels); deterministic exact sweep.
ValuePoint best_value(std::span<const ScoredPrediction> predictions,
                      const std::string& strategy, double omega);

struct CurveSet {
  std::string name;
  std::vector<double> x;
  std::map<std::string, std::vector<double>> series;
  std::uint64_t seed = 0;
  int folds = 0;
  std::string metric;
};

/// k-fold VOC curve: for each fold and omega, the rejection threshold is
/// chosen on the other k-1 folds by exhaustive sweep; value is recorded on
/// both the selection ("train") and held-out ("test") portions and averaged
/// over folds.
CurveSet voc_curve(std::span<const ScoredPrediction> predictions,
                   const std::string& strategy,
                   std::span<const double> omega_grid, int k,
                   std::uint64_t seed);

// Default grid: 64 log-spaced omegas in [1e-2, 1e2].
std::vector<double> default_omega_grid();

/// Accuracy over the top ceil(f*N) most-confident samples for each fraction
/// f, plus the trapezoidal area over f. Confidence ties break by sample id.
std::pair<CurveSet, double> accuracy_rejection_curve(
    std::span<const ScoredPrediction> predictions, const std::string& strategy,
    std::span<const double> fractions);

std::vector<double> default_fraction_grid();

// ---------------------------------------------------------------------------
// profile structure
// ---------------------------------------------------------------------------

// K x L per-class means of profile vectors; every class needs >= 1 sample.
std::vector<std::vector<double>> class_average_profiles(
    const std::vector<ActivationProfile>& profiles,
    const std::vector<int>& labels, std::size_t num_classes);

// H[i][j] = 1 - cos(avg_profile_i, code_j), K x K.
std::vector<std::vector<double>> code_match_heatmap(
    const std::vector<std::vector<double>>& avg_profiles, const CodeBook& book);

// Error-detection convention: positive = erroneous prediction,
// score = negated confidence (higher = more suspicious).
std::vector<ScoreRecord> error_detection_scores(
    std::span<const ScoredPrediction> predictions, const std::string& strategy);

}  // namespace tac
