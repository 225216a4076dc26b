#pragma once

#include <cstdint>
#include <vector>

#include "tac/data.hpp"
#include "tac/model.hpp"
#include "tac/optimizer.hpp"

namespace tac {

struct EpochLog {
  int epoch = 0;
  double loss = 0.0;        // mean combined loss over batches
  double loss_bin = 0.0;
  double loss_ce = 0.0;
  double train_accuracy = 0.0;
  double val_accuracy = 0.0;  // NaN without a validation set
  double mean_correct_distance = 0.0;  // profile to the true class code
};

struct TrainLog {
  std::vector<EpochLog> epochs;
};

struct FitOptions {
  int epochs = 100;
  std::size_t batch_size = 64;
  std::uint64_t seed = 0;
  bool evaluate_each_epoch = true;
};

/// Trains the model's trainable parameters with the combined objective.
/// Deterministic under (config, seed); throws NumericError with epoch and
/// batch context when the loss leaves the finite range.
TrainLog fit(TacModel& model, const Dataset& train, const Dataset* val,
             const OptimizerConfig& opt, const FitOptions& options);

/// Builds an add-on model on a trained base and trains only its projection
/// stacks; the base parameters are never touched.
TacModel fit_addon(const BaseClassifier& base, const CodeBook& book,
                   const LossConfig& loss,
                   const std::vector<std::size_t>& slice_counts,
                   ProjectionSize projection_size, const Dataset& train,
                   const Dataset* val, const OptimizerConfig& opt,
                   const FitOptions& options, TrainLog* log = nullptr);

/// Trains a plain softmax-head classifier (cross-entropy), for use as the
/// frozen base of an add-on model.
TrainLog fit_base(BaseClassifier& base, const Dataset& train,
                  const Dataset* val, const OptimizerConfig& opt,
                  const FitOptions& options);

double base_accuracy(const BaseClassifier& base, const Dataset& ds,
                     std::size_t batch_size = 256);

/// Random-label memorization probe: relabels the dataset uniformly from the
/// seeded stream, trains, and records the in-sample error rate per epoch
/// (entry 0 is the error before any update).
std::vector<double> capacity_test(TacModel& model, const Dataset& ds,
                                  const OptimizerConfig& opt,
                                  const FitOptions& options);

}  // namespace tac
