#pragma once

#include <cstdint>
#include <vector>

#include "tac/codebook.hpp"
#include "tac/profile.hpp"
#include "tac/tensor.hpp"

namespace tac {

class Rng;

struct LossConfig {
  double alpha = 1.0;  // weight of the per-bit binary cross-entropy term
  double beta = 10.0;  // weight of the distance-softmax term
  double tau = 1.0;    // softmax temperature
  DistanceMetric metric = DistanceMetric::L1;
  ProfileTransform transform = ProfileTransform::Sigmoid;
  double mixup_concentration = 0.0;  // Beta parameter; 0 disables mixup

  void validate() const;
};

// Per-bit binary cross-entropy between raw (pre-sigmoid) profiles and target
// codes in [0,1], averaged over all N*L entries. Stable log-sum form.
Tensor l_bin(const Tensor& profiles, const Tensor& target_codes);

// Differentiable [N, K] matrix of distances from each (optionally
// sigmoid-transformed) profile to every code. L1/L2/cosine only.
Tensor distance_matrix(const Tensor& profiles, const CodeBook& book,
                       DistanceMetric metric,
                       ProfileTransform transform = ProfileTransform::Sigmoid);

// -1/N sum_i log softmax(-D(A_i, .)/tau)[y_i]. `class_weights` is [N, K];
// one-hot for plain labels, t-weighted rows under mixup.
Tensor l_ce(const Tensor& profiles, const CodeBook& book,
            const Tensor& class_weights, const LossConfig& config);

Tensor l_ce(const Tensor& profiles, const CodeBook& book,
            const std::vector<int>& labels, const LossConfig& config);

// alpha * l_bin + beta * l_ce with hard labels.
Tensor combined_loss(const Tensor& profiles, const CodeBook& book,
                     const std::vector<int>& labels, const LossConfig& config);

// Mixup form: l_bin sees interpolated codes, l_ce the t-weighted pair of
// per-class losses (as soft class weights).
Tensor combined_loss(const Tensor& profiles, const CodeBook& book,
                     const Tensor& target_codes, const Tensor& class_weights,
                     const LossConfig& config);

// One-hot [N, K] weights / [N, L] code targets for 1-based labels.
Tensor one_hot(const std::vector<int>& labels, std::size_t num_classes);
Tensor codes_for_labels(const std::vector<int>& labels, const CodeBook& book);

struct MixedBatch {
  Tensor inputs;
  Tensor class_weights;  // [N, K]
  Tensor codes;          // [N, L]
  std::vector<double> factors;
  std::vector<std::size_t> partners;  // permutation pairing
};

/// Pairs the batch with a seeded permutation of itself and interpolates
/// inputs, one-hot labels, and codes with per-pair Beta(c, c) factors:
/// t*x' + (1-t)*x''.
MixedBatch mixup_batch(const Tensor& inputs, const Tensor& one_hot_labels,
                       const Tensor& code_labels, double concentration,
                       Rng& rng);

}  // namespace tac
