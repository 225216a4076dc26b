#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "tac/codebook.hpp"
#include "tac/data.hpp"
#include "tac/losses.hpp"
#include "tac/profile.hpp"
#include "tac/tensor.hpp"

namespace tac {

class Rng;

// ---------------------------------------------------------------------------
// architectures
// ---------------------------------------------------------------------------

struct LayerDesc {
  enum class Kind { Dense, Conv };
  enum class Act { None, ReLU, LeakyReLU };

  Kind kind = Kind::Dense;
  std::size_t in = 0, out = 0;              // dense widths / conv channels
  std::size_t kernel = 3, stride = 1, pad = 1;  // conv only
  Act act = Act::ReLU;
  double slope = 0.01;  // leaky relu
  bool tap = false;     // feeds the activation profile
};

struct Architecture {
  std::string name;                      // "mlp" | "conv4"
  std::vector<std::size_t> input_shape;  // per-sample
  std::vector<LayerDesc> layers;
  bool has_head = false;  // dense softmax head of width num_classes
  std::size_t num_classes = 0;

  std::size_t tap_count() const;
  // feature width of tap i (channels for conv taps)
  std::vector<std::size_t> tap_widths() const;
};

// 2 hidden dense layers of `hidden` units, ReLU, taps on both.
Architecture mlp_architecture(std::size_t input_dim, std::size_t num_classes,
                              bool head, std::size_t hidden = 256);
// 4 stride-2 conv layers of 64/128/256/512 channels, LeakyReLU, taps on all.
Architecture conv4_architecture(std::size_t in_channels, std::size_t height,
                                std::size_t width, std::size_t num_classes,
                                bool head);

Architecture make_architecture(const std::string& name,
                               const std::vector<std::size_t>& input_shape,
                               std::size_t num_classes, bool head);

// ---------------------------------------------------------------------------
// base classifier
// ---------------------------------------------------------------------------

struct BaseForward {
  std::vector<Tensor> taps;  // post-activation features, [N,F] or [N,C,H,W]
  Tensor logits;             // defined only when the head exists
};

struct BaseClassifier {
  Architecture arch;
  std::vector<Tensor> params;

  void init(Rng& rng);  // fan-in scaled uniform weights, zero biases
  BaseForward forward(const Tensor& input) const;

  std::vector<Tensor> trainable() { return params; }
};

// Batch rows [i..] of a dataset as an input tensor.
Tensor batch_tensor(const Dataset& ds, const std::vector<std::size_t>& idx);

// ---------------------------------------------------------------------------
// TAC model
// ---------------------------------------------------------------------------

enum class TacMode { Scratch, AddOn };

struct TacModel {
  BaseClassifier base;
  TacMode mode = TacMode::Scratch;
  SliceSpec slices;
  std::vector<ProjectionStack> projections;  // add-on only, one per tap
  CodeBook book;
  LossConfig loss;
  ProfileTransform transform = ProfileTransform::Sigmoid;
  ReduceMode reduce_mode = ReduceMode::Sum;

  // base params from scratch mode, projection params in add-on mode
  std::vector<Tensor> trainable_params();
  void validate() const;
};

// Scratch model: slices the base taps directly.
TacModel make_scratch_model(Architecture arch, const CodeBook& book,
                            const LossConfig& loss,
                            const std::vector<std::size_t>& slice_counts,
                            Rng& rng);

// Add-on model: projection stacks (stop-gradient at their inputs) between
// the frozen base and the slicing step.
TacModel make_addon_model(BaseClassifier base, const CodeBook& book,
                          const LossConfig& loss,
                          const std::vector<std::size_t>& slice_counts,
                          ProjectionSize projection_size, Rng& rng);

struct ProfileForward {
  Tensor profiles;  // [N, L], raw (pre-transform)
  Tensor logits;    // defined when the base head exists
};

ProfileForward forward_profiles(const TacModel& model, const Tensor& batch);

// ---------------------------------------------------------------------------
// predictions
// ---------------------------------------------------------------------------

// Full profile, or a single tapped layer's segment and code columns.
struct LayerScope {
  bool full = true;
  int layer_id = 0;

  static LayerScope full_profile() { return {}; }
  static LayerScope single(int layer_id) { return {false, layer_id}; }
};

struct ScoredPrediction {
  std::size_t sample_id = 0;
  int true_label = 0;  // 0 when unknown
  int predicted = 0;
  // strategy -> confidence, higher = more confident
  // ("tac-L1", "msp", "mls", ...)
  std::map<std::string, double> confidence;
  bool correct = false;
};

std::vector<ScoredPrediction> predict(const TacModel& model,
                                      const Dataset& ds,
                                      const std::vector<DistanceMetric>& metrics,
                                      LayerScope scope,
                                      std::size_t batch_size = 256);

// Distance from each sample's (transformed) profile to the code of `label`
// restricted to the scope; used for OOD scoring and confidence.
std::vector<double> profile_distances(const TacModel& model, const Dataset& ds,
                                      DistanceMetric metric, LayerScope scope,
                                      std::size_t batch_size = 256);

// Raw activation profiles of a dataset (no transform).
std::vector<ActivationProfile> collect_profiles(const TacModel& model,
                                                const Dataset& ds,
                                                std::size_t batch_size = 256);

double accuracy(const std::vector<ScoredPrediction>& preds);

std::string tac_strategy_name(DistanceMetric metric);

}  // namespace tac
