#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "tac/tensor.hpp"

namespace tac {

class Rng;

enum class ProfileTransform { Sigmoid, Raw };
ProfileTransform parse_transform(const std::string& name);
std::string transform_name(ProfileTransform t);

enum class ReduceMode { Sum, Mean };

struct LayerSlices {
  int layer_id = 0;
  std::size_t width = 0;     // feature width W of the tapped layer
  std::size_t n_slices = 0;  // profile coordinates contributed
};

/// Which layers feed the activation profile and how each is sliced.
/// Slice size is floor(W / n); trailing W - n*floor(W/n) features are
/// excluded from every slice.
struct SliceSpec {
  std::vector<LayerSlices> layers;

  std::size_t total_length() const;  // L
  // [begin, end) of the layer's segment within the profile
  std::pair<std::size_t, std::size_t> segment(int layer_id) const;
  std::size_t layer_index(int layer_id) const;
  void validate() const;
};

struct ActivationProfile {
  std::vector<double> values;
  std::vector<std::pair<std::size_t, std::size_t>> segments;  // per layer
};

// The segment of a profile belonging to one tapped layer.
std::vector<double> sub_profile(const ActivationProfile& profile,
                                const SliceSpec& spec, int layer_id);

/// Slice the channel axis of [N, C, ...] features into n contiguous groups
/// of floor(C/n) channels each and sum every group over its channels and all
/// trailing axes. Differentiable; dropped trailing channels get zero grad.
Tensor layer_profile(const Tensor& features, std::size_t n_slices);

// Mean-reduced variant: each slice value divided by its element count.
Tensor layer_profile(const Tensor& features, std::size_t n_slices,
                     ReduceMode mode);

// Concatenate per-layer profiles [N, n_i] in spec order into [N, L].
Tensor assemble_profile(const std::vector<Tensor>& per_layer,
                        const SliceSpec& spec);

// ---------------------------------------------------------------------------
// frozen-base projection stacks
// ---------------------------------------------------------------------------

enum class ProjectionSize { Small, Large, VeryLarge, XLarge, XXLarge };
ProjectionSize parse_projection_size(const std::string& name);
std::string projection_size_name(ProjectionSize size);

struct ProjectionStackConfig {
  ProjectionSize size = ProjectionSize::Small;
  std::size_t input_width = 0;
  std::size_t hidden_width = 0;  // defaults to input_width when 0
  std::size_t output_width = 0;

  int depth() const;        // fully-connected layers: 1, 2, 3, 3, 5
  bool normalize() const;   // layer norm on inputs and outputs
};

/// Per-layer independent stack of fully-connected layers with ReLU, plus
/// input/output normalization for the x-large configurations. In add-on
/// mode the stack input is detached so no gradient reaches the base model.
class ProjectionStack {
 public:
  ProjectionStack() = default;
  ProjectionStack(ProjectionStackConfig config, Rng& rng);

  Tensor forward(const Tensor& features, bool stop_gradient_input) const;

  const ProjectionStackConfig& config() const { return config_; }
  std::vector<Tensor>& params() { return params_; }
  const std::vector<Tensor>& params() const { return params_; }

 private:
  ProjectionStackConfig config_;
  std::vector<Tensor> params_;
};

// (x - mean) / sqrt(var + eps) per row, then learned affine gain/bias.
Tensor layer_norm(const Tensor& x, const Tensor& gain, const Tensor& bias,
                  double eps = 1e-5);

}  // namespace tac
