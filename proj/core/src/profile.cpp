#include "tac/profile.hpp"

#include <cmath>

#include "tac/errors.hpp"
#include "tac/rng.hpp"

namespace tac {

ProfileTransform parse_transform(const std::string& name) {
  if (name == "sigmoid") return ProfileTransform::Sigmoid;
  if (name == "raw") return ProfileTransform::Raw;
  throw ConfigError("unknown profile transform: " + name);
}

std::string transform_name(ProfileTransform t) {
  return t == ProfileTransform::Sigmoid ? "sigmoid" : "raw";
}

std::size_t SliceSpec::total_length() const {
  std::size_t l = 0;
  for (const auto& layer : layers) l += layer.n_slices;
  return l;
}

std::size_t SliceSpec::layer_index(int layer_id) const {
  for (std::size_t i = 0; i < layers.size(); ++i)
    if (layers[i].layer_id == layer_id) return i;
  throw SpecError("slice spec: unknown layer id " + std::to_string(layer_id));
}

std::pair<std::size_t, std::size_t> SliceSpec::segment(int layer_id) const {
  std::size_t begin = 0;
  for (const auto& layer : layers) {
    if (layer.layer_id == layer_id)
      return {begin, begin + layer.n_slices};
    begin += layer.n_slices;
  }
  throw SpecError("slice spec: unknown layer id " + std::to_string(layer_id));
}

void SliceSpec::validate() const {
  if (layers.empty()) throw SpecError("slice spec: no layers");
  for (const auto& layer : layers) {
    if (layer.n_slices < 1)
      throw SpecError("slice spec: n_slices must be >= 1");
    if (layer.width / layer.n_slices < 1)
      throw SpecError("slice spec: slice size < 1 for layer " +
                      std::to_string(layer.layer_id));
  }
}

std::vector<double> sub_profile(const ActivationProfile& profile,
                                const SliceSpec& spec, int layer_id) {
  const auto [begin, end] = spec.segment(layer_id);
  if (end > profile.values.size())
    throw SpecError("sub_profile: segment exceeds profile length");
  return {profile.values.begin() + begin, profile.values.begin() + end};
}

Tensor layer_profile(const Tensor& features, std::size_t n_slices) {
  return layer_profile(features, n_slices, ReduceMode::Sum);
}

Tensor layer_profile(const Tensor& features, std::size_t n_slices,
                     ReduceMode mode) {
  if (features.rank() < 2)
    throw SpecError("layer_profile: features must be [N, C, ...]");
  const std::size_t n = features.shape()[0];
  const std::size_t c = features.shape()[1];
  if (n_slices < 1 || n_slices > c)
    throw SpecError("layer_profile: n_slices must be in [1, C]");
  std::size_t rest = 1;
  for (std::size_t i = 2; i < features.rank(); ++i)
    rest *= features.shape()[i];
  const std::size_t slice_size = c / n_slices;  // trailing channels dropped
  const std::size_t group = slice_size * rest;

  std::vector<double> out(n * n_slices, 0.0);
  const auto d = features.data();
  for (std::size_t s = 0; s < n; ++s)
    for (std::size_t g = 0; g < n_slices; ++g) {
      const double* src = d.data() + (s * c + g * slice_size) * rest;
      double acc = 0.0;
      for (std::size_t i = 0; i < group; ++i) acc += src[i];
      out[s * n_slices + g] = acc;
    }
  if (mode == ReduceMode::Mean)
    for (double& v : out) v /= static_cast<double>(group);

  const double back_scale =
      mode == ReduceMode::Mean ? 1.0 / static_cast<double>(group) : 1.0;
  return make_op(
      {n, n_slices}, std::move(out), {features},
      [n, c, rest, n_slices, slice_size, group, back_scale](detail::Node& node) {
        detail::Node& p = *node.parents[0];
        for (std::size_t s = 0; s < n; ++s)
          for (std::size_t g = 0; g < n_slices; ++g) {
            const double gr = node.grad[s * n_slices + g] * back_scale;
            double* dst = p.grad.data() + (s * c + g * slice_size) * rest;
            for (std::size_t i = 0; i < group; ++i) dst[i] += gr;
          }
      });
}

Tensor assemble_profile(const std::vector<Tensor>& per_layer,
                        const SliceSpec& spec) {
  if (per_layer.size() != spec.layers.size())
    throw SpecError("assemble_profile: layer count does not match spec");
  for (std::size_t i = 0; i < per_layer.size(); ++i) {
    if (per_layer[i].rank() != 2 ||
        per_layer[i].shape()[1] != spec.layers[i].n_slices)
      throw SpecError("assemble_profile: layer " +
                      std::to_string(spec.layers[i].layer_id) +
                      " width does not match spec");
  }
  return concat(per_layer, 1);
}

// ---------------------------------------------------------------------------
// projections
// ---------------------------------------------------------------------------

ProjectionSize parse_projection_size(const std::string& name) {
  if (name == "small") return ProjectionSize::Small;
  if (name == "large") return ProjectionSize::Large;
  if (name == "very-large") return ProjectionSize::VeryLarge;
  if (name == "x-large") return ProjectionSize::XLarge;
  if (name == "2x-large") return ProjectionSize::XXLarge;
  throw ConfigError("unknown projection size: " + name);
}

std::string projection_size_name(ProjectionSize size) {
  switch (size) {
    case ProjectionSize::Small: return "small";
    case ProjectionSize::Large: return "large";
    case ProjectionSize::VeryLarge: return "very-large";
    case ProjectionSize::XLarge: return "x-large";
    case ProjectionSize::XXLarge: return "2x-large";
  }
  return "?";
}

int ProjectionStackConfig::depth() const {
  switch (size) {
    case ProjectionSize::Small: return 1;
    case ProjectionSize::Large: return 2;
    case ProjectionSize::VeryLarge: return 3;
    case ProjectionSize::XLarge: return 3;
    case ProjectionSize::XXLarge: return 5;
  }
  return 1;
}

bool ProjectionStackConfig::normalize() const {
  return size == ProjectionSize::XLarge || size == ProjectionSize::XXLarge;
}

Tensor layer_norm(const Tensor& x, const Tensor& gain, const Tensor& bias,
                  double eps) {
  if (x.rank() != 2) throw DimensionError("layer_norm expects [N, F]");
  const std::size_t n = x.shape()[0];
  Tensor mean = reshape(reduce(x, {1}, Reduce::Mean), {n, 1});
  Tensor centered = sub(x, mean);
  Tensor var = reduce(mul(centered, centered), {1}, Reduce::Mean);
  Tensor denom = reshape(sqrt(add_scalar(var, eps)), {n, 1});
  return add(mul(div(centered, denom), gain), bias);
}

ProjectionStack::ProjectionStack(ProjectionStackConfig config, Rng& rng)
    : config_(config) {
  if (config_.input_width == 0 || config_.output_width == 0)
    throw ConfigError("projection stack: widths must be set");
  if (config_.hidden_width == 0) config_.hidden_width = config_.input_width;
  const int depth = config_.depth();
  if (config_.normalize()) {
    params_.push_back(Tensor::full({config_.input_width}, 1.0, true));
    params_.push_back(Tensor::zeros({config_.input_width}, true));
  }
  std::size_t in = config_.input_width;
  for (int i = 0; i < depth; ++i) {
    const std::size_t out =
        i + 1 == depth ? config_.output_width : config_.hidden_width;
    const double bound = 1.0 / std::sqrt(static_cast<double>(in));
    params_.push_back(uniform_init({in, out}, -bound, bound, rng, true));
    params_.push_back(Tensor::zeros({out}, true));
    in = out;
  }
  if (config_.normalize()) {
    params_.push_back(Tensor::full({config_.output_width}, 1.0, true));
    params_.push_back(Tensor::zeros({config_.output_width}, true));
  }
}

Tensor ProjectionStack::forward(const Tensor& features,
                                bool stop_gradient_input) const {
  if (features.rank() != 2 || features.shape()[1] != config_.input_width)
    throw DimensionError("projection stack: feature width mismatch, want " +
                         std::to_string(config_.input_width));
  Tensor x = stop_gradient_input ? features.detach() : features;
  std::size_t p = 0;
  if (config_.normalize()) {
    x = layer_norm(x, params_[p], params_[p + 1]);
    p += 2;
  }
  const int depth = config_.depth();
  for (int i = 0; i < depth; ++i) {
    x = relu(add(matmul(x, params_[p]), params_[p + 1]));
    p += 2;
  }
  if (config_.normalize()) {
    x = layer_norm(x, params_[p], params_[p + 1]);
    p += 2;
  }
  return x;
}

}  // namespace tac
