#include "tac/model.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "tac/errors.hpp"
#include "tac/rng.hpp"

namespace tac {

std::size_t Architecture::tap_count() const {
  std::size_t n = 0;
  for (const auto& layer : layers) n += layer.tap ? 1 : 0;
  return n;
}

std::vector<std::size_t> Architecture::tap_widths() const {
  std::vector<std::size_t> widths;
  for (const auto& layer : layers)
    if (layer.tap) widths.push_back(layer.out);
  return widths;
}

Architecture mlp_architecture(std::size_t input_dim, std::size_t num_classes,
                              bool head, std::size_t hidden) {
  Architecture arch;
  arch.name = "mlp";
  arch.input_shape = {input_dim};
  arch.num_classes = num_classes;
  arch.has_head = head;
  LayerDesc l1{LayerDesc::Kind::Dense, input_dim, hidden};
  l1.act = LayerDesc::Act::ReLU;
  l1.tap = true;
  LayerDesc l2{LayerDesc::Kind::Dense, hidden, hidden};
  l2.act = LayerDesc::Act::ReLU;
  l2.tap = true;
  arch.layers = {l1, l2};
  return arch;
}

Architecture conv4_architecture(std::size_t in_channels, std::size_t height,
                                std::size_t width, std::size_t num_classes,
                                bool head) {
  Architecture arch;
  arch.name = "conv4";
  arch.input_shape = {in_channels, height, width};
  arch.num_classes = num_classes;
  arch.has_head = head;
  std::size_t in = in_channels;
  for (std::size_t out : {64u, 128u, 256u, 512u}) {
    LayerDesc l{LayerDesc::Kind::Conv, in, out};
    l.kernel = 3;
    l.stride = 2;
    l.pad = 1;
    l.act = LayerDesc::Act::LeakyReLU;
    l.slope = 0.01;
    l.tap = true;
    arch.layers.push_back(l);
    in = out;
  }
  return arch;
}

Architecture make_architecture(const std::string& name,
                               const std::vector<std::size_t>& input_shape,
                               std::size_t num_classes, bool head) {
  if (name == "mlp") {
    std::size_t d = 1;
    for (std::size_t e : input_shape) d *= e;
    return mlp_architecture(d, num_classes, head);
  }
  if (name == "conv4") {
    if (input_shape.size() != 3)
      throw ConfigError("conv4 needs [C,H,W] inputs");
    return conv4_architecture(input_shape[0], input_shape[1], input_shape[2],
                              num_classes, head);
  }
  throw ConfigError("unknown architecture: " + name);
}

// ---------------------------------------------------------------------------
// base classifier
// ---------------------------------------------------------------------------

void BaseClassifier::init(Rng& rng) {
  params.clear();
  for (const auto& layer : arch.layers) {
    if (layer.kind == LayerDesc::Kind::Dense) {
      const double bound = 1.0 / std::sqrt(static_cast<double>(layer.in));
      params.push_back(
          uniform_init({layer.in, layer.out}, -bound, bound, rng, true));
      params.push_back(Tensor::zeros({layer.out}, true));
    } else {
      const std::size_t fan_in = layer.in * layer.kernel * layer.kernel;
      const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
      params.push_back(uniform_init(
          {layer.out, layer.in, layer.kernel, layer.kernel}, -bound, bound,
          rng, true));
      params.push_back(Tensor::zeros({layer.out}, true));
    }
  }
  if (arch.has_head) {
    const std::size_t head_in = arch.layers.back().out;
    const double bound = 1.0 / std::sqrt(static_cast<double>(head_in));
    params.push_back(
        uniform_init({head_in, arch.num_classes}, -bound, bound, rng, true));
    params.push_back(Tensor::zeros({arch.num_classes}, true));
  }
}

namespace {

Tensor flatten_to_matrix(const Tensor& t) {
  if (t.rank() == 2) return t;
  std::size_t rest = 1;
  for (std::size_t i = 1; i < t.rank(); ++i) rest *= t.shape()[i];
  return reshape(t, {t.shape()[0], rest});
}

// spatial mean of conv features -> [N, C]
Tensor pool_features(const Tensor& t) {
  if (t.rank() == 2) return t;
  std::vector<std::size_t> axes;
  for (std::size_t i = 2; i < t.rank(); ++i) axes.push_back(i);
  return reduce(t, axes, Reduce::Mean);
}

Tensor apply_act(const Tensor& t, const LayerDesc& layer) {
  switch (layer.act) {
    case LayerDesc::Act::None: return t;
    case LayerDesc::Act::ReLU: return relu(t);
    case LayerDesc::Act::LeakyReLU: return leaky_relu(t, layer.slope);
  }
  return t;
}

}  // namespace

BaseForward BaseClassifier::forward(const Tensor& input) const {
  BaseForward out;
  Tensor x = input;
  std::size_t p = 0;
  for (const auto& layer : arch.layers) {
    if (layer.kind == LayerDesc::Kind::Dense) {
      x = flatten_to_matrix(x);
      if (x.shape()[1] != layer.in)
        throw DimensionError("dense layer input width mismatch");
      x = add(matmul(x, params[p]), params[p + 1]);
    } else {
      x = conv2d(x, params[p], layer.stride, layer.pad);
      // bias per channel: [F] broadcast over [N,F,H,W]
      x = add(x, reshape(params[p + 1], {1, layer.out, 1, 1}));
    }
    p += 2;
    x = apply_act(x, layer);
    if (layer.tap) out.taps.push_back(x);
  }
  if (arch.has_head) {
    Tensor h = pool_features(x);
    out.logits = add(matmul(h, params[p]), params[p + 1]);
  }
  return out;
}

Tensor batch_tensor(const Dataset& ds, const std::vector<std::size_t>& idx) {
  const std::size_t s = ds.sample_size();
  std::vector<double> data(idx.size() * s);
  for (std::size_t i = 0; i < idx.size(); ++i)
    std::copy_n(ds.sample(idx[i]), s, data.begin() + i * s);
  Shape shape{idx.size()};
  shape.insert(shape.end(), ds.input_shape.begin(), ds.input_shape.end());
  return Tensor::from_data(std::move(shape), std::move(data));
}

// ---------------------------------------------------------------------------
// TAC model
// ---------------------------------------------------------------------------

std::vector<Tensor> TacModel::trainable_params() {
  if (mode == TacMode::Scratch) return base.params;
  std::vector<Tensor> out;
  for (auto& stack : projections)
    for (auto& p : stack.params()) out.push_back(p);
  return out;
}

void TacModel::validate() const {
  slices.validate();
  if (slices.total_length() != book.length())
    throw SpecError("slice spec length " +
                    std::to_string(slices.total_length()) +
                    " != codebook length " + std::to_string(book.length()));
  if (mode == TacMode::AddOn && projections.size() != base.arch.tap_count())
    throw SpecError("add-on model needs one projection stack per tap");
}

namespace {

SliceSpec build_slice_spec(const Architecture& arch,
                           const std::vector<std::size_t>& slice_counts,
                           const std::vector<std::size_t>& widths) {
  std::vector<std::size_t> counts = slice_counts;
  if (counts.size() == 1) counts.assign(widths.size(), counts[0]);
  if (counts.size() != widths.size())
    throw ConfigError("need one slice count, or one per tapped layer (" +
                      std::to_string(widths.size()) + ")");
  SliceSpec spec;
  for (std::size_t i = 0; i < widths.size(); ++i)
    spec.layers.push_back(
        {static_cast<int>(i), widths[i], counts[i]});
  spec.validate();
  (void)arch;
  return spec;
}

}  // namespace

TacModel make_scratch_model(Architecture arch, const CodeBook& book,
                            const LossConfig& loss,
                            const std::vector<std::size_t>& slice_counts,
                            Rng& rng) {
  TacModel model;
  model.base.arch = std::move(arch);
  Rng init = rng.substream("init");
  model.base.init(init);
  model.mode = TacMode::Scratch;
  model.slices = build_slice_spec(model.base.arch, slice_counts,
                                  model.base.arch.tap_widths());
  model.book = book;
  model.loss = loss;
  model.transform = loss.transform;
  model.validate();
  return model;
}

TacModel make_addon_model(BaseClassifier base, const CodeBook& book,
                          const LossConfig& loss,
                          const std::vector<std::size_t>& slice_counts,
                          ProjectionSize projection_size, Rng& rng) {
  TacModel model;
  model.base = std::move(base);
  model.mode = TacMode::AddOn;
  model.book = book;
  model.loss = loss;
  model.transform = loss.transform;
  for (auto& p : model.base.params) {
    // frozen: no gradient bookkeeping for base parameters
    p = p.detach();
  }

  const std::vector<std::size_t> widths = model.base.arch.tap_widths();
  std::vector<std::size_t> counts = slice_counts;
  if (counts.size() == 1) counts.assign(widths.size(), counts[0]);
  if (counts.size() != widths.size())
    throw ConfigError("need one slice count, or one per tapped layer");

  constexpr std::size_t kSliceTarget = 4;  // projected features per slice
  Rng init = rng.substream("init");
  SliceSpec spec;
  for (std::size_t i = 0; i < widths.size(); ++i) {
    ProjectionStackConfig cfg;
    cfg.size = projection_size;
    cfg.input_width = widths[i];
    cfg.output_width = counts[i] * kSliceTarget;
    Rng stack_rng = init.substream(i);
    model.projections.emplace_back(cfg, stack_rng);
    spec.layers.push_back({static_cast<int>(i), cfg.output_width, counts[i]});
  }
  model.slices = spec;
  model.validate();
  return model;
}

ProfileForward forward_profiles(const TacModel& model, const Tensor& batch) {
  BaseForward base = model.base.forward(batch);
  if (base.taps.size() != model.slices.layers.size())
    throw SpecError("tap count does not match slice spec");
  std::vector<Tensor> per_layer;
  for (std::size_t i = 0; i < base.taps.size(); ++i) {
    Tensor features = base.taps[i];
    if (model.mode == TacMode::AddOn) {
      features = pool_features(features);
      features = model.projections[i].forward(features, true);
    }
    per_layer.push_back(layer_profile(features, model.slices.layers[i].n_slices,
                                      model.reduce_mode));
  }
  ProfileForward out;
  out.profiles = assemble_profile(per_layer, model.slices);
  out.logits = base.logits;
  return out;
}

// ---------------------------------------------------------------------------
// predictions
// ---------------------------------------------------------------------------

std::string tac_strategy_name(DistanceMetric metric) {
  return "tac-" + metric_name(metric);
}

namespace {

struct Scope {
  std::size_t begin, end;  // profile segment
};

Scope resolve_scope(const TacModel& model, LayerScope scope) {
  if (scope.full) return {0, model.book.length()};
  const auto [b, e] = model.slices.segment(scope.layer_id);
  return {b, e};
}

double scoped_distance(std::span<const double> profile,
                       std::span<const double> code, Scope s,
                       DistanceMetric metric) {
  return distance(profile.subspan(s.begin, s.end - s.begin),
                  code.subspan(s.begin, s.end - s.begin), metric);
}

NearestCode scoped_nearest(std::span<const double> profile,
                           const CodeBook& book, Scope s,
                           DistanceMetric metric) {
  NearestCode best;
  best.dist = std::numeric_limits<double>::infinity();
  for (std::size_t k = 1; k <= book.num_classes(); ++k) {
    const double d = scoped_distance(profile, book.code(k), s, metric);
    if (d < best.dist) {
      best.dist = d;
      best.label = k;
    }
  }
  return best;
}

void apply_transform(std::vector<double>& values, ProfileTransform transform) {
  if (transform == ProfileTransform::Sigmoid)
    for (double& v : values)
      v = v >= 0.0 ? 1.0 / (1.0 + std::exp(-v))
                   : std::exp(v) / (1.0 + std::exp(v));
}

}  // namespace

std::vector<ScoredPrediction> predict(
    const TacModel& model, const Dataset& ds,
    const std::vector<DistanceMetric>& metrics, LayerScope scope,
    std::size_t batch_size) {
  if (metrics.empty()) throw ConfigError("predict: need at least one metric");
  const Scope s = resolve_scope(model, scope);
  const std::size_t l = model.book.length();
  std::vector<ScoredPrediction> preds;
  preds.reserve(ds.num_samples());

  for (std::size_t at = 0; at < ds.num_samples(); at += batch_size) {
    std::vector<std::size_t> idx;
    for (std::size_t i = at; i < std::min(at + batch_size, ds.num_samples());
         ++i)
      idx.push_back(i);
    ProfileForward fwd = forward_profiles(model, batch_tensor(ds, idx));
    const auto pdata = fwd.profiles.data();
    for (std::size_t bi = 0; bi < idx.size(); ++bi) {
      std::vector<double> row(pdata.begin() + bi * l,
                              pdata.begin() + (bi + 1) * l);
      apply_transform(row, model.transform);
      ScoredPrediction sp;
      sp.sample_id = idx[bi];
      sp.true_label = ds.labels[idx[bi]];
      const NearestCode primary =
          scoped_nearest(row, model.book, s, metrics[0]);
      sp.predicted = static_cast<int>(primary.label);
      sp.confidence[tac_strategy_name(metrics[0])] = -primary.dist;
      for (std::size_t m = 1; m < metrics.size(); ++m) {
        const NearestCode nc = scoped_nearest(row, model.book, s, metrics[m]);
        sp.confidence[tac_strategy_name(metrics[m])] = -nc.dist;
      }
      if (fwd.logits.defined()) {
        const auto ld = fwd.logits.data();
        const std::size_t k = model.base.arch.num_classes;
        double mx = ld[bi * k];
        for (std::size_t j = 1; j < k; ++j)
          mx = std::max(mx, ld[bi * k + j]);
        double z = 0.0;
        for (std::size_t j = 0; j < k; ++j)
          z += std::exp(ld[bi * k + j] - mx);
        sp.confidence["msp"] = 1.0 / z;  // exp(0)/z at the max logit
        sp.confidence["mls"] = mx;
      }
      sp.correct = sp.true_label > 0 && sp.predicted == sp.true_label;
      preds.push_back(std::move(sp));
    }
  }
  return preds;
}

std::vector<double> profile_distances(const TacModel& model, const Dataset& ds,
                                      DistanceMetric metric, LayerScope scope,
                                      std::size_t batch_size) {
  const Scope s = resolve_scope(model, scope);
  const std::size_t l = model.book.length();
  std::vector<double> out;
  out.reserve(ds.num_samples());
  for (std::size_t at = 0; at < ds.num_samples(); at += batch_size) {
    std::vector<std::size_t> idx;
    for (std::size_t i = at; i < std::min(at + batch_size, ds.num_samples());
         ++i)
      idx.push_back(i);
    ProfileForward fwd = forward_profiles(model, batch_tensor(ds, idx));
    const auto pdata = fwd.profiles.data();
    for (std::size_t bi = 0; bi < idx.size(); ++bi) {
      std::vector<double> row(pdata.begin() + bi * l,
                              pdata.begin() + (bi + 1) * l);
      apply_transform(row, model.transform);
      out.push_back(scoped_nearest(row, model.book, s, metric).dist);
    }
  }
  return out;
}

std::vector<ActivationProfile> collect_profiles(const TacModel& model,
                                                const Dataset& ds,
                                                std::size_t batch_size) {
  const std::size_t l = model.book.length();
  std::vector<std::pair<std::size_t, std::size_t>> segments;
  for (const auto& layer : model.slices.layers)
    segments.push_back(model.slices.segment(layer.layer_id));
  std::vector<ActivationProfile> out;
  out.reserve(ds.num_samples());
  for (std::size_t at = 0; at < ds.num_samples(); at += batch_size) {
    std::vector<std::size_t> idx;
    for (std::size_t i = at; i < std::min(at + batch_size, ds.num_samples());
         ++i)
      idx.push_back(i);
    ProfileForward fwd = forward_profiles(model, batch_tensor(ds, idx));
    const auto pdata = fwd.profiles.data();
    for (std::size_t bi = 0; bi < idx.size(); ++bi) {
      ActivationProfile p;
      p.values.assign(pdata.begin() + bi * l, pdata.begin() + (bi + 1) * l);
      p.segments = segments;
      out.push_back(std::move(p));
    }
  }
  return out;
}

double accuracy(const std::vector<ScoredPrediction>& preds) {
  if (preds.empty()) throw NumericError("accuracy: empty prediction set");
  std::size_t c = 0;
  for (const auto& p : preds) c += p.correct ? 1 : 0;
  return static_cast<double>(c) / static_cast<double>(preds.size());
}

}  // namespace tac
