#include "tac/losses.hpp"

#include <cmath>

#include "tac/errors.hpp"
#include "tac/rng.hpp"

namespace tac {

void LossConfig::validate() const {
  if (alpha < 0.0 || beta < 0.0 || alpha + beta <= 0.0)
    throw ConfigError("loss: need alpha, beta >= 0 and alpha + beta > 0");
  if (tau <= 0.0) throw ConfigError("loss: tau must be positive");
  if (mixup_concentration < 0.0)
    throw ConfigError("loss: mixup concentration must be >= 0");
}

Tensor l_bin(const Tensor& profiles, const Tensor& target_codes) {
  return bce_with_logits_mean(profiles, target_codes);
}

Tensor distance_matrix(const Tensor& profiles, const CodeBook& book,
                       DistanceMetric metric, ProfileTransform transform) {
  if (profiles.rank() != 2 || profiles.shape()[1] != book.length())
    throw DimensionError("distance_matrix: profiles must be [N, L]");
  if (!metric_trainable(metric))
    throw ConfigError("distance metric " + metric_name(metric) +
                      " has no usable gradient; use L1, L2 or cosine");
  const std::size_t n = profiles.shape()[0];
  const std::size_t l = book.length();
  Tensor a = transform == ProfileTransform::Sigmoid ? sigmoid(profiles)
                                                    : profiles;
  std::vector<Tensor> columns;
  columns.reserve(book.num_classes());
  for (std::size_t k = 1; k <= book.num_classes(); ++k) {
    const auto code = book.code(k);
    Tensor c = Tensor::from_data({1, l}, {code.begin(), code.end()});
    Tensor col;
    switch (metric) {
      case DistanceMetric::L1:
        col = reduce(abs(sub(a, c)), {1}, Reduce::Sum);
        break;
      case DistanceMetric::L2: {
        Tensor diff = sub(a, c);
        col = sqrt(reduce(mul(diff, diff), {1}, Reduce::Sum));
        break;
      }
      case DistanceMetric::Cosine: {
        Tensor dot = reduce(mul(a, c), {1}, Reduce::Sum);
        Tensor na = sqrt(reduce(mul(a, a), {1}, Reduce::Sum));
        double cc = 0.0;
        for (double v : code) cc += v * v;
        if (cc == 0.0)
          throw NumericError("cosine distance undefined for zero code");
        col = add_scalar(neg(div(dot, scale(na, std::sqrt(cc)))), 1.0);
        break;
      }
      default:
        break;  // unreachable, filtered above
    }
    columns.push_back(reshape(col, {n, 1}));
  }
  return concat(columns, 1);
}

Tensor l_ce(const Tensor& profiles, const CodeBook& book,
            const Tensor& class_weights, const LossConfig& config) {
  Tensor d = distance_matrix(profiles, book, config.metric, config.transform);
  Tensor logits = scale(d, -1.0 / config.tau);
  return softmax_cross_entropy(logits, class_weights);
}

Tensor l_ce(const Tensor& profiles, const CodeBook& book,
            const std::vector<int>& labels, const LossConfig& config) {
  return l_ce(profiles, book, one_hot(labels, book.num_classes()), config);
}

Tensor combined_loss(const Tensor& profiles, const CodeBook& book,
                     const std::vector<int>& labels, const LossConfig& config) {
  return combined_loss(profiles, book, codes_for_labels(labels, book),
                       one_hot(labels, book.num_classes()), config);
}

Tensor combined_loss(const Tensor& profiles, const CodeBook& book,
                     const Tensor& target_codes, const Tensor& class_weights,
                     const LossConfig& config) {
  config.validate();
  Tensor loss = Tensor::scalar(0.0);
  if (config.alpha > 0.0)
    loss = add(loss, scale(l_bin(profiles, target_codes), config.alpha));
  if (config.beta > 0.0)
    loss = add(loss, scale(l_ce(profiles, book, class_weights, config),
                           config.beta));
  return loss;
}

Tensor one_hot(const std::vector<int>& labels, std::size_t num_classes) {
  std::vector<double> w(labels.size() * num_classes, 0.0);
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const int y = labels[i];
    if (y < 1 || static_cast<std::size_t>(y) > num_classes)
      throw DimensionError("one_hot: label out of [1..K]");
    w[i * num_classes + (y - 1)] = 1.0;
  }
  return Tensor::from_data({labels.size(), num_classes}, std::move(w));
}

Tensor codes_for_labels(const std::vector<int>& labels, const CodeBook& book) {
  const std::size_t l = book.length();
  std::vector<double> c(labels.size() * l);
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const auto code = book.code(static_cast<std::size_t>(labels[i]));
    std::copy(code.begin(), code.end(), c.begin() + i * l);
  }
  return Tensor::from_data({labels.size(), l}, std::move(c));
}

MixedBatch mixup_batch(const Tensor& inputs, const Tensor& one_hot_labels,
                       const Tensor& code_labels, double concentration,
                       Rng& rng) {
  if (concentration <= 0.0)
    throw ConfigError("mixup: concentration must be positive");
  const std::size_t n = inputs.shape()[0];
  if (n < 2) throw NumericError("mixup: batch must hold at least 2 samples");
  if (one_hot_labels.shape()[0] != n || code_labels.shape()[0] != n)
    throw DimensionError("mixup: batch sizes differ");

  MixedBatch mixed;
  mixed.partners = rng.permutation(n);
  mixed.factors.resize(n);
  for (std::size_t i = 0; i < n; ++i)
    mixed.factors[i] = rng.beta(concentration, concentration);

  auto interpolate = [&](const Tensor& t) {
    const std::size_t stride = t.size() / n;
    std::vector<double> out(t.size());
    const auto d = t.data();
    for (std::size_t i = 0; i < n; ++i) {
      const double f = mixed.factors[i];
      const double* self = d.data() + i * stride;
      const double* partner = d.data() + mixed.partners[i] * stride;
      for (std::size_t j = 0; j < stride; ++j)
        out[i * stride + j] = f * self[j] + (1.0 - f) * partner[j];
    }
    return Tensor::from_data(t.shape(), std::move(out));
  };
  mixed.inputs = interpolate(inputs);
  mixed.class_weights = interpolate(one_hot_labels);
  mixed.codes = interpolate(code_labels);
  return mixed;
}

}  // namespace tac
