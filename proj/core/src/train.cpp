#include "tac/train.hpp"

#include <cmath>
#include <cstring>
#include <limits>

#include "tac/errors.hpp"
#include "tac/rng.hpp"

namespace tac {

namespace {

struct EvalResult {
  double accuracy = 0.0;
  double mean_correct_distance = 0.0;
};

// accuracy and mean distance to the true class code, single pass
EvalResult evaluate_tac(const TacModel& model, const Dataset& ds) {
  const std::vector<ActivationProfile> profiles = collect_profiles(model, ds);
  const DistanceMetric metric = model.loss.metric;
  EvalResult result;
  std::size_t correct = 0;
  double dist_total = 0.0;
  for (std::size_t i = 0; i < profiles.size(); ++i) {
    std::vector<double> row = profiles[i].values;
    if (model.transform == ProfileTransform::Sigmoid)
      for (double& v : row)
        v = v >= 0.0 ? 1.0 / (1.0 + std::exp(-v))
                     : std::exp(v) / (1.0 + std::exp(v));
    const NearestCode nc = nearest_code(row, model.book, metric);
    if (static_cast<int>(nc.label) == ds.labels[i]) ++correct;
    dist_total += distance(
        row, model.book.code(static_cast<std::size_t>(ds.labels[i])), metric);
  }
  result.accuracy =
      static_cast<double>(correct) / static_cast<double>(profiles.size());
  result.mean_correct_distance =
      dist_total / static_cast<double>(profiles.size());
  return result;
}

std::uint64_t stream_seed(std::uint64_t run_seed, const char* name) {
  return Rng(run_seed).substream(name).next_u64();
}

}  // namespace

TrainLog fit(TacModel& model, const Dataset& train, const Dataset* val,
             const OptimizerConfig& opt, const FitOptions& options) {
  model.validate();
  model.loss.validate();
  for (int y : train.labels)
    if (y < 1 || static_cast<std::size_t>(y) > model.book.num_classes())
      throw ConfigError("fit: dataset label outside [1..K]");

  std::vector<Tensor> params = model.trainable_params();
  Optimizer optimizer(opt);
  const std::uint64_t data_seed = stream_seed(options.seed, "data");
  Rng mixup_rng = Rng(options.seed).substream("mixup");
  const LossConfig& cfg = model.loss;

  TrainLog log;
  for (int epoch = 0; epoch < options.epochs; ++epoch) {
    double sum_loss = 0.0, sum_bin = 0.0, sum_ce = 0.0;
    std::size_t n_batches = 0;
    for (const auto& batch_idx :
         batches(train.num_samples(), options.batch_size, data_seed, epoch)) {
      Tensor inputs = batch_tensor(train, batch_idx);
      std::vector<int> labels;
      for (std::size_t i : batch_idx) labels.push_back(train.labels[i]);

      Tensor codes = codes_for_labels(labels, model.book);
      Tensor weights = one_hot(labels, model.book.num_classes());
      if (cfg.mixup_concentration > 0.0 && batch_idx.size() >= 2) {
        MixedBatch mixed =
            mixup_batch(inputs, weights, codes, cfg.mixup_concentration,
                        mixup_rng);
        inputs = mixed.inputs;
        codes = mixed.codes;
        weights = mixed.class_weights;
      }

      ProfileForward fwd = forward_profiles(model, inputs);
      Tensor loss = Tensor::scalar(0.0);
      double bin_value = 0.0, ce_value = 0.0;
      if (cfg.alpha > 0.0) {
        Tensor lb = l_bin(fwd.profiles, codes);
        bin_value = lb.item();
        loss = add(loss, scale(lb, cfg.alpha));
      }
      if (cfg.beta > 0.0) {
        Tensor lc = l_ce(fwd.profiles, model.book, weights, cfg);
        ce_value = lc.item();
        loss = add(loss, scale(lc, cfg.beta));
      }
      const double loss_value = loss.item();
      if (!std::isfinite(loss_value))
        throw NumericError("training diverged: non-finite loss at epoch " +
                           std::to_string(epoch) + ", batch " +
                           std::to_string(n_batches));
      loss.backward();
      optimizer.step(params);
      sum_loss += loss_value;
      sum_bin += bin_value;
      sum_ce += ce_value;
      ++n_batches;
    }

    EpochLog entry;
    entry.epoch = epoch;
    entry.loss = sum_loss / static_cast<double>(n_batches);
    entry.loss_bin = sum_bin / static_cast<double>(n_batches);
    entry.loss_ce = sum_ce / static_cast<double>(n_batches);
    entry.val_accuracy = std::numeric_limits<double>::quiet_NaN();
    if (options.evaluate_each_epoch) {
      const EvalResult train_eval = evaluate_tac(model, train);
      entry.train_accuracy = train_eval.accuracy;
      entry.mean_correct_distance = train_eval.mean_correct_distance;
      if (val) entry.val_accuracy = evaluate_tac(model, *val).accuracy;
    }
    log.epochs.push_back(entry);
  }
  return log;
}

TrainLog fit_base(BaseClassifier& base, const Dataset& train,
                  const Dataset* val, const OptimizerConfig& opt,
                  const FitOptions& options) {
  if (!base.arch.has_head)
    throw ConfigError("fit_base: architecture has no softmax head");
  std::vector<Tensor> params = base.params;
  Optimizer optimizer(opt);
  const std::uint64_t data_seed = stream_seed(options.seed, "data");

  TrainLog log;
  for (int epoch = 0; epoch < options.epochs; ++epoch) {
    double sum_loss = 0.0;
    std::size_t n_batches = 0;
    for (const auto& batch_idx :
         batches(train.num_samples(), options.batch_size, data_seed, epoch)) {
      Tensor inputs = batch_tensor(train, batch_idx);
      std::vector<int> labels;
      for (std::size_t i : batch_idx) labels.push_back(train.labels[i]);
      BaseForward fwd = base.forward(inputs);
      Tensor loss = softmax_cross_entropy(
          fwd.logits, one_hot(labels, base.arch.num_classes));
      const double loss_value = loss.item();
      if (!std::isfinite(loss_value))
        throw NumericError("base training diverged at epoch " +
                           std::to_string(epoch));
      loss.backward();
      optimizer.step(params);
      sum_loss += loss_value;
      ++n_batches;
    }
    EpochLog entry;
    entry.epoch = epoch;
    entry.loss = sum_loss / static_cast<double>(n_batches);
    entry.val_accuracy = std::numeric_limits<double>::quiet_NaN();
    if (options.evaluate_each_epoch) {
      entry.train_accuracy = base_accuracy(base, train);
      if (val) entry.val_accuracy = base_accuracy(base, *val);
    }
    log.epochs.push_back(entry);
  }
  return log;
}

double base_accuracy(const BaseClassifier& base, const Dataset& ds,
                     std::size_t batch_size) {
  if (!base.arch.has_head)
    throw ConfigError("base_accuracy: architecture has no softmax head");
  std::size_t correct = 0;
  for (std::size_t at = 0; at < ds.num_samples(); at += batch_size) {
    std::vector<std::size_t> idx;
    for (std::size_t i = at; i < std::min(at + batch_size, ds.num_samples());
         ++i)
      idx.push_back(i);
    BaseForward fwd = base.forward(batch_tensor(ds, idx));
    const auto ld = fwd.logits.data();
    const std::size_t k = base.arch.num_classes;
    for (std::size_t bi = 0; bi < idx.size(); ++bi) {
      std::size_t best = 0;
      for (std::size_t j = 1; j < k; ++j)
        if (ld[bi * k + j] > ld[bi * k + best]) best = j;
      if (static_cast<int>(best) + 1 == ds.labels[idx[bi]]) ++correct;
    }
  }
  return static_cast<double>(correct) / static_cast<double>(ds.num_samples());
}

TacModel fit_addon(const BaseClassifier& base, const CodeBook& book,
                   const LossConfig& loss,
                   const std::vector<std::size_t>& slice_counts,
                   ProjectionSize projection_size, const Dataset& train,
                   const Dataset* val, const OptimizerConfig& opt,
                   const FitOptions& options, TrainLog* log) {
  std::vector<std::vector<double>> before;
  for (const auto& p : base.params)
    before.emplace_back(p.data().begin(), p.data().end());

  Rng rng(options.seed);
  TacModel model = make_addon_model(base, book, loss, slice_counts,
                                    projection_size, rng);
  TrainLog fit_log = fit(model, train, val, opt, options);
  if (log) *log = std::move(fit_log);

  for (std::size_t i = 0; i < base.params.size(); ++i) {
    const auto now = base.params[i].data();
    if (before[i].size() != now.size() ||
        std::memcmp(before[i].data(), now.data(),
                    now.size() * sizeof(double)) != 0)
      throw NumericError("fit_addon: base parameters changed");
  }
  return model;
}

std::vector<double> capacity_test(TacModel& model, const Dataset& ds,
                                  const OptimizerConfig& opt,
                                  const FitOptions& options) {
  Dataset shuffled = ds;
  Rng label_rng = Rng(options.seed).substream("labels");
  for (int& y : shuffled.labels)
    y = static_cast<int>(label_rng.uniform_int(model.book.num_classes())) + 1;

  std::vector<Tensor> params = model.trainable_params();
  Optimizer optimizer(opt);
  const std::uint64_t data_seed = stream_seed(options.seed, "data");

  std::vector<double> error_rates;
  error_rates.push_back(1.0 - evaluate_tac(model, shuffled).accuracy);
  for (int epoch = 0; epoch < options.epochs; ++epoch) {
    std::size_t batch_no = 0;
    for (const auto& batch_idx : batches(shuffled.num_samples(),
                                         options.batch_size, data_seed,
                                         epoch)) {
      Tensor inputs = batch_tensor(shuffled, batch_idx);
      std::vector<int> labels;
      for (std::size_t i : batch_idx) labels.push_back(shuffled.labels[i]);
      ProfileForward fwd = forward_profiles(model, inputs);
      Tensor loss =
          combined_loss(fwd.profiles, model.book, labels, model.loss);
      if (!std::isfinite(loss.item()))
        throw NumericError("capacity test diverged at epoch " +
                           std::to_string(epoch) + ", batch " +
                           std::to_string(batch_no));
      loss.backward();
      optimizer.step(params);
      ++batch_no;
    }
    error_rates.push_back(1.0 - evaluate_tac(model, shuffled).accuracy);
  }
  return error_rates;
}

}  // namespace tac
