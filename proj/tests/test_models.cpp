#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstring>
#include <vector>

#include "tac/data.hpp"
#include "tac/errors.hpp"
#include "tac/model.hpp"
#include "tac/rng.hpp"
#include "tac/train.hpp"

using namespace tac;

namespace {

Dataset random_blobs(std::size_t classes, std::size_t per_class, double sep,
                     std::uint64_t seed) {
  BlobSpec spec;
  spec.num_classes = classes;
  spec.dim = 6;
  spec.per_class = per_class;
  spec.separation = sep;
  spec.noise = 1.0;
  spec.seed = seed;
  return synth_blobs(spec);
}

std::vector<std::vector<double>> snapshot(const std::vector<Tensor>& params) {
  std::vector<std::vector<double>> out;
  for (const auto& p : params)
    out.emplace_back(p.data().begin(), p.data().end());
  return out;
}

void zero_params(std::vector<Tensor>& params) {
  for (auto& p : params)
    for (double& v : p.mutable_data()) v = 0.0;
}

std::vector<std::size_t> iota_idx(std::size_t n) {
  std::vector<std::size_t> idx(n);
  for (std::size_t i = 0; i < n; ++i) idx[i] = i;
  return idx;
}

}  // namespace

TEST_CASE("zeroed parameters give zero profiles and the smallest label") {
  Rng rng(50);
  const Dataset ds = random_blobs(3, 4, 6.0, 1);
  const CodeBook book = CodeBook::generate(3, 8, 0);
  TacModel model = make_scratch_model(
      mlp_architecture(ds.sample_size(), 3, false, 16), book, LossConfig{},
      {4, 4}, rng);
  zero_params(model.base.params);

  const ProfileForward fwd =
      forward_profiles(model, batch_tensor(ds, iota_idx(ds.num_samples())));
  for (double v : fwd.profiles.data()) CHECK(v == 0.0);

  const auto preds = predict(model, ds, {DistanceMetric::L1},
                             LayerScope::full_profile());
  for (const auto& p : preds) {
    CHECK(p.predicted == 1);
    // sigmoid(0) = 0.5 is 0.5 away from every bit: distance L/2
    CHECK(p.confidence.at("tac-L1") == doctest::Approx(-4.0).epsilon(1e-12));
  }
}

TEST_CASE("forward_profiles composes taps, slicing and assembly") {
  Rng rng(51);
  const Dataset ds = random_blobs(3, 5, 5.0, 2);
  const CodeBook book = CodeBook::generate(3, 12, 1);
  TacModel model = make_scratch_model(
      mlp_architecture(ds.sample_size(), 3, false, 32), book, LossConfig{},
      {8, 4}, rng);

  const Tensor batch = batch_tensor(ds, iota_idx(6));
  const ProfileForward fwd = forward_profiles(model, batch);
  const BaseForward base = model.base.forward(batch);
  std::vector<Tensor> per_layer;
  for (std::size_t i = 0; i < base.taps.size(); ++i)
    per_layer.push_back(
        layer_profile(base.taps[i], model.slices.layers[i].n_slices));
  const Tensor manual = assemble_profile(per_layer, model.slices);
  REQUIRE(fwd.profiles.shape() == manual.shape());
  for (std::size_t i = 0; i < manual.size(); ++i)
    CHECK(fwd.profiles.data()[i] == doctest::Approx(manual.data()[i])
                                        .epsilon(1e-12));
}

TEST_CASE("add-on logits do not depend on projection parameters") {
  Rng rng(52);
  const Dataset ds = random_blobs(3, 4, 5.0, 3);
  BaseClassifier base{mlp_architecture(ds.sample_size(), 3, true, 16), {}};
  Rng init = Rng(7).substream("init");
  base.init(init);
  const CodeBook book = CodeBook::generate(3, 8, 2);
  TacModel model = make_addon_model(base, book, LossConfig{}, {4, 4},
                                    ProjectionSize::Small, rng);

  const Tensor batch = batch_tensor(ds, iota_idx(ds.num_samples()));
  const ProfileForward before = forward_profiles(model, batch);
  for (auto& stack : model.projections)
    for (auto& p : stack.params())
      for (double& v : p.mutable_data()) v += 0.5;
  const ProfileForward after = forward_profiles(model, batch);

  REQUIRE(before.logits.defined());
  for (std::size_t i = 0; i < before.logits.size(); ++i)
    CHECK(before.logits.data()[i] == after.logits.data()[i]);
  double moved = 0.0;
  for (std::size_t i = 0; i < before.profiles.size(); ++i)
    moved += std::abs(before.profiles.data()[i] - after.profiles.data()[i]);
  CHECK(moved > 0.0);
}

TEST_CASE("predict matches the nearest-code oracle") {
  Rng rng(53);
  const Dataset ds = random_blobs(4, 6, 4.0, 4);
  const CodeBook book = CodeBook::generate(4, 10, 3);
  TacModel model = make_scratch_model(
      mlp_architecture(ds.sample_size(), 4, false, 24), book, LossConfig{},
      {6, 4}, rng);

  const auto preds = predict(model, ds, {DistanceMetric::L2},
                             LayerScope::full_profile());
  const auto profiles = collect_profiles(model, ds);
  REQUIRE(preds.size() == profiles.size());
  for (std::size_t i = 0; i < preds.size(); ++i) {
    std::vector<double> row = profiles[i].values;
    for (double& v : row) v = 1.0 / (1.0 + std::exp(-v));
    const NearestCode nc = nearest_code(row, book, DistanceMetric::L2);
    CHECK(preds[i].predicted == static_cast<int>(nc.label));
    CHECK(preds[i].confidence.at("tac-L2") ==
          doctest::Approx(-nc.dist).epsilon(1e-9));
    CHECK(preds[i].correct == (preds[i].predicted == ds.labels[i]));
  }
}

TEST_CASE("single-layer scope restricts distances to the segment") {
  Rng rng(54);
  const Dataset ds = random_blobs(3, 5, 4.0, 5);
  const CodeBook book = CodeBook::generate(3, 12, 4);
  TacModel model = make_scratch_model(
      mlp_architecture(ds.sample_size(), 3, false, 24), book, LossConfig{},
      {8, 4}, rng);
  const int layer = model.slices.layers[1].layer_id;
  const auto [b, e] = model.slices.segment(layer);

  const auto preds =
      predict(model, ds, {DistanceMetric::L1}, LayerScope::single(layer));
  const auto profiles = collect_profiles(model, ds);
  for (std::size_t i = 0; i < preds.size(); ++i) {
    std::vector<double> seg(profiles[i].values.begin() + b,
                            profiles[i].values.begin() + e);
    for (double& v : seg) v = 1.0 / (1.0 + std::exp(-v));
    std::size_t best = 0;
    double best_d = 1e300;
    for (std::size_t k = 1; k <= 3; ++k) {
      std::vector<double> code(book.code(k).begin() + b,
                               book.code(k).begin() + e);
      const double d = distance(seg, code, DistanceMetric::L1);
      if (d < best_d) {
        best_d = d;
        best = k;
      }
    }
    CHECK(preds[i].predicted == static_cast<int>(best));
    CHECK(preds[i].confidence.at("tac-L1") ==
          doctest::Approx(-best_d).epsilon(1e-9));
  }
}

TEST_CASE("msp and mls come from the head logits") {
  Rng rng(55);
  const Dataset ds = random_blobs(3, 4, 5.0, 6);
  BaseClassifier base{mlp_architecture(ds.sample_size(), 3, true, 16), {}};
  Rng init = Rng(9).substream("init");
  base.init(init);
  const CodeBook book = CodeBook::generate(3, 8, 5);
  TacModel model = make_addon_model(base, book, LossConfig{}, {4, 4},
                                    ProjectionSize::Small, rng);

  const auto preds = predict(model, ds, {DistanceMetric::L1},
                             LayerScope::full_profile());
  const BaseForward fwd =
      model.base.forward(batch_tensor(ds, iota_idx(ds.num_samples())));
  const auto logits = fwd.logits.data();
  for (std::size_t i = 0; i < preds.size(); ++i) {
    double mx = logits[i * 3];
    for (std::size_t k = 1; k < 3; ++k) mx = std::max(mx, logits[i * 3 + k]);
    double z = 0.0;
    for (std::size_t k = 0; k < 3; ++k) z += std::exp(logits[i * 3 + k] - mx);
    CHECK(preds[i].confidence.at("mls") == doctest::Approx(mx).epsilon(1e-9));
    CHECK(preds[i].confidence.at("msp") ==
          doctest::Approx(1.0 / z).epsilon(1e-9));
  }
}

TEST_CASE("fit with zero learning rate leaves parameters untouched") {
  Rng rng(56);
  const Dataset ds = random_blobs(3, 8, 5.0, 7);
  const CodeBook book = CodeBook::generate(3, 8, 6);
  TacModel model = make_scratch_model(
      mlp_architecture(ds.sample_size(), 3, false, 16), book, LossConfig{},
      {4, 4}, rng);
  const auto before = snapshot(model.base.params);

  OptimizerConfig opt;
  opt.lr = 0.0;
  FitOptions options;
  options.epochs = 3;
  options.batch_size = 8;
  options.evaluate_each_epoch = false;
  fit(model, ds, nullptr, opt, options);

  const auto after = snapshot(model.base.params);
  REQUIRE(before.size() == after.size());
  for (std::size_t i = 0; i < before.size(); ++i)
    CHECK(std::memcmp(before[i].data(), after[i].data(),
                      before[i].size() * sizeof(double)) == 0);
}

TEST_CASE("fit solves well-separated blobs") {
  Rng rng(57);
  const Dataset ds = random_blobs(3, 40, 8.0, 8);
  // codebook seed chosen for well-spread rows; seeds with a Hamming-2 pair
  // at this short length can stall training in a two-class local optimum
  const CodeBook book = CodeBook::generate(3, 8, 0);
  TacModel model = make_scratch_model(
      mlp_architecture(ds.sample_size(), 3, false, 64), book, LossConfig{},
      {4, 4}, rng);

  OptimizerConfig opt;
  opt.kind = OptimizerConfig::Kind::Adam;
  opt.lr = 0.003;
  FitOptions options;
  options.epochs = 60;
  options.batch_size = 20;
  options.seed = 1;
  const TrainLog log = fit(model, ds, nullptr, opt, options);
  REQUIRE(log.epochs.size() == 60);
  CHECK(log.epochs.back().loss < log.epochs.front().loss);
  CHECK(log.epochs.back().train_accuracy >= 0.95);
  CHECK(accuracy(predict(model, ds, {model.loss.metric},
                         LayerScope::full_profile())) >= 0.95);
}

TEST_CASE("training is bit-deterministic under a fixed seed") {
  const Dataset ds = random_blobs(3, 12, 5.0, 9);
  const CodeBook book = CodeBook::generate(3, 8, 8);
  auto run = [&]() {
    Rng rng(58);
    TacModel model = make_scratch_model(
        mlp_architecture(ds.sample_size(), 3, false, 16), book, LossConfig{},
        {4, 4}, rng);
    OptimizerConfig opt;
    opt.kind = OptimizerConfig::Kind::Adam;
    opt.lr = 0.005;
    FitOptions options;
    options.epochs = 5;
    options.batch_size = 8;
    options.seed = 2;
    const TrainLog log = fit(model, ds, nullptr, opt, options);
    return std::make_pair(snapshot(model.base.params), log.epochs.back().loss);
  };
  const auto [params_a, loss_a] = run();
  const auto [params_b, loss_b] = run();
  CHECK(loss_a == loss_b);
  REQUIRE(params_a.size() == params_b.size());
  for (std::size_t i = 0; i < params_a.size(); ++i)
    CHECK(std::memcmp(params_a[i].data(), params_b[i].data(),
                      params_a[i].size() * sizeof(double)) == 0);
}

TEST_CASE("fit_addon never touches the frozen base") {
  const Dataset ds = random_blobs(3, 20, 7.0, 10);
  BaseClassifier base{mlp_architecture(ds.sample_size(), 3, true, 24), {}};
  Rng init = Rng(11).substream("init");
  base.init(init);

  OptimizerConfig opt;
  opt.kind = OptimizerConfig::Kind::Adam;
  opt.lr = 0.01;
  FitOptions options;
  options.epochs = 10;
  options.batch_size = 15;
  options.seed = 3;
  fit_base(base, ds, nullptr, opt, options);
  const auto frozen = snapshot(base.params);
  const double head_acc = base_accuracy(base, ds);
  CHECK(head_acc >= 0.9);

  const CodeBook book = CodeBook::generate(3, 8, 9);
  TrainLog log;
  const TacModel model =
      fit_addon(base, book, LossConfig{}, {4, 4}, ProjectionSize::Small, ds,
                nullptr, opt, options, &log);
  CHECK(log.epochs.size() == 10);
  const auto after = snapshot(model.base.params);
  REQUIRE(after.size() == frozen.size());
  for (std::size_t i = 0; i < frozen.size(); ++i)
    CHECK(std::memcmp(frozen[i].data(), after[i].data(),
                      frozen[i].size() * sizeof(double)) == 0);
  CHECK(accuracy(predict(model, ds, {model.loss.metric},
                         LayerScope::full_profile())) >= 0.9);
}

TEST_CASE("base_accuracy matches an argmax oracle") {
  const Dataset ds = random_blobs(4, 5, 5.0, 11);
  BaseClassifier base{mlp_architecture(ds.sample_size(), 4, true, 16), {}};
  Rng init = Rng(13).substream("init");
  base.init(init);
  const BaseForward fwd =
      base.forward(batch_tensor(ds, iota_idx(ds.num_samples())));
  const auto logits = fwd.logits.data();
  std::size_t hits = 0;
  for (std::size_t i = 0; i < ds.num_samples(); ++i) {
    std::size_t arg = 0;
    for (std::size_t k = 1; k < 4; ++k)
      if (logits[i * 4 + k] > logits[i * 4 + arg]) arg = k;
    if (static_cast<int>(arg) + 1 == ds.labels[i]) ++hits;
  }
  CHECK(base_accuracy(base, ds) ==
        doctest::Approx(static_cast<double>(hits) / ds.num_samples())
            .epsilon(1e-12));
}

TEST_CASE("memorization probe starts near chance error") {
  Rng rng(59);
  const Dataset ds = random_blobs(4, 100, 5.0, 12);
  const CodeBook book = CodeBook::generate(4, 8, 10);
  TacModel model = make_scratch_model(
      mlp_architecture(ds.sample_size(), 4, false, 16), book, LossConfig{},
      {4, 4}, rng);
  OptimizerConfig opt;
  FitOptions options;
  options.epochs = 0;
  options.seed = 4;
  const std::vector<double> errors = capacity_test(model, ds, opt, options);
  REQUIRE(errors.size() == 1);
  CHECK(errors[0] > 0.75 - 0.12);  // 1 - 1/K = 0.75 for K = 4
  CHECK(errors[0] < 0.75 + 0.12);
}

TEST_CASE("memorization probe drives random-label error to zero") {
  BlobSpec spec;  // tiny set: 4 classes x 32 samples
  spec.per_class = 32;
  const Dataset ds = synth_blobs(spec);
  Rng rng(0);
  const CodeBook book = CodeBook::generate(4, 16, 0);
  TacModel model = make_scratch_model(
      mlp_architecture(ds.sample_size(), 4, false), book, LossConfig{},
      {8, 8}, rng);
  OptimizerConfig opt;
  opt.kind = OptimizerConfig::Kind::Adam;
  opt.lr = 0.002;
  FitOptions options;
  options.epochs = 200;
  options.batch_size = 16;
  options.seed = 0;
  options.evaluate_each_epoch = false;
  const std::vector<double> errors = capacity_test(model, ds, opt, options);
  REQUIRE(errors.size() == 201);
  CHECK(errors.front() > 0.5);  // chance-level start
  CHECK(errors.back() == 0.0);  // full memorization
}

TEST_CASE("confidence is the negated scoped distance") {
  Rng rng(60);
  const Dataset ds = random_blobs(3, 3, 4.0, 13);
  const CodeBook book = CodeBook::generate(3, 8, 11);
  TacModel model = make_scratch_model(
      mlp_architecture(ds.sample_size(), 3, false, 16), book, LossConfig{},
      {4, 4}, rng);
  const auto preds = predict(model, ds, {DistanceMetric::L1, DistanceMetric::L2},
                             LayerScope::full_profile());
  for (const auto& p : preds) {
    CHECK(p.confidence.at("tac-L1") <= 0.0);
    CHECK(p.confidence.at("tac-L2") <= 0.0);
    CHECK(p.confidence.count("msp") == 0);  // no head on this model
  }
}
