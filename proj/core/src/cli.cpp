#include "tac/cli.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <cmath>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <limits>
#include <optional>
#include <sstream>

#include "tac/checkpoint.hpp"
#include "tac/config.hpp"
#include "tac/errors.hpp"
#include "tac/metrics.hpp"
#include "tac/rng.hpp"
#include "tac/train.hpp"

namespace tac {

namespace {

using nlohmann::json;

std::string fmt17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::string timestamp_line() {
  const std::time_t t = std::time(nullptr);
  char buf[64];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&t));
  return std::string("# generated ") + buf;
}

std::ofstream open_out(const std::string& dir, const std::string& name) {
  std::filesystem::create_directories(dir);
  const std::string path = dir + "/" + name;
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot open output file " + path);
  return out;
}

void write_json(const std::string& dir, const std::string& name,
                const json& doc) {
  std::ofstream out = open_out(dir, name);
  out << doc.dump(2) << "\n";
}

// ---------------------------------------------------------------------------
// datasets
// ---------------------------------------------------------------------------

struct TaskData {
  Dataset train, test;
  std::optional<Dataset> val;
  std::optional<Dataset> ood;  // positives for the OOD protocol
};

// want_far_pool: synthesize a separate far-away blob pool when no classes
// are held out (blobs OOD runs).
TaskData build_task(const RunConfig& cfg, bool want_far_pool) {
  TaskData data;
  if (cfg.task == "blobs") {
    // one draw with shared class centers, split per class into train/test
    BlobSpec full_spec = cfg.blobs;
    full_spec.per_class = cfg.blobs.per_class + cfg.blobs_test_per_class;
    const Dataset full = synth_blobs(full_spec);
    std::vector<std::size_t> train_idx, test_idx;
    for (std::size_t k = 0; k < full_spec.num_classes; ++k)
      for (std::size_t s = 0; s < full_spec.per_class; ++s) {
        const std::size_t i = k * full_spec.per_class + s;
        (s < cfg.blobs.per_class ? train_idx : test_idx).push_back(i);
      }
    data.train = full.subset(train_idx);
    data.test = full.subset(test_idx);
    if (want_far_pool && cfg.holdout.empty()) {
      BlobSpec far = cfg.blobs;
      far.num_classes = cfg.ood_classes;
      far.per_class = cfg.ood_per_class;
      far.separation = cfg.ood_separation;
      far.noise = cfg.ood_noise;
      far.seed = cfg.ood_seed;
      data.ood = synth_blobs(far);
    }
  } else {
    Dataset full_train =
        load_mnist_idx(cfg.mnist_train_images, cfg.mnist_train_labels);
    data.test = load_mnist_idx(cfg.mnist_test_images, cfg.mnist_test_labels);
    if (cfg.mnist_val > 0 && cfg.mnist_val < full_train.num_samples()) {
      auto [tr, val] = split_tail_val(full_train, cfg.mnist_val);
      data.train = std::move(tr);
      data.val = std::move(val);
    } else {
      data.train = std::move(full_train);
    }
  }

  if (!cfg.holdout.empty()) {
    HoldoutResult train_split = holdout_split(data.train, cfg.holdout);
    data.train = std::move(train_split.in_dist);
    HoldoutResult test_split = holdout_split(data.test, cfg.holdout);
    data.test = std::move(test_split.in_dist);
    data.ood = std::move(test_split.ood);
    if (data.val) {
      HoldoutResult val_split = holdout_split(*data.val, cfg.holdout);
      data.val = std::move(val_split.in_dist);
    }
  }

  if (cfg.normalize) {
    const Normalization norm =
        fit_normalization(data.train, cfg.task == "blobs");
    norm.apply(data.train);
    norm.apply(data.test);
    if (data.val) norm.apply(*data.val);
    if (data.ood) norm.apply(*data.ood);
  }
  return data;
}

std::vector<std::size_t> resolved_slice_counts(const RunConfig& cfg,
                                               const Architecture& arch) {
  std::vector<std::size_t> counts = cfg.slice_counts;
  if (counts.size() == 1) counts.assign(arch.tap_count(), counts[0]);
  if (counts.size() != arch.tap_count())
    throw ConfigError("slices: need 1 count or one per tapped layer");
  return counts;
}

CodeBook build_codebook(const RunConfig& cfg, std::size_t num_classes,
                        std::size_t length) {
  if (!cfg.code_file.empty()) {
    CodeBook book = CodeBook::load_file(cfg.code_file);
    if (book.num_classes() != num_classes || book.length() != length)
      throw ConfigError("codes.file shape does not match the run (" +
                        std::to_string(book.num_classes()) + "x" +
                        std::to_string(book.length()) + " vs " +
                        std::to_string(num_classes) + "x" +
                        std::to_string(length) + ")");
    return book;
  }
  return CodeBook::generate(num_classes, length, cfg.code_seed);
}

struct TrainedRun {
  TacModel model;
  TrainLog log;
  double base_accuracy = std::numeric_limits<double>::quiet_NaN();
};

TrainedRun run_training(const RunConfig& cfg, const TaskData& data,
                        bool quiet) {
  const Dataset* val = data.val ? &*data.val : nullptr;
  const std::size_t num_classes = data.train.num_classes;
  FitOptions options;
  options.epochs = cfg.epochs;
  options.batch_size = cfg.batch_size;
  options.seed = cfg.seed;

  TrainedRun run;
  if (cfg.mode == "scratch") {
    Architecture arch = make_architecture(cfg.arch, data.train.input_shape,
                                          num_classes, false);
    const std::vector<std::size_t> counts = resolved_slice_counts(cfg, arch);
    std::size_t length = 0;
    for (std::size_t n : counts) length += n;
    if (cfg.code_length != 0 && cfg.code_length != length)
      throw ConfigError("codes.length inconsistent with slice counts");
    const CodeBook book = build_codebook(cfg, num_classes, length);
    Rng rng(cfg.seed);
    run.model = make_scratch_model(std::move(arch), book, cfg.loss, counts,
                                   rng);
    run.log = fit(run.model, data.train, val, cfg.opt, options);
  } else {
    Architecture arch = make_architecture(cfg.arch, data.train.input_shape,
                                          num_classes, true);
    const std::vector<std::size_t> counts = resolved_slice_counts(cfg, arch);
    std::size_t length = 0;
    for (std::size_t n : counts) length += n;
    if (cfg.code_length != 0 && cfg.code_length != length)
      throw ConfigError("codes.length inconsistent with slice counts");
    const CodeBook book = build_codebook(cfg, num_classes, length);

    BaseClassifier base{std::move(arch), {}};
    Rng base_init = Rng(cfg.seed).substream("init");
    base.init(base_init);
    FitOptions base_options = options;
    base_options.epochs = cfg.base_epochs;
    fit_base(base, data.train, val, cfg.opt, base_options);
    run.base_accuracy = base_accuracy(base, data.test);
    if (!quiet)
      std::cout << "base test accuracy " << fmt17(run.base_accuracy) << "\n";
    run.model = fit_addon(base, book, cfg.loss, counts, cfg.projection,
                          data.train, val, cfg.opt, options, &run.log);
  }
  return run;
}

// ---------------------------------------------------------------------------
// strategies / predictions CSV
// ---------------------------------------------------------------------------

std::vector<DistanceMetric> tac_metrics_of(
    const std::vector<std::string>& strategies, DistanceMetric primary) {
  std::vector<DistanceMetric> metrics{primary};
  for (const auto& s : strategies) {
    if (s.rfind("tac-", 0) != 0) continue;
    const DistanceMetric m = parse_metric(s.substr(4));
    if (std::find(metrics.begin(), metrics.end(), m) == metrics.end())
      metrics.push_back(m);
  }
  return metrics;
}

void write_predictions_csv(std::ofstream& out,
                           const std::vector<ScoredPrediction>& preds,
                           const std::vector<std::string>& strategies) {
  out << timestamp_line() << "\n";
  out << "sample_id,true_label,predicted,correct";
  for (const auto& s : strategies) out << "," << s;
  out << "\n";
  for (const auto& p : preds) {
    out << p.sample_id << "," << p.true_label << "," << p.predicted << ","
        << (p.correct ? 1 : 0);
    for (const auto& s : strategies) {
      const auto it = p.confidence.find(s);
      if (it == p.confidence.end())
        throw ConfigError("strategy '" + s + "' unavailable for this model");
      out << "," << fmt17(it->second);
    }
    out << "\n";
  }
}

struct PredictionFile {
  std::vector<ScoredPrediction> preds;
  std::vector<std::string> strategies;
};

PredictionFile read_predictions_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open predictions file " + path);
  PredictionFile file;
  std::string line;
  bool have_header = false;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    std::vector<std::string> cells;
    std::stringstream row(line);
    std::string cell;
    while (std::getline(row, cell, ',')) cells.push_back(cell);
    if (!have_header) {
      if (cells.size() < 5 || cells[0] != "sample_id" ||
          cells[3] != "correct")
        throw FormatError("predictions file: unexpected header in " + path);
      file.strategies.assign(cells.begin() + 4, cells.end());
      have_header = true;
      continue;
    }
    if (cells.size() != 4 + file.strategies.size())
      throw FormatError("predictions file: ragged row in " + path);
    ScoredPrediction p;
    p.sample_id = std::stoul(cells[0]);
    p.true_label = std::stoi(cells[1]);
    p.predicted = std::stoi(cells[2]);
    p.correct = cells[3] == "1";
    for (std::size_t i = 0; i < file.strategies.size(); ++i)
      p.confidence[file.strategies[i]] = std::stod(cells[4 + i]);
    file.preds.push_back(std::move(p));
  }
  if (!have_header || file.preds.empty())
    throw FormatError("predictions file: no data rows in " + path);
  return file;
}

json detection_summary(const std::vector<ScoreRecord>& records) {
  json out;
  try {
    out["auroc"] = auroc(records);
    out["detection_rate_at_eer"] = detection_rate_at_eer(records);
    out["eer"] = eer(records);
  } catch (const NumericError&) {
    out["auroc"] = nullptr;
    out["detection_rate_at_eer"] = nullptr;
    out["eer"] = nullptr;
  }
  return out;
}

// ---------------------------------------------------------------------------
// commands
// ---------------------------------------------------------------------------

struct GlobalFlags {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out_dir;
  bool quiet = false;
};

RunConfig load_config(const GlobalFlags& flags) {
  if (flags.config.empty()) throw ConfigError("--config is required");
  RunConfig cfg = load_run_config(flags.config);
  if (flags.seed) cfg.seed = *flags.seed;
  if (flags.out_dir) cfg.out_dir = *flags.out_dir;
  return cfg;
}

void cmd_gen_codes(std::size_t num_classes, std::size_t length,
                   std::uint64_t seed, const std::string& out_path,
                   bool quiet) {
  const CodeBook book = CodeBook::generate(num_classes, length, seed);
  book.save_file(out_path);
  if (!quiet) {
    const PairwiseStats stats = pairwise_stats(book);
    std::cout << "wrote " << out_path << " (K=" << num_classes
              << ", L=" << length << ", min/mean/max Hamming " << stats.min
              << "/" << stats.mean << "/" << stats.max << ")\n";
  }
}

void cmd_train(const GlobalFlags& flags) {
  const RunConfig cfg = load_config(flags);
  const TaskData data = build_task(cfg, false);
  const TrainedRun run = run_training(cfg, data, flags.quiet);

  std::filesystem::create_directories(cfg.out_dir);
  save_checkpoint(run.model, cfg.out_dir + "/checkpoint.txt");
  std::ofstream log = open_out(cfg.out_dir, "train_log.csv");
  log << timestamp_line() << "\n";
  log << "epoch,loss,l_bin,l_ce,train_accuracy,val_accuracy,"
         "mean_correct_distance\n";
  for (const auto& e : run.log.epochs)
    log << e.epoch << "," << fmt17(e.loss) << "," << fmt17(e.loss_bin) << ","
        << fmt17(e.loss_ce) << "," << fmt17(e.train_accuracy) << ","
        << fmt17(e.val_accuracy) << "," << fmt17(e.mean_correct_distance)
        << "\n";
  if (!flags.quiet) {
    const auto preds = predict(run.model, data.test, {cfg.loss.metric},
                               LayerScope::full_profile());
    std::cout << "test accuracy " << fmt17(accuracy(preds)) << "\n";
  }
}

void cmd_eval(const GlobalFlags& flags, const std::string& checkpoint_path,
              std::string strategies_arg, const std::string& scope_arg) {
  RunConfig cfg = load_config(flags);
  if (!scope_arg.empty()) cfg.layer_scope = scope_arg;
  const TacModel model = load_checkpoint(checkpoint_path);
  const TaskData data = build_task(cfg, false);

  if (strategies_arg.empty()) {
    strategies_arg = tac_strategy_name(cfg.loss.metric);
    if (model.base.arch.has_head) strategies_arg += ",msp,mls";
  }
  std::vector<std::string> strategies;
  {
    std::stringstream in(strategies_arg);
    std::string item;
    while (std::getline(in, item, ','))
      if (!item.empty()) strategies.push_back(item);
  }
  for (const auto& s : strategies)
    if ((s == "msp" || s == "mls") && !model.base.arch.has_head)
      throw ConfigError("strategy '" + s + "' needs a softmax head");

  const std::vector<DistanceMetric> metrics =
      tac_metrics_of(strategies, cfg.loss.metric);
  const auto preds = predict(model, data.test, metrics, cfg.scope());

  std::ofstream csv = open_out(cfg.out_dir, "predictions.csv");
  write_predictions_csv(csv, preds, strategies);

  json summary;
  summary["accuracy"] = accuracy(preds);
  summary["n"] = preds.size();
  summary["scope"] = cfg.layer_scope;
  for (const auto& s : strategies)
    summary["error_detection"][s] =
        detection_summary(error_detection_scores(preds, s));
  write_json(cfg.out_dir, "eval_summary.json", summary);
  if (!flags.quiet)
    std::cout << "accuracy " << fmt17(accuracy(preds)) << "\n";
}

void cmd_reject(const std::string& predictions_path, int folds,
                std::uint64_t seed, const std::string& out_dir, bool quiet) {
  const PredictionFile file = read_predictions_csv(predictions_path);
  const std::vector<double> omegas = default_omega_grid();
  const std::vector<double> fractions = default_fraction_grid();

  json areas;
  std::map<std::string, CurveSet> vocs;
  std::map<std::string, CurveSet> rejections;
  for (const auto& s : file.strategies) {
    vocs[s] = voc_curve(file.preds, s, omegas, folds, seed);
    auto [curve, area] = accuracy_rejection_curve(file.preds, s, fractions);
    rejections[s] = std::move(curve);
    areas["accuracy_rejection_area"][s] = area;
  }
  areas["folds"] = folds;
  areas["seed"] = seed;

  std::ofstream voc_csv = open_out(out_dir, "voc.csv");
  voc_csv << timestamp_line() << "\n";
  voc_csv << "omega";
  for (const auto& s : file.strategies)
    voc_csv << "," << s << ".train," << s << ".test";
  voc_csv << "\n";
  for (std::size_t i = 0; i < omegas.size(); ++i) {
    voc_csv << fmt17(omegas[i]);
    for (const auto& s : file.strategies)
      voc_csv << "," << fmt17(vocs[s].series["train"][i]) << ","
              << fmt17(vocs[s].series["test"][i]);
    voc_csv << "\n";
  }

  std::ofstream rej_csv = open_out(out_dir, "accuracy_rejection.csv");
  rej_csv << timestamp_line() << "\n";
  rej_csv << "fraction";
  for (const auto& s : file.strategies) rej_csv << "," << s;
  rej_csv << "\n";
  for (std::size_t i = 0; i < fractions.size(); ++i) {
    rej_csv << fmt17(fractions[i]);
    for (const auto& s : file.strategies)
      rej_csv << "," << fmt17(rejections[s].series["accuracy"][i]);
    rej_csv << "\n";
  }

  write_json(out_dir, "areas.json", areas);
  if (!quiet)
    std::cout << "wrote voc.csv, accuracy_rejection.csv, areas.json\n";
}

void cmd_ood(const GlobalFlags& flags, const std::string& checkpoint_path,
             const std::string& metrics_arg) {
  const RunConfig cfg = load_config(flags);
  const TacModel model = load_checkpoint(checkpoint_path);
  const TaskData data = build_task(cfg, true);
  if (!data.ood)
    throw ConfigError("ood: config defines no holdout classes or far pool");

  std::vector<DistanceMetric> metrics;
  {
    std::stringstream in(metrics_arg);
    std::string item;
    while (std::getline(in, item, ','))
      if (!item.empty()) metrics.push_back(parse_metric(item));
  }
  if (metrics.empty())
    metrics = {DistanceMetric::L0, DistanceMetric::L1, DistanceMetric::L2,
               DistanceMetric::Linf, DistanceMetric::Cosine};

  const LayerScope scope = cfg.scope();
  std::map<std::string, std::vector<double>> in_scores, ood_scores;
  for (DistanceMetric m : metrics) {
    in_scores[metric_name(m)] = profile_distances(model, data.test, m, scope);
    ood_scores[metric_name(m)] = profile_distances(model, *data.ood, m, scope);
  }

  std::ofstream csv = open_out(cfg.out_dir, "ood_scores.csv");
  csv << timestamp_line() << "\n";
  csv << "source,sample_id";
  for (DistanceMetric m : metrics) csv << "," << metric_name(m);
  csv << "\n";
  for (std::size_t i = 0; i < data.test.num_samples(); ++i) {
    csv << "in," << i;
    for (DistanceMetric m : metrics)
      csv << "," << fmt17(in_scores[metric_name(m)][i]);
    csv << "\n";
  }
  for (std::size_t i = 0; i < data.ood->num_samples(); ++i) {
    csv << "ood," << i;
    for (DistanceMetric m : metrics)
      csv << "," << fmt17(ood_scores[metric_name(m)][i]);
    csv << "\n";
  }

  json summary;
  summary["n_in"] = data.test.num_samples();
  summary["n_ood"] = data.ood->num_samples();
  std::map<std::string, double> aurocs;
  for (DistanceMetric m : metrics) {
    const std::string name = metric_name(m);
    std::vector<ScoreRecord> records;
    for (double d : in_scores[name]) records.push_back({d, false});
    for (double d : ood_scores[name]) records.push_back({d, true});
    json entry = detection_summary(records);
    if (!entry["auroc"].is_null()) aurocs[name] = entry["auroc"];
    summary["metrics"][name] = std::move(entry);
  }
  json flags_list = json::array();
  if (aurocs.count("Linf") && aurocs.count("L1") &&
      aurocs["Linf"] > aurocs["L1"])
    flags_list.push_back("Linf outranked L1; inspect the metric sweep");
  summary["flags"] = flags_list;
  write_json(cfg.out_dir, "ood_summary.json", summary);
  if (!flags.quiet && aurocs.count("L1"))
    std::cout << "ood L1 auroc " << fmt17(aurocs["L1"]) << "\n";
}

void cmd_capacity(const GlobalFlags& flags) {
  const RunConfig cfg = load_config(flags);
  if (cfg.mode != "scratch")
    throw ConfigError("capacity: only scratch mode is supported");
  const TaskData data = build_task(cfg, false);

  Architecture arch = make_architecture(cfg.arch, data.train.input_shape,
                                        data.train.num_classes, false);
  const std::vector<std::size_t> counts = resolved_slice_counts(cfg, arch);
  std::size_t length = 0;
  for (std::size_t n : counts) length += n;
  const CodeBook book = build_codebook(cfg, data.train.num_classes, length);
  Rng rng(cfg.seed);
  TacModel model = make_scratch_model(std::move(arch), book, cfg.loss, counts,
                                      rng);

  FitOptions options;
  options.epochs = cfg.epochs;
  options.batch_size = cfg.batch_size;
  options.seed = cfg.seed;
  const std::vector<double> errors =
      capacity_test(model, data.train, cfg.opt, options);

  std::ofstream csv = open_out(cfg.out_dir, "capacity.csv");
  csv << timestamp_line() << "\n";
  csv << "epoch,error_rate\n";
  for (std::size_t i = 0; i < errors.size(); ++i)
    csv << i << "," << fmt17(errors[i]) << "\n";
  if (!flags.quiet)
    std::cout << "final random-label error " << fmt17(errors.back()) << "\n";
}

void cmd_layers(const GlobalFlags& flags, const std::string& checkpoint_path) {
  const RunConfig cfg = load_config(flags);
  const TacModel model = load_checkpoint(checkpoint_path);
  const TaskData data = build_task(cfg, false);
  const std::string strategy = tac_strategy_name(cfg.loss.metric);

  std::ofstream csv = open_out(cfg.out_dir, "layers.csv");
  csv << timestamp_line() << "\n";
  csv << "scope,accuracy,error_detection_auroc\n";
  auto emit = [&](const std::string& name, LayerScope scope) {
    const auto preds = predict(model, data.test, {cfg.loss.metric}, scope);
    double det = std::numeric_limits<double>::quiet_NaN();
    try {
      det = auroc(error_detection_scores(preds, strategy));
    } catch (const NumericError&) {
    }
    csv << name << "," << fmt17(accuracy(preds)) << "," << fmt17(det) << "\n";
  };
  emit("full", LayerScope::full_profile());
  for (const auto& layer : model.slices.layers)
    emit(std::to_string(layer.layer_id), LayerScope::single(layer.layer_id));
  if (!flags.quiet)
    std::cout << "wrote layers.csv (" << model.slices.layers.size() + 1
              << " rows)\n";
}

}  // namespace

int run_cli(int argc, const char* const* argv) {
  CLI::App app{"total activation classifier toolkit"};
  app.require_subcommand(1);

  GlobalFlags flags;
  std::uint64_t seed_value = 0;
  std::string out_dir_value;
  app.add_option("--config", flags.config, "run config file");
  auto* seed_opt = app.add_option("--seed", seed_value, "override run seed");
  auto* out_opt =
      app.add_option("--out-dir", out_dir_value, "override output directory");
  app.add_flag("--quiet", flags.quiet, "suppress progress output");

  auto* gen = app.add_subcommand("gen-codes", "generate a class codebook");
  std::size_t gen_k = 10, gen_l = 64;
  std::uint64_t gen_seed = 0;
  std::string gen_out = "codes.txt";
  gen->add_option("--classes", gen_k, "number of classes")->required();
  gen->add_option("--length", gen_l, "code length")->required();
  gen->add_option("--seed", gen_seed, "generator seed");
  gen->add_option("--out", gen_out, "output file")->required();

  auto* train = app.add_subcommand("train", "train a model from a config");

  auto* eval = app.add_subcommand("eval", "score a dataset with a checkpoint");
  std::string eval_ckpt, eval_strategies, eval_scope;
  eval->add_option("--checkpoint", eval_ckpt, "model checkpoint")->required();
  eval->add_option("--strategies", eval_strategies,
                   "comma list (tac-L1, msp, mls, ...)");
  eval->add_option("--scope", eval_scope, "full or a tapped layer id");

  auto* reject =
      app.add_subcommand("reject", "value/rejection analysis of predictions");
  std::string reject_preds, reject_out = ".";
  int reject_folds = 5;
  std::uint64_t reject_seed = 0;
  reject->add_option("--predictions", reject_preds, "predictions CSV")
      ->required();
  reject->add_option("--folds", reject_folds, "cross-validation folds");
  reject->add_option("--seed", reject_seed, "fold shuffle seed");
  reject->add_option("--out-dir", reject_out, "output directory");

  auto* ood = app.add_subcommand("ood", "out-of-distribution detection sweep");
  std::string ood_ckpt, ood_metrics;
  ood->add_option("--checkpoint", ood_ckpt, "model checkpoint")->required();
  ood->add_option("--metrics", ood_metrics,
                  "comma list of distances (default: all)");

  auto* capacity =
      app.add_subcommand("capacity", "random-label memorization probe");

  auto* layers =
      app.add_subcommand("layers", "per-layer accuracy and error detection");
  std::string layers_ckpt;
  layers->add_option("--checkpoint", layers_ckpt, "model checkpoint")
      ->required();

  // let global flags like --quiet appear after the subcommand name
  for (CLI::App* sub : app.get_subcommands(/*filter=*/nullptr))
    sub->fallthrough();

  try {
    app.parse(argc, argv);
    if (!seed_opt->empty()) flags.seed = seed_value;
    if (!out_opt->empty()) flags.out_dir = out_dir_value;

    if (gen->parsed()) {
      std::string out = gen_out;
      if (flags.out_dir) out = *flags.out_dir + "/" + out;
      if (out.find('/') != std::string::npos)
        std::filesystem::create_directories(
            std::filesystem::path(out).parent_path());
      cmd_gen_codes(gen_k, gen_l, gen_seed, out, flags.quiet);
    } else if (train->parsed()) {
      cmd_train(flags);
    } else if (eval->parsed()) {
      cmd_eval(flags, eval_ckpt, eval_strategies, eval_scope);
    } else if (reject->parsed()) {
      if (flags.out_dir) reject_out = *flags.out_dir;
      cmd_reject(reject_preds, reject_folds, reject_seed, reject_out,
                 flags.quiet);
    } else if (ood->parsed()) {
      cmd_ood(flags, ood_ckpt, ood_metrics);
    } else if (capacity->parsed()) {
      cmd_capacity(flags);
    } else if (layers->parsed()) {
      cmd_layers(flags, layers_ckpt);
    }
    return 0;
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const FormatError& e) {
    std::cerr << "format error: " << e.what() << "\n";
    return 2;
  } catch (const NumericError& e) {
    std::cerr << "numeric error: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}

int run_cli(const std::vector<std::string>& args) {
  std::vector<const char*> argv;
  argv.push_back("tac");
  for (const auto& a : args) argv.push_back(a.c_str());
  return run_cli(static_cast<int>(argv.size()), argv.data());
}

}  // namespace tac
