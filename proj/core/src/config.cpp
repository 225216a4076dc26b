#include "tac/config.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

#include "tac/errors.hpp"

namespace tac {

LayerScope RunConfig::scope() const {
  if (layer_scope == "full") return LayerScope::full_profile();
  try {
    std::size_t used = 0;
    const int id = std::stoi(layer_scope, &used);
    if (used != layer_scope.size()) throw std::invalid_argument(layer_scope);
    return LayerScope::single(id);
  } catch (const std::exception&) {
    throw ConfigError("layer-scope must be 'full' or a layer id, got '" +
                      layer_scope + "'");
  }
}

void RunConfig::validate() const {
  if (task != "blobs" && task != "mnist")
    throw ConfigError("task must be blobs or mnist, got '" + task + "'");
  if (mode != "scratch" && mode != "addon")
    throw ConfigError("mode must be scratch or addon, got '" + mode + "'");
  if (arch != "mlp" && arch != "conv4")
    throw ConfigError("arch must be mlp or conv4, got '" + arch + "'");
  if (slice_counts.empty())
    throw ConfigError("slices: need at least one count");
  for (std::size_t n : slice_counts)
    if (n == 0) throw ConfigError("slices: counts must be >= 1");
  if (epochs < 0) throw ConfigError("epochs must be >= 0");
  if (base_epochs < 0) throw ConfigError("base.epochs must be >= 0");
  if (batch_size == 0) throw ConfigError("batch-size must be >= 1");
  loss.validate();
  opt.validate();
  if (task == "blobs") blobs.validate();
  if (task == "mnist" &&
      (mnist_train_images.empty() || mnist_train_labels.empty() ||
       mnist_test_images.empty() || mnist_test_labels.empty()))
    throw ConfigError("mnist task needs all four mnist.* file paths");
  scope();  // throws on malformed layer-scope
}

namespace {

std::string trim(const std::string& s) {
  const std::size_t b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const std::size_t e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

double to_real(const std::string& key, const std::string& value) {
  try {
    std::size_t used = 0;
    const double v = std::stod(value, &used);
    if (used != value.size()) throw std::invalid_argument(value);
    return v;
  } catch (const std::exception&) {
    throw ConfigError("config: key '" + key + "' needs a real, got '" + value +
                      "'");
  }
}

long long to_int(const std::string& key, const std::string& value) {
  try {
    std::size_t used = 0;
    const long long v = std::stoll(value, &used);
    if (used != value.size()) throw std::invalid_argument(value);
    return v;
  } catch (const std::exception&) {
    throw ConfigError("config: key '" + key + "' needs an integer, got '" +
                      value + "'");
  }
}

std::size_t to_count(const std::string& key, const std::string& value) {
  const long long v = to_int(key, value);
  if (v < 0) throw ConfigError("config: key '" + key + "' must be >= 0");
  return static_cast<std::size_t>(v);
}

std::uint64_t to_seed(const std::string& key, const std::string& value) {
  try {
    std::size_t used = 0;
    const std::uint64_t v = std::stoull(value, &used);
    if (used != value.size()) throw std::invalid_argument(value);
    return v;
  } catch (const std::exception&) {
    throw ConfigError("config: key '" + key + "' needs an unsigned integer");
  }
}

bool to_bool(const std::string& key, const std::string& value) {
  if (value == "1" || value == "true") return true;
  if (value == "0" || value == "false") return false;
  throw ConfigError("config: key '" + key + "' needs a boolean (0/1)");
}

std::vector<std::string> split_list(const std::string& value) {
  std::vector<std::string> items;
  std::string item;
  std::istringstream in(value);
  while (in >> item) {
    if (!item.empty() && item.back() == ',') item.pop_back();
    if (!item.empty()) items.push_back(item);
  }
  return items;
}

void apply(RunConfig& cfg, const std::string& key, const std::string& value) {
  if (key == "task") cfg.task = value;
  else if (key == "mode") cfg.mode = value;
  else if (key == "arch") cfg.arch = value;
  else if (key == "epochs") cfg.epochs = static_cast<int>(to_int(key, value));
  else if (key == "base.epochs")
    cfg.base_epochs = static_cast<int>(to_int(key, value));
  else if (key == "batch-size") cfg.batch_size = to_count(key, value);
  else if (key == "seed") cfg.seed = to_seed(key, value);
  else if (key == "layer-scope") cfg.layer_scope = value;
  else if (key == "out-dir") cfg.out_dir = value;
  else if (key == "normalize") cfg.normalize = to_bool(key, value);
  else if (key == "projection.size")
    cfg.projection = parse_projection_size(value);
  else if (key == "slices") {
    cfg.slice_counts.clear();
    for (const auto& item : split_list(value))
      cfg.slice_counts.push_back(to_count(key, item));
  } else if (key == "codes.length") cfg.code_length = to_count(key, value);
  else if (key == "codes.seed") cfg.code_seed = to_seed(key, value);
  else if (key == "codes.file") cfg.code_file = value;
  else if (key == "loss.alpha") cfg.loss.alpha = to_real(key, value);
  else if (key == "loss.beta") cfg.loss.beta = to_real(key, value);
  else if (key == "loss.tau") cfg.loss.tau = to_real(key, value);
  else if (key == "loss.metric") cfg.loss.metric = parse_metric(value);
  else if (key == "loss.transform")
    cfg.loss.transform = parse_transform(value);
  else if (key == "loss.mixup")
    cfg.loss.mixup_concentration = to_real(key, value);
  else if (key == "opt.kind")
    cfg.opt.kind = OptimizerConfig::parse_kind(value);
  else if (key == "opt.lr") cfg.opt.lr = to_real(key, value);
  else if (key == "opt.momentum") cfg.opt.momentum = to_real(key, value);
  else if (key == "opt.beta1") cfg.opt.beta1 = to_real(key, value);
  else if (key == "opt.beta2") cfg.opt.beta2 = to_real(key, value);
  else if (key == "opt.eps") cfg.opt.eps = to_real(key, value);
  else if (key == "opt.weight-decay")
    cfg.opt.weight_decay = to_real(key, value);
  else if (key == "blobs.classes") cfg.blobs.num_classes = to_count(key, value);
  else if (key == "blobs.dim") cfg.blobs.dim = to_count(key, value);
  else if (key == "blobs.per-class") cfg.blobs.per_class = to_count(key, value);
  else if (key == "blobs.separation")
    cfg.blobs.separation = to_real(key, value);
  else if (key == "blobs.noise") cfg.blobs.noise = to_real(key, value);
  else if (key == "blobs.seed") cfg.blobs.seed = to_seed(key, value);
  else if (key == "blobs.test-per-class")
    cfg.blobs_test_per_class = to_count(key, value);
  else if (key == "mnist.train-images") cfg.mnist_train_images = value;
  else if (key == "mnist.train-labels") cfg.mnist_train_labels = value;
  else if (key == "mnist.test-images") cfg.mnist_test_images = value;
  else if (key == "mnist.test-labels") cfg.mnist_test_labels = value;
  else if (key == "mnist.val") cfg.mnist_val = to_count(key, value);
  else if (key == "holdout") {
    cfg.holdout.clear();
    for (const auto& item : split_list(value))
      cfg.holdout.insert(static_cast<int>(to_int(key, item)));
  } else if (key == "ood.classes") cfg.ood_classes = to_count(key, value);
  else if (key == "ood.per-class") cfg.ood_per_class = to_count(key, value);
  else if (key == "ood.separation") cfg.ood_separation = to_real(key, value);
  else if (key == "ood.noise") cfg.ood_noise = to_real(key, value);
  else if (key == "ood.seed") cfg.ood_seed = to_seed(key, value);
  else
    throw ConfigError("config: unknown key '" + key + "'");
}

}  // namespace

RunConfig parse_run_config(std::istream& in) {
  RunConfig cfg;
  std::string line;
  std::size_t line_no = 0;
  std::set<std::string> seen;
  while (std::getline(in, line)) {
    ++line_no;
    const std::size_t hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const std::size_t eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError("config line " + std::to_string(line_no) +
                        ": expected 'key = value'");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key.empty() || value.empty())
      throw ConfigError("config line " + std::to_string(line_no) +
                        ": empty key or value");
    if (!seen.insert(key).second)
      throw ConfigError("config line " + std::to_string(line_no) +
                        ": duplicate key '" + key + "'");
    apply(cfg, key, value);
  }
  cfg.validate();
  return cfg;
}

RunConfig load_run_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path);
  return parse_run_config(in);
}

}  // namespace tac
