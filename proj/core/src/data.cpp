#include "tac/data.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <map>
#include <sstream>

#include "tac/errors.hpp"
#include "tac/rng.hpp"

namespace tac {

std::size_t Dataset::sample_size() const {
  std::size_t s = 1;
  for (std::size_t e : input_shape) s *= e;
  return s;
}

const double* Dataset::sample(std::size_t i) const {
  return inputs.data() + i * sample_size();
}

Dataset Dataset::subset(const std::vector<std::size_t>& indices) const {
  Dataset out;
  out.input_shape = input_shape;
  out.num_classes = num_classes;
  const std::size_t s = sample_size();
  out.inputs.reserve(indices.size() * s);
  out.labels.reserve(indices.size());
  for (std::size_t i : indices) {
    out.inputs.insert(out.inputs.end(), inputs.begin() + i * s,
                      inputs.begin() + (i + 1) * s);
    out.labels.push_back(labels[i]);
  }
  return out;
}

// ---------------------------------------------------------------------------
// IDX
// ---------------------------------------------------------------------------

namespace {

constexpr std::uint32_t kImagesMagic = 0x00000803;
constexpr std::uint32_t kLabelsMagic = 0x00000801;

std::uint32_t read_be32(std::istream& in, const std::string& path,
                        std::streamoff offset) {
  unsigned char b[4];
  if (!in.read(reinterpret_cast<char*>(b), 4))
    throw FormatError(path + ": truncated at offset " +
                      std::to_string(offset));
  return (std::uint32_t(b[0]) << 24) | (std::uint32_t(b[1]) << 16) |
         (std::uint32_t(b[2]) << 8) | std::uint32_t(b[3]);
}

void write_be32(std::ostream& out, std::uint32_t v) {
  const unsigned char b[4] = {
      static_cast<unsigned char>(v >> 24), static_cast<unsigned char>(v >> 16),
      static_cast<unsigned char>(v >> 8), static_cast<unsigned char>(v)};
  out.write(reinterpret_cast<const char*>(b), 4);
}

}  // namespace

Dataset load_mnist_idx(const std::string& images_path,
                       const std::string& labels_path) {
  std::ifstream img(images_path, std::ios::binary);
  if (!img) throw FormatError("cannot open: " + images_path);
  std::ifstream lab(labels_path, std::ios::binary);
  if (!lab) throw FormatError("cannot open: " + labels_path);

  const std::uint32_t img_magic = read_be32(img, images_path, 0);
  if (img_magic != kImagesMagic)
    throw FormatError(images_path + ": bad magic at offset 0");
  const std::uint32_t count = read_be32(img, images_path, 4);
  const std::uint32_t rows = read_be32(img, images_path, 8);
  const std::uint32_t cols = read_be32(img, images_path, 12);

  const std::uint32_t lab_magic = read_be32(lab, labels_path, 0);
  if (lab_magic != kLabelsMagic)
    throw FormatError(labels_path + ": bad magic at offset 0");
  const std::uint32_t lab_count = read_be32(lab, labels_path, 4);
  if (lab_count != count)
    throw FormatError(labels_path + ": label count " +
                      std::to_string(lab_count) + " != image count " +
                      std::to_string(count));

  Dataset ds;
  ds.input_shape = {1, rows, cols};
  ds.num_classes = 10;
  ds.inputs.resize(std::size_t(count) * rows * cols);
  ds.labels.resize(count);

  std::vector<unsigned char> buf(std::size_t(rows) * cols);
  for (std::uint32_t i = 0; i < count; ++i) {
    if (!img.read(reinterpret_cast<char*>(buf.data()), buf.size()))
      throw FormatError(images_path + ": truncated at offset " +
                        std::to_string(16 + std::size_t(i) * buf.size()));
    for (std::size_t p = 0; p < buf.size(); ++p)
      ds.inputs[std::size_t(i) * buf.size() + p] = buf[p] / 255.0;
    unsigned char y;
    if (!lab.read(reinterpret_cast<char*>(&y), 1))
      throw FormatError(labels_path + ": truncated at offset " +
                        std::to_string(8 + i));
    if (y > 9) throw FormatError(labels_path + ": label byte out of range");
    ds.labels[i] = int(y) + 1;
  }
  return ds;
}

void save_mnist_idx(const Dataset& ds, const std::string& images_path,
                    const std::string& labels_path) {
  if (ds.input_shape.size() != 3 || ds.input_shape[0] != 1)
    throw FormatError("save_mnist_idx: expects [1,H,W] samples");
  std::ofstream img(images_path, std::ios::binary);
  if (!img) throw FormatError("cannot open for write: " + images_path);
  std::ofstream lab(labels_path, std::ios::binary);
  if (!lab) throw FormatError("cannot open for write: " + labels_path);

  const std::uint32_t n = static_cast<std::uint32_t>(ds.num_samples());
  write_be32(img, kImagesMagic);
  write_be32(img, n);
  write_be32(img, static_cast<std::uint32_t>(ds.input_shape[1]));
  write_be32(img, static_cast<std::uint32_t>(ds.input_shape[2]));
  write_be32(lab, kLabelsMagic);
  write_be32(lab, n);

  const std::size_t s = ds.sample_size();
  for (std::uint32_t i = 0; i < n; ++i) {
    for (std::size_t p = 0; p < s; ++p) {
      const double v = ds.inputs[std::size_t(i) * s + p];
      const unsigned char b =
          static_cast<unsigned char>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0));
      img.put(static_cast<char>(b));
    }
    lab.put(static_cast<char>(ds.labels[i] - 1));
  }
}

// ---------------------------------------------------------------------------
// blobs
// ---------------------------------------------------------------------------

void BlobSpec::validate() const {
  if (num_classes < 2) throw ConfigError("blobs: need at least 2 classes");
  if (dim < 1) throw ConfigError("blobs: dim must be >= 1");
  if (per_class < 1) throw ConfigError("blobs: per_class must be >= 1");
  if (separation <= 0.0) throw ConfigError("blobs: separation must be > 0");
  if (noise <= 0.0) throw ConfigError("blobs: noise must be > 0");
}

Dataset synth_blobs(const BlobSpec& spec) {
  spec.validate();
  Rng root(spec.seed);
  Rng centers_rng = root.substream("centers");
  Rng noise_rng = root.substream("noise");

  // centers: random unit directions scaled by separation
  std::vector<double> centers(spec.num_classes * spec.dim);
  for (std::size_t k = 0; k < spec.num_classes; ++k) {
    double norm = 0.0;
    for (std::size_t d = 0; d < spec.dim; ++d) {
      const double v = centers_rng.normal();
      centers[k * spec.dim + d] = v;
      norm += v * v;
    }
    norm = std::sqrt(norm);
    for (std::size_t d = 0; d < spec.dim; ++d)
      centers[k * spec.dim + d] *= spec.separation / norm;
  }

  Dataset ds;
  ds.input_shape = {spec.dim};
  ds.num_classes = spec.num_classes;
  ds.inputs.resize(spec.num_classes * spec.per_class * spec.dim);
  ds.labels.resize(spec.num_classes * spec.per_class);
  std::size_t i = 0;
  for (std::size_t k = 0; k < spec.num_classes; ++k)
    for (std::size_t s = 0; s < spec.per_class; ++s, ++i) {
      for (std::size_t d = 0; d < spec.dim; ++d)
        ds.inputs[i * spec.dim + d] =
            centers[k * spec.dim + d] + spec.noise * noise_rng.normal();
      ds.labels[i] = static_cast<int>(k) + 1;
    }
  return ds;
}

void save_blobs_csv(const Dataset& ds, const std::string& path) {
  if (ds.input_shape.size() != 1)
    throw FormatError("save_blobs_csv: expects flat feature vectors");
  std::ofstream out(path, std::ios::binary);
  if (!out) throw FormatError("cannot open for write: " + path);
  out << "label";
  for (std::size_t d = 0; d < ds.input_shape[0]; ++d) out << ",f" << d;
  out << "\n";
  out.precision(17);
  for (std::size_t i = 0; i < ds.num_samples(); ++i) {
    out << ds.labels[i];
    const double* x = ds.sample(i);
    for (std::size_t d = 0; d < ds.input_shape[0]; ++d) out << "," << x[d];
    out << "\n";
  }
}

Dataset load_blobs_csv(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open: " + path);
  std::string line;
  if (!std::getline(in, line) || line.rfind("label", 0) != 0)
    throw FormatError(path + ": missing header");
  const std::size_t dim = std::count(line.begin(), line.end(), ',');
  Dataset ds;
  ds.input_shape = {dim};
  int max_label = 0;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream ls(line);
    std::string cell;
    if (!std::getline(ls, cell, ',')) throw FormatError(path + ": bad row");
    ds.labels.push_back(std::stoi(cell));
    max_label = std::max(max_label, ds.labels.back());
    std::size_t got = 0;
    while (std::getline(ls, cell, ',')) {
      ds.inputs.push_back(std::stod(cell));
      ++got;
    }
    if (got != dim) throw FormatError(path + ": row width mismatch");
  }
  ds.num_classes = static_cast<std::size_t>(max_label);
  return ds;
}

// ---------------------------------------------------------------------------
// splits
// ---------------------------------------------------------------------------

HoldoutResult holdout_split(const Dataset& ds, const std::set<int>& holdout) {
  std::set<int> present(ds.labels.begin(), ds.labels.end());
  for (int h : holdout)
    if (!present.count(h))
      throw ConfigError("holdout class " + std::to_string(h) +
                        " not present in dataset");
  std::vector<int> kept;
  for (int c : present)
    if (!holdout.count(c)) kept.push_back(c);
  if (kept.empty())
    throw ConfigError("holdout covers every class in the dataset");

  std::map<int, int> remap;  // original -> dense [1..K']
  for (std::size_t i = 0; i < kept.size(); ++i)
    remap[kept[i]] = static_cast<int>(i) + 1;

  std::vector<std::size_t> in_idx, ood_idx;
  for (std::size_t i = 0; i < ds.num_samples(); ++i)
    (holdout.count(ds.labels[i]) ? ood_idx : in_idx).push_back(i);

  HoldoutResult result;
  result.in_dist = ds.subset(in_idx);
  result.in_dist.num_classes = kept.size();
  for (int& y : result.in_dist.labels) y = remap.at(y);
  result.ood = ds.subset(ood_idx);
  result.original_labels = kept;
  return result;
}

std::pair<Dataset, Dataset> split_tail_val(const Dataset& ds,
                                           std::size_t n_val) {
  if (n_val >= ds.num_samples())
    throw ConfigError("split_tail_val: n_val >= dataset size");
  std::vector<std::size_t> head(ds.num_samples() - n_val), tail(n_val);
  for (std::size_t i = 0; i < head.size(); ++i) head[i] = i;
  for (std::size_t i = 0; i < tail.size(); ++i) tail[i] = head.size() + i;
  return {ds.subset(head), ds.subset(tail)};
}

// ---------------------------------------------------------------------------
// batches / normalization
// ---------------------------------------------------------------------------

std::vector<std::vector<std::size_t>> batches(std::size_t n,
                                              std::size_t batch_size,
                                              std::uint64_t seed, int epoch) {
  if (batch_size < 1) throw ConfigError("batches: batch size must be >= 1");
  Rng rng(seed ^ static_cast<std::uint64_t>(epoch));
  const std::vector<std::size_t> order = rng.permutation(n);
  std::vector<std::vector<std::size_t>> out;
  for (std::size_t at = 0; at < n; at += batch_size) {
    const std::size_t end = std::min(at + batch_size, n);
    out.emplace_back(order.begin() + at, order.begin() + end);
  }
  return out;
}

Normalization fit_normalization(const Dataset& train, bool per_feature) {
  Normalization norm;
  norm.per_feature = per_feature;
  const std::size_t s = train.sample_size();
  const std::size_t n = train.num_samples();
  if (n == 0) throw ConfigError("fit_normalization: empty dataset");
  if (per_feature) {
    norm.mean.assign(s, 0.0);
    norm.scale.assign(s, 0.0);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t d = 0; d < s; ++d) norm.mean[d] += train.inputs[i * s + d];
    for (double& m : norm.mean) m /= static_cast<double>(n);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t d = 0; d < s; ++d) {
        const double v = train.inputs[i * s + d] - norm.mean[d];
        norm.scale[d] += v * v;
      }
    for (double& v : norm.scale)
      v = std::max(std::sqrt(v / static_cast<double>(n)), 1e-12);
  } else {
    double m = 0.0;
    for (double v : train.inputs) m += v;
    m /= static_cast<double>(train.inputs.size());
    double var = 0.0;
    for (double v : train.inputs) var += (v - m) * (v - m);
    var /= static_cast<double>(train.inputs.size());
    norm.mean = {m};
    norm.scale = {std::max(std::sqrt(var), 1e-12)};
  }
  return norm;
}

void Normalization::apply(Dataset& ds) const {
  const std::size_t s = ds.sample_size();
  if (per_feature) {
    if (mean.size() != s)
      throw DimensionError("normalization: feature width mismatch");
    for (std::size_t i = 0; i < ds.num_samples(); ++i)
      for (std::size_t d = 0; d < s; ++d) {
        double& v = ds.inputs[i * s + d];
        v = (v - mean[d]) / scale[d];
      }
  } else {
    for (double& v : ds.inputs) v = (v - mean[0]) / scale[0];
  }
}

}  // namespace tac
