#pragma once

#include <cstdint>
#include <set>
#include <string>
#include <vector>

namespace tac {

enum class Split { Train, Val, Test };

struct Dataset {
  std::vector<std::size_t> input_shape;  // per-sample, e.g. {1,28,28} or {d}
  std::vector<double> inputs;            // N x prod(input_shape), row-major
  std::vector<int> labels;               // 1-based class labels
  std::size_t num_classes = 0;

  std::size_t num_samples() const { return labels.size(); }
  std::size_t sample_size() const;
  const double* sample(std::size_t i) const;

  Dataset subset(const std::vector<std::size_t>& indices) const;
};

// ---------------------------------------------------------------------------
// MNIST IDX
// ---------------------------------------------------------------------------

// Parses IDX image/label pairs (big-endian magic 0x00000803 / 0x00000801).
// Pixels are scaled to [0,1]; labels are shifted to [1..10].
Dataset load_mnist_idx(const std::string& images_path,
                       const std::string& labels_path);

// Byte-level writer; inverse of load_mnist_idx for in-range data.
void save_mnist_idx(const Dataset& ds, const std::string& images_path,
                    const std::string& labels_path);

// ---------------------------------------------------------------------------
// synthetic blobs
// ---------------------------------------------------------------------------

struct BlobSpec {
  std::size_t num_classes = 4;
  std::size_t dim = 20;
  std::size_t per_class = 500;
  double separation = 6.0;  // class center scale
  double noise = 1.0;       // isotropic sample noise
  std::uint64_t seed = 0;

  void validate() const;
};

// Seeded class centers on random unit directions scaled by `separation`;
// samples are center + noise * standard normal.
Dataset synth_blobs(const BlobSpec& spec);

// CSV with header "label,f0,...,f{d-1}".
void save_blobs_csv(const Dataset& ds, const std::string& path);
Dataset load_blobs_csv(const std::string& path);

// ---------------------------------------------------------------------------
// splits
// ---------------------------------------------------------------------------

struct HoldoutResult {
  Dataset in_dist;                  // labels densely re-indexed to [1..K']
  Dataset ood;                      // original labels, reporting only
  std::vector<int> original_labels; // original label of new class i+1
};

HoldoutResult holdout_split(const Dataset& ds, const std::set<int>& holdout);

// First (N - n_val) samples train, last n_val validation.
std::pair<Dataset, Dataset> split_tail_val(const Dataset& ds,
                                           std::size_t n_val);

// ---------------------------------------------------------------------------
// batches / normalization
// ---------------------------------------------------------------------------

// Seeded per-epoch shuffle (stream seed ^ epoch); last partial batch kept.
std::vector<std::vector<std::size_t>> batches(std::size_t n,
                                              std::size_t batch_size,
                                              std::uint64_t seed, int epoch);

struct Normalization {
  bool per_feature = false;  // global mean/std for images
  std::vector<double> mean, scale;

  void apply(Dataset& ds) const;
};

// Statistics from the train split only.
Normalization fit_normalization(const Dataset& train, bool per_feature);

}  // namespace tac
