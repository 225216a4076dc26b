#pragma once

#include <cstdint>
#include <iosfwd>
#include <set>
#include <string>
#include <vector>

#include "tac/data.hpp"
#include "tac/losses.hpp"
#include "tac/model.hpp"
#include "tac/optimizer.hpp"

namespace tac {

/// Everything a run needs, parsed from a strict flat `key = value` file
/// ('#' comments, dotted keys, unknown keys rejected).
struct RunConfig {
  std::string task = "blobs";  // blobs | mnist
  std::string mode = "scratch";  // scratch | addon
  std::string arch = "mlp";      // mlp | conv4
  std::vector<std::size_t> slice_counts{8};
  std::size_t code_length = 0;  // 0: inferred from slice counts
  std::uint64_t code_seed = 0;
  std::string code_file;  // optional pre-generated codebook
  LossConfig loss;
  OptimizerConfig opt;
  int epochs = 100;
  int base_epochs = 30;  // add-on mode: softmax pre-training budget
  std::size_t batch_size = 64;
  std::uint64_t seed = 0;
  std::string layer_scope = "full";  // "full" or a tapped layer id
  std::string out_dir = ".";
  ProjectionSize projection = ProjectionSize::Small;
  bool normalize = false;

  BlobSpec blobs;
  std::size_t blobs_test_per_class = 125;

  std::string mnist_train_images, mnist_train_labels;
  std::string mnist_test_images, mnist_test_labels;
  std::size_t mnist_val = 5000;

  std::set<int> holdout;  // classes removed from training (OOD protocol)

  // separate far-class pool for blobs OOD runs
  std::size_t ood_classes = 2;
  std::size_t ood_per_class = 250;
  double ood_separation = 18.0;
  double ood_noise = 1.0;
  std::uint64_t ood_seed = 9000;

  LayerScope scope() const;
  void validate() const;
};

RunConfig parse_run_config(std::istream& in);
RunConfig load_run_config(const std::string& path);

}  // namespace tac
