#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

namespace tac {

enum class DistanceMetric { L0, L1, L2, Linf, Cosine };

DistanceMetric parse_metric(const std::string& name);
std::string metric_name(DistanceMetric metric);

// Whether a metric has usable (sub)gradients for training.
bool metric_trainable(DistanceMetric metric);

/// Fixed random binary class codes: K rows of L bits, each bit an
/// independent Bernoulli(0.5) draw from the seeded generator. Rows are
/// guaranteed pairwise distinct; on a collision the whole book is
/// regenerated with seed+1 and `seed()` reports the seed actually used.
class CodeBook {
 public:
  CodeBook() = default;  // empty book; fill via generate/load

  static CodeBook generate(std::size_t num_classes, std::size_t length,
                           std::uint64_t seed);

  std::size_t num_classes() const { return k_; }
  std::size_t length() const { return l_; }
  std::uint64_t seed() const { return seed_; }

  // Row for 1-based class label.
  std::span<const double> code(std::size_t label) const;
  const std::vector<double>& bits() const { return bits_; }

  void save(std::ostream& out) const;
  void save_file(const std::string& path) const;
  static CodeBook load(std::istream& in);
  static CodeBook load_file(const std::string& path);

  bool operator==(const CodeBook& other) const = default;

 private:
  std::size_t k_ = 0, l_ = 0;
  std::uint64_t seed_ = 0;
  std::vector<double> bits_;  // K x L row-major, values in {0,1}
};

// The named distance. L0 counts coordinates differing by more than 1e-9;
// cosine is 1 - cos(u, v) and rejects zero vectors.
double distance(std::span<const double> u, std::span<const double> v,
                DistanceMetric metric);

struct NearestCode {
  std::size_t label = 0;  // 1-based class
  double dist = 0.0;
};

// Closest code to the profile; ties go to the smallest class index.
NearestCode nearest_code(std::span<const double> profile, const CodeBook& book,
                         DistanceMetric metric);

struct PairwiseStats {
  double min = 0.0, mean = 0.0, max = 0.0;  // Hamming distances
};

PairwiseStats pairwise_stats(const CodeBook& book);

}  // namespace tac
