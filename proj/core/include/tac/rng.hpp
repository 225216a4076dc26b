#pragma once

#include <cstdint>
#include <string_view>
#include <vector>

namespace tac {

/// Counter-based pseudorandom generator built on the SplitMix64 output
/// function. Constants: increment 0x9E3779B97F4A7C15 (2^64 / golden ratio),
/// mixers 0xBF58476D1CE4E5B9 and 0x94D049BB133111EB (Stafford mix 13).
///
/// The i-th draw of a stream is a pure function of (stream key, i), so
/// streams are splittable: substream(name) derives an independent key by
/// hashing the name into the parent key (FNV-1a), and draws of one stream
/// never perturb another.
class Rng {
 public:
  explicit Rng(std::uint64_t seed);

  // Independent named substream (e.g. "data", "init", "mixup", "folds").
  Rng substream(std::string_view name) const;
  Rng substream(std::uint64_t index) const;

  std::uint64_t next_u64();
  double uniform();                       // [0, 1)
  double uniform(double lo, double hi);   // [lo, hi)
  double normal();                        // standard normal, Box-Muller
  std::uint64_t uniform_int(std::uint64_t n);  // [0, n)
  bool bernoulli(double p);
  double gamma(double shape);             // shape > 0, unit scale
  double beta(double a, double b);

  // Fisher-Yates; permutes indices [0, n).
  std::vector<std::size_t> permutation(std::size_t n);

 private:
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
};

// The raw SplitMix64 output function; value of draw `counter` under `key`.
std::uint64_t splitmix64(std::uint64_t key, std::uint64_t counter);

}  // namespace tac
