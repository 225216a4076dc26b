#pragma once

#include <string>
#include <vector>

#include "tac/tensor.hpp"

namespace tac {

struct OptimizerConfig {
  enum class Kind { SgdMomentum, Adam };
  Kind kind = Kind::SgdMomentum;
  double lr = 0.01;
  double momentum = 0.9;
  double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;  // adam
  double weight_decay = 0.0;

  static OptimizerConfig::Kind parse_kind(const std::string& name);
  void validate() const;
};

class Optimizer {
 public:
  explicit Optimizer(OptimizerConfig config) : config_(config) {
    config_.validate();
  }

  // Applies one update from the parameters' accumulated gradients,
  // then clears them.
  void step(std::vector<Tensor>& params);

  const OptimizerConfig& config() const { return config_; }

 private:
  OptimizerConfig config_;
  std::vector<std::vector<double>> m_;  // momentum / first moment
  std::vector<std::vector<double>> v_;  // second moment (adam)
  long step_count_ = 0;
};

}  // namespace tac
