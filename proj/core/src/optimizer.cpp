#include "tac/optimizer.hpp"

#include <cmath>

#include "tac/errors.hpp"

namespace tac {

OptimizerConfig::Kind OptimizerConfig::parse_kind(const std::string& name) {
  if (name == "sgd" || name == "sgd-momentum") return Kind::SgdMomentum;
  if (name == "adam") return Kind::Adam;
  throw ConfigError("unknown optimizer: " + name);
}

void OptimizerConfig::validate() const {
  if (lr < 0.0) throw ConfigError("optimizer: learning rate must be >= 0");
  if (weight_decay < 0.0)
    throw ConfigError("optimizer: weight decay must be >= 0");
}

void Optimizer::step(std::vector<Tensor>& params) {
  if (m_.empty()) {
    for (auto& p : params) m_.emplace_back(p.size(), 0.0);
    if (config_.kind == OptimizerConfig::Kind::Adam)
      for (auto& p : params) v_.emplace_back(p.size(), 0.0);
  }
  if (m_.size() != params.size())
    throw DimensionError("optimizer: parameter count changed between steps");
  ++step_count_;
  for (std::size_t pi = 0; pi < params.size(); ++pi) {
    auto data = params[pi].mutable_data();
    const auto grad = params[pi].grad();
    auto& m = m_[pi];
    if (m.size() != data.size())
      throw DimensionError("optimizer: parameter shape changed");
    if (config_.kind == OptimizerConfig::Kind::SgdMomentum) {
      for (std::size_t i = 0; i < data.size(); ++i) {
        const double g = grad[i] + config_.weight_decay * data[i];
        m[i] = config_.momentum * m[i] + g;
        data[i] -= config_.lr * m[i];
      }
    } else {
      auto& v = v_[pi];
      const double bc1 = 1.0 - std::pow(config_.beta1, step_count_);
      const double bc2 = 1.0 - std::pow(config_.beta2, step_count_);
      for (std::size_t i = 0; i < data.size(); ++i) {
        const double g = grad[i] + config_.weight_decay * data[i];
        m[i] = config_.beta1 * m[i] + (1.0 - config_.beta1) * g;
        v[i] = config_.beta2 * v[i] + (1.0 - config_.beta2) * g * g;
        const double mhat = m[i] / bc1;
        const double vhat = v[i] / bc2;
        data[i] -= config_.lr * mhat / (std::sqrt(vhat) + config_.eps);
      }
    }
    params[pi].zero_grad();
  }
}

}  // namespace tac
