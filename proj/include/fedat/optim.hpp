#pragma once

#include <string>

#include "fedat/types.hpp"

namespace fedat {

enum class OptimizerKind { sgd_momentum, adam };

std::string to_string(OptimizerKind k);
OptimizerKind optimizer_kind_from_string(const std::string& name);

struct OptimizerConfig {
  OptimizerKind kind = OptimizerKind::sgd_momentum;
  double learning_rate = 1e-2;
  double momentum = 0.9;  // sgd_momentum only
  double beta1 = 0.9;     // adam only
  double beta2 = 0.999;
  double eps_hat = 1e-7;
  int batch_size = 32;
  /// Clear optimizer state when a client receives new global weights.
  bool reset_each_round = true;

  void validate() const;
};

/// Velocity for SGD, first/second moments for Adam.
struct OptimizerState {
  Vector first;
  Vector second;
  long steps = 0;

  void reset() {
    first.resize(0);
    second.resize(0);
    steps = 0;
  }
};

/// One in-place update of `params`. Throws Error on a non-finite gradient.
///   sgd:  v <- mu v - lr g;  theta <- theta + v
///   adam: bias-corrected moments, theta <- theta - lr m_hat / (sqrt(v_hat) + eps)
void step(Vector& params, const Vector& grads, const OptimizerConfig& config, OptimizerState& state);

}  // namespace fedat
