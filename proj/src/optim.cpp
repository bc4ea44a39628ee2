#include "fedat/optim.hpp"

#include <cmath>

namespace fedat {

std::string to_string(OptimizerKind k) { return k == OptimizerKind::adam ? "adam" : "sgd_momentum"; }

OptimizerKind optimizer_kind_from_string(const std::string& name) {
  if (name == "sgd_momentum" || name == "sgd") return OptimizerKind::sgd_momentum;
  if (name == "adam") return OptimizerKind::adam;
  throw Error("unknown optimizer '" + name + "'");
}

void OptimizerConfig::validate() const {
  if (!(learning_rate > 0.0)) throw Error("optimizer.learning_rate must be > 0");
  if (batch_size <= 0) throw Error("optimizer.batch_size must be positive");
  if (kind == OptimizerKind::sgd_momentum && !(momentum >= 0.0 && momentum < 1.0))
    throw Error("optimizer.momentum must lie in [0, 1)");
  if (kind == OptimizerKind::adam) {
    if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0))
      throw Error("optimizer adam betas must lie in [0, 1)");
    if (!(eps_hat > 0.0)) throw Error("optimizer.eps_hat must be > 0");
  }
}

void step(Vector& params, const Vector& grads, const OptimizerConfig& config, OptimizerState& state) {
  if (grads.size() != params.size()) throw Error("gradient and parameter lengths differ");
  if (!grads.allFinite()) throw Error("non-finite gradient passed to optimizer");
  if (state.first.size() != params.size()) state.first = Vector::Zero(params.size());
  ++state.steps;

  if (config.kind == OptimizerKind::sgd_momentum) {
    state.first = config.momentum * state.first - config.learning_rate * grads;
    params += state.first;
    return;
  }

  if (state.second.size() != params.size()) state.second = Vector::Zero(params.size());
  state.first = config.beta1 * state.first + (1.0 - config.beta1) * grads;
  state.second = config.beta2 * state.second + (1.0 - config.beta2) * grads.cwiseAbs2();
  const double c1 = 1.0 - std::pow(config.beta1, static_cast<double>(state.steps));
  const double c2 = 1.0 - std::pow(config.beta2, static_cast<double>(state.steps));
  params.array() -= config.learning_rate * (state.first.array() / c1) /
                    ((state.second.array() / c2).sqrt() + config.eps_hat);
}

}  // namespace fedat
